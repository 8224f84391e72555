import json
import os
from typing import Any

import numpy as np
from scipy import linalg

from .config import RIDGE_SCALE
from .errors import SingularityError


def ensure_dir(directory: str) -> str:
    """Ensure a directory exists."""
    os.makedirs(directory, exist_ok=True)
    return directory


def load_json(path: str) -> Any:
    """Load data from a JSON file."""
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def wrap_to_2pi(angle):
    """Map angles onto [0, 2*pi)."""
    wrapped = np.mod(np.asarray(angle, dtype=float), 2 * np.pi)
    # np.mod rounds tiny negative inputs up to exactly 2*pi
    wrapped = np.where(wrapped >= 2 * np.pi, 0.0, wrapped)
    return float(wrapped) if wrapped.ndim == 0 else wrapped


def wrap_to_pi(angle):
    """Map angles onto (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2 * np.pi)
    return float(wrapped) if wrapped.ndim == 0 else wrapped


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def spd_inverse(matrix: np.ndarray) -> np.ndarray:
    """
    Invert a symmetric positive-definite matrix.

    Falls back to a Tikhonov ridge of RIDGE_SCALE times the mean diagonal when
    the Cholesky factorization fails.

    Raises:
        SingularityError: when the matrix is not invertible even with the ridge.
    """
    matrix = symmetrize(np.asarray(matrix, dtype=float))
    if not np.all(np.isfinite(matrix)):
        raise SingularityError("matrix has non-finite entries")
    eye = np.eye(matrix.shape[0])
    try:
        return symmetrize(linalg.cho_solve(linalg.cho_factor(matrix), eye))
    except linalg.LinAlgError:
        pass

    ridge = RIDGE_SCALE * max(float(np.trace(matrix)) / matrix.shape[0], 1.0)
    try:
        return symmetrize(linalg.cho_solve(linalg.cho_factor(matrix + ridge * eye), eye))
    except linalg.LinAlgError as exc:
        raise SingularityError(f"matrix is not positive definite: {exc}") from exc
