"""
Measurement origin uncertainty: Poisson clutter, detection, association and
the likelihood of a measurement set.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from ..utils.config import CLUTTER_DEFAULTS
from ..utils.errors import CollocatedError, DomainError, SingularityError
from ..utils.helpers import wrap_to_2pi, wrap_to_pi
from .geometry import KinematicState
from .tmu import MeasCov, SignalModel, detection_probability, meas_cov_assumption1, snr

MEAS_DIM = 3


@dataclass(frozen=True)
class ClutterModel:
    """Spatially uniform Poisson clutter over the (d, v, theta) measurement space."""

    density: float = CLUTTER_DEFAULTS['density']
    V: float = CLUTTER_DEFAULTS['V']
    g: float = CLUTTER_DEFAULTS['g']
    N_cell: Optional[float] = None

    def __post_init__(self):
        if self.density < 0:
            raise DomainError(f"clutter density must be nonnegative, got {self.density}")
        if self.V <= 0 or self.g <= 0:
            raise DomainError("clutter volume and gate size must be positive")

    @classmethod
    def from_cells(cls, N_cell: float, P_FA: float, V: float, g: float = CLUTTER_DEFAULTS['g']) -> "ClutterModel":
        """Density from the resolution-cell count: N_cell * P_FA / V."""
        return cls(density=N_cell * P_FA / V, V=V, g=g, N_cell=N_cell)

    def expected_count(self, volume: Optional[float] = None) -> float:
        return self.density * (self.V if volume is None else volume)


@dataclass
class MeasurementSet:
    """Measurements of one scan as rows (d, v, theta)."""

    points: np.ndarray = field(default_factory=lambda: np.empty((0, MEAS_DIM)))
    gate_volume: Optional[float] = None
    target_index: Optional[int] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, MEAS_DIM)

    @property
    def m_k(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.m_k

    def __iter__(self):
        return iter(self.points)


def _relative(target: KinematicState, site: KinematicState):
    rel_p = target.position - site.position
    rng = float(np.hypot(*rel_p))
    if rng <= 0.0:
        raise CollocatedError("target coincides with a site")
    return rel_p, target.velocity - site.velocity, rng


def measurement_function(target: KinematicState, tx: KinematicState, rx: KinematicState) -> np.ndarray:
    """Noise-free bistatic range, bistatic velocity and DOA."""
    p_t, v_t, R_T = _relative(target, tx)
    p_r, v_r, R_R = _relative(target, rx)
    return np.array([
        R_T + R_R,
        p_t @ v_t / R_T + p_r @ v_r / R_R,
        wrap_to_2pi(np.arctan2(p_r[1], p_r[0])),
    ])


def measurement_jacobian(target: KinematicState, tx: KinematicState, rx: KinematicState) -> np.ndarray:
    """Jacobian of measurement_function w.r.t. [px, py, vx, vy]."""
    p_t, v_t, R_T = _relative(target, tx)
    p_r, v_r, R_R = _relative(target, rx)
    u_t, u_r = p_t / R_T, p_r / R_R

    H = np.zeros((MEAS_DIM, 4))
    H[0, :2] = u_t + u_r
    H[1, :2] = (v_t - (u_t @ v_t) * u_t) / R_T + (v_r - (u_r @ v_r) * u_r) / R_R
    H[1, 2:] = u_t + u_r
    H[2, :2] = np.array([-p_r[1], p_r[0]]) / R_R ** 2
    return H


def cardinality_probability(Pd, lambdaV, m_k: int):
    """Probability that the radar returns m_k measurements; vectorized over Pd and lambdaV."""
    if m_k < 0:
        raise DomainError(f"measurement count must be nonnegative, got {m_k}")
    Pd = np.asarray(Pd, dtype=float)
    clutter_only = (1.0 - Pd) * stats.poisson.pmf(m_k, lambdaV)
    value = clutter_only if m_k == 0 else clutter_only + Pd * stats.poisson.pmf(m_k - 1, lambdaV)
    return float(value) if np.ndim(value) == 0 else value


def association_probability(Pd: float, lambdaV: float, m_k: int) -> float:
    """Probability that one of the m_k measurements originated from the target."""
    if m_k < 1:
        raise DomainError("association probability needs at least one measurement")
    ell = (1.0 - Pd) * lambdaV + m_k * Pd
    return 0.0 if ell == 0.0 else float(m_k * Pd / ell)


def innovations(points: np.ndarray, expected: np.ndarray) -> np.ndarray:
    """Measurement residuals with the DOA component wrapped to (-pi, pi]."""
    residual = np.atleast_2d(points) - expected
    residual[:, 2] = wrap_to_pi(residual[:, 2])
    return residual


def conditional_likelihood(
    Z: MeasurementSet,
    expected: np.ndarray,
    R: MeasCov,
    Pd: float,
    clutter: ClutterModel,
    volume: Optional[float] = None,
) -> float:
    """
    Likelihood of a measurement set given the target state and its count.

    `expected` is h(x); the volume defaults to the set's gate volume, then
    to the clutter model volume.

    Raises:
        SingularityError: if R is not positive definite.
    """
    m = Z.m_k
    if m < 1:
        raise DomainError("likelihood of an empty measurement set is not defined")
    V = volume or Z.gate_volume or clutter.V
    try:
        gaussian = stats.multivariate_normal(mean=np.zeros(MEAS_DIM), cov=R.matrix)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularityError(f"measurement covariance is not positive definite: {exc}") from exc

    d = association_probability(Pd, clutter.density * V, m)
    densities = np.atleast_1d(gaussian.pdf(innovations(Z.points, expected)))
    return float((1.0 - d) / V ** m + d / (m * V ** (m - 1)) * densities.sum())


def gate_volume(R: MeasCov, g: float) -> float:
    """Volume of the g-sigma gate cube: (2g)^n * prod(sigma)."""
    return float((2.0 * g) ** MEAS_DIM * np.prod(R.sigmas))


def generate_measurements(
    rng: np.random.Generator,
    truth: KinematicState,
    tx: KinematicState,
    rx: KinematicState,
    sig: SignalModel,
    clutter: ClutterModel,
    center: Optional[np.ndarray] = None,
    half_widths: Optional[Sequence[float]] = None,
    pd: Optional[float] = None,
) -> MeasurementSet:
    """
    Simulate one scan.

    The target is detected with Pd at the true geometry and measured with the
    matching covariance. Poisson clutter falls uniformly in the box
    center +/- half_widths, by default the g-sigma gate around h(truth).
    """
    expected = measurement_function(truth, tx, rx)
    R_T = float(np.hypot(*(truth.position - tx.position)))
    R_R = float(np.hypot(*(truth.position - rx.position)))
    psi = snr(R_T, R_R, sig.vartheta0)
    R = meas_cov_assumption1(sig, psi)
    pd = detection_probability(psi, sig.P_FA) if pd is None else pd

    center = expected if center is None else np.asarray(center, dtype=float)
    half_widths = clutter.g * R.sigmas if half_widths is None else np.asarray(half_widths, dtype=float)
    volume = float(np.prod(2.0 * half_widths))

    points = []
    if rng.random() < pd:
        z = expected + rng.multivariate_normal(np.zeros(MEAS_DIM), R.matrix)
        z[2] = wrap_to_2pi(z[2])
        points.append(z)
    detected = bool(points)

    n_clutter = rng.poisson(clutter.density * volume)
    if n_clutter:
        false_alarms = center + rng.uniform(-1.0, 1.0, size=(n_clutter, MEAS_DIM)) * half_widths
        false_alarms[:, 2] = wrap_to_2pi(false_alarms[:, 2])
        points.extend(false_alarms)

    order = rng.permutation(len(points))
    target_index = int(np.flatnonzero(order == 0)[0]) if detected else None
    stacked = np.array(points)[order] if points else np.empty((0, MEAS_DIM))
    return MeasurementSet(stacked, gate_volume=volume, target_index=target_index)
