"""EKF prediction and probabilistic data association (PDA) update in clutter."""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.stats import chi2

from ..utils import get_logger
from ..utils.config import DIVERGENCE_FACTOR, MOTION_DEFAULTS, PDA_ITERATIONS, PDA_STEP_TOL
from ..utils.errors import CollocatedError, DomainError, LengthMismatchError, SingularityError
from ..utils.helpers import symmetrize
from .clutter import (
    MEAS_DIM,
    ClutterModel,
    MeasurementSet,
    innovations,
    measurement_function,
    measurement_jacobian,
)
from .geometry import KinematicState, build_geometry
from .tmu import MeasCov, SignalModel, tmu_at

logger = get_logger(__name__)


@dataclass
class TrackEstimate:
    mean: np.ndarray
    cov: np.ndarray
    k: int = 0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(4)
        self.cov = symmetrize(np.asarray(self.cov, dtype=float))

    @property
    def state(self) -> KinematicState:
        return KinematicState.from_array(self.mean)


@dataclass(frozen=True)
class MotionModel:
    """Linear motion x_k = F x_{k-1} + w, w ~ N(0, Q)."""

    F: np.ndarray
    Q: np.ndarray
    T: float

    @classmethod
    def ncv(cls, T: float = MOTION_DEFAULTS['T'], q: float = MOTION_DEFAULTS['q']) -> "MotionModel":
        """Nearly constant velocity model with white-acceleration intensity q per axis."""
        if T <= 0 or q < 0:
            raise DomainError("sampling period must be positive and q nonnegative")
        F = np.eye(4)
        F[0, 2] = F[1, 3] = T
        Q = q * np.array([
            [T ** 3 / 3, 0, T ** 2 / 2, 0],
            [0, T ** 3 / 3, 0, T ** 2 / 2],
            [T ** 2 / 2, 0, T, 0],
            [0, T ** 2 / 2, 0, T],
        ])
        return cls(F=F, Q=Q, T=T)

    def sample(self, rng: np.random.Generator, state: np.ndarray) -> np.ndarray:
        noise = rng.multivariate_normal(np.zeros(4), self.Q) if np.any(self.Q) else np.zeros(4)
        return self.F @ state + noise


def predict(track: TrackEstimate, model: MotionModel) -> TrackEstimate:
    return TrackEstimate(
        mean=model.F @ track.mean,
        cov=model.F @ track.cov @ model.F.T + model.Q,
        k=track.k + 1,
    )


def _innovation_covariance(cov: np.ndarray, H: np.ndarray, R: MeasCov):
    S = symmetrize(H @ cov @ H.T + R.matrix)
    try:
        factor = linalg.cho_factor(S)
    except linalg.LinAlgError as exc:
        raise SingularityError(f"innovation covariance is not positive definite: {exc}") from exc
    return S, factor


def _pda_moments(
    track: TrackEstimate,
    points: np.ndarray,
    about: np.ndarray,
    R: MeasCov,
    Pd: float,
    missed: float,
    tx: KinematicState,
    rx: KinematicState,
) -> TrackEstimate:
    """PDA posterior mean and covariance with h linearized about `about`."""
    point = KinematicState.from_array(about)
    H = measurement_jacobian(point, tx, rx)
    S, factor = _innovation_covariance(track.cov, H, R)
    nu = innovations(points, measurement_function(point, tx, rx)) - H @ (track.mean - about)
    d2 = np.einsum('ij,ij->i', nu, linalg.cho_solve(factor, nu.T).T)

    log_det = 2.0 * np.sum(np.log(np.diag(factor[0])))
    gaussian = np.exp(-0.5 * d2 - 0.5 * (MEAS_DIM * np.log(2.0 * np.pi) + log_det))
    weights = Pd * gaussian
    total = missed + weights.sum()
    if total <= 0.0:
        return TrackEstimate(track.mean.copy(), track.cov.copy(), track.k)
    beta0 = missed / total
    betas = weights / total

    gain = linalg.cho_solve(factor, H @ track.cov).T
    combined = betas @ nu
    mean = track.mean + gain @ combined

    corrected = track.cov - gain @ S @ gain.T
    spread = gain @ ((nu.T * betas) @ nu - np.outer(combined, combined)) @ gain.T
    cov = beta0 * track.cov + (1.0 - beta0) * corrected + spread
    return TrackEstimate(mean, cov, track.k)


def pda_update(
    track: TrackEstimate,
    Z: MeasurementSet,
    R: MeasCov,
    Pd: float,
    clutter: ClutterModel,
    tx: KinematicState,
    rx: KinematicState,
    iterations: int = 1,
) -> TrackEstimate:
    """
    PDA measurement update.

    Measurements outside the g-sigma ellipsoid of the predicted innovation
    covariance are discarded; with none left the prediction is returned. With
    iterations > 1 the measurement function is re-linearized about the updated
    mean (Gauss-Newton steps on the validated set) until the position moves
    less than PDA_STEP_TOL.

    Raises:
        SingularityError: if the innovation covariance is not positive definite.
    """
    if iterations < 1:
        raise DomainError(f"iterations must be at least 1, got {iterations}")
    if Z.m_k == 0:
        return TrackEstimate(track.mean.copy(), track.cov.copy(), track.k)

    predicted = track.state
    H = measurement_jacobian(predicted, tx, rx)
    _, factor = _innovation_covariance(track.cov, H, R)
    nu = innovations(Z.points, measurement_function(predicted, tx, rx))
    d2 = np.einsum('ij,ij->i', nu, linalg.cho_solve(factor, nu.T).T)
    gate = clutter.g ** 2
    inside = d2 < gate
    if not np.any(inside):
        return TrackEstimate(track.mean.copy(), track.cov.copy(), track.k)
    points = Z.points[inside]

    missed = clutter.density * (1.0 - Pd * chi2.cdf(gate, MEAS_DIM))
    updated = _pda_moments(track, points, track.mean, R, Pd, missed, tx, rx)
    for _ in range(iterations - 1):
        try:
            refined = _pda_moments(track, points, updated.mean, R, Pd, missed, tx, rx)
        except CollocatedError:
            break
        moved = float(np.hypot(*(refined.mean[:2] - updated.mean[:2])))
        updated = refined
        if moved < PDA_STEP_TOL:
            break
    return updated


class EkfPdaTracker:
    """EKF-PDA tracker fed with Pd and R evaluated at the predicted geometry."""

    def __init__(self, model: MotionModel, sig: SignalModel, clutter: ClutterModel,
                 iterations: int = PDA_ITERATIONS):
        if iterations < 1:
            raise DomainError(f"iterations must be at least 1, got {iterations}")
        self.model = model
        self.sig = sig
        self.clutter = clutter
        self.iterations = iterations

    def measurement_quality(self, track: TrackEstimate, tx: KinematicState, rx: KinematicState):
        geom = build_geometry(track.state, tx, rx)
        _, pd, R = tmu_at(self.sig, geom.R_T, geom.R_R)
        return pd, R

    def gate_box(self, predicted: TrackEstimate, tx: KinematicState, rx: KinematicState):
        """Center and half-widths of the g-sigma box around the predicted measurement."""
        _, R = self.measurement_quality(predicted, tx, rx)
        H = measurement_jacobian(predicted.state, tx, rx)
        S, _ = _innovation_covariance(predicted.cov, H, R)
        return measurement_function(predicted.state, tx, rx), self.clutter.g * np.sqrt(np.diag(S))

    def update(self, predicted: TrackEstimate, Z: MeasurementSet,
               tx: KinematicState, rx: KinematicState) -> TrackEstimate:
        pd, R = self.measurement_quality(predicted, tx, rx)
        return pda_update(predicted, Z, R, pd, self.clutter, tx, rx, self.iterations)

    def predict(self, track: TrackEstimate) -> TrackEstimate:
        return predict(track, self.model)


@dataclass(frozen=True)
class RmseResult:
    position: np.ndarray
    velocity: np.ndarray
    n_runs: int


def rmse(estimates: Sequence, truths: Sequence, mask: Optional[np.ndarray] = None) -> RmseResult:
    """
    Per-step position and velocity RMSE over runs.

    estimates and truths have shape (runs, steps, 4); mask optionally selects runs.

    Raises:
        LengthMismatchError: if the shapes differ.
    """
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truths, dtype=float)
    if est.shape != tru.shape or est.ndim != 3 or est.shape[-1] != 4 or est.shape[0] < 1:
        raise LengthMismatchError(f"estimate shape {est.shape} does not match truth shape {tru.shape}")
    err = est - tru
    if mask is not None:
        err = err[np.asarray(mask, dtype=bool)]
    pos = np.sqrt(np.mean(np.sum(err[..., :2] ** 2, axis=-1), axis=0))
    vel = np.sqrt(np.mean(np.sum(err[..., 2:] ** 2, axis=-1), axis=0))
    return RmseResult(position=pos, velocity=vel, n_runs=err.shape[0])


def is_diverged(estimate: np.ndarray, truth: np.ndarray, prior_pos_std: float) -> bool:
    """Position error beyond DIVERGENCE_FACTOR prior standard deviations."""
    error = np.hypot(*(np.asarray(estimate)[:2] - np.asarray(truth)[:2]))
    return bool(error > DIVERGENCE_FACTOR * prior_pos_std)


def initial_track(truth: KinematicState, prior_pos_std: float, prior_vel_std: float,
                  rng: np.random.Generator) -> Tuple[TrackEstimate, np.ndarray]:
    """Initial estimate drawn around the truth from the prior covariance."""
    cov = np.diag([prior_pos_std ** 2] * 2 + [prior_vel_std ** 2] * 2)
    mean = truth.as_array() + rng.multivariate_normal(np.zeros(4), cov)
    return TrackEstimate(mean, cov, 0), cov
