"""
Bistatic transmitter-target-receiver (T2R) triangle geometry and Doppler.

All quantities are SI: m, m/s, rad, Hz. Angles are wrapped to [0, 2*pi),
the bistatic angle to [0, pi].
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..utils.config import COLLINEAR_TOL, SPEED_OF_LIGHT
from ..utils.errors import CollocatedError, DomainError
from ..utils.helpers import wrap_to_2pi


@dataclass(frozen=True)
class KinematicState:
    """Planar position and velocity [px, py, vx, vy]."""

    px: float
    py: float
    vx: float = 0.0
    vy: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite([self.px, self.py, self.vx, self.vy])):
            raise DomainError(f"non-finite kinematic state {self}")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.px, self.py])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    @property
    def speed(self) -> float:
        return float(np.hypot(self.vx, self.vy))

    @property
    def heading(self) -> float:
        return wrap_to_2pi(np.arctan2(self.vy, self.vx)) if self.speed > 0 else 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.px, self.py, self.vx, self.vy])

    @classmethod
    def from_array(cls, values) -> "KinematicState":
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != (4,):
            raise DomainError(f"expected 4 state components, got {values.shape}")
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class SiteSpeeds:
    """Speed magnitudes of target, transmitter and receiver."""

    target: float
    tx: float = 0.0
    rx: float = 0.0

    @classmethod
    def of(cls, target: KinematicState, tx: KinematicState, rx: KinematicState) -> "SiteSpeeds":
        return cls(target.speed, tx.speed, rx.speed)


@dataclass(frozen=True)
class BistaticGeometry:
    """Parameters of the T2R triangle at one instant."""

    L: float
    R_T: float
    R_R: float
    d: float
    theta: float
    theta_T: float
    theta_TR: float
    beta: float
    delta: float
    delta_T: float
    delta_R: float

    @property
    def is_collinear(self) -> bool:
        """Target on the open baseline between the sites (beta = pi)."""
        return self.beta > np.pi - COLLINEAR_TOL


def _check_range(value: float, site: str) -> None:
    if value <= 0.0:
        raise CollocatedError(f"target coincides with the {site}")


def build_geometry(target: KinematicState, tx: KinematicState, rx: KinematicState) -> BistaticGeometry:
    """
    Compute the T2R triangle for the given states.

    Raises:
        CollocatedError: if the target sits exactly on a site.
    """
    to_target_from_tx = target.position - tx.position
    to_target_from_rx = target.position - rx.position
    baseline = rx.position - tx.position

    R_T = float(np.hypot(*to_target_from_tx))
    R_R = float(np.hypot(*to_target_from_rx))
    _check_range(R_T, "transmitter")
    _check_range(R_R, "receiver")
    L = float(np.hypot(*baseline))

    cos_beta = (R_T ** 2 + R_R ** 2 - L ** 2) / (2.0 * R_T * R_R)
    beta = float(np.arccos(np.clip(cos_beta, -1.0, 1.0)))

    theta = wrap_to_2pi(np.arctan2(to_target_from_rx[1], to_target_from_rx[0]))
    theta_T = wrap_to_2pi(np.arctan2(to_target_from_tx[1], to_target_from_tx[0]))
    theta_TR = wrap_to_2pi(np.arctan2(baseline[1], baseline[0])) if L > 0 else 0.0

    # bisector of the target-to-site unit vectors
    bisector = -to_target_from_tx / R_T - to_target_from_rx / R_R
    delta = 0.0
    if target.speed > 0 and np.hypot(*bisector) > 0:
        delta = wrap_to_2pi(
            np.arctan2(target.vy, target.vx) - np.arctan2(bisector[1], bisector[0])
        )

    return BistaticGeometry(
        L=L,
        R_T=R_T,
        R_R=R_R,
        d=max(R_T + R_R, L),
        theta=theta,
        theta_T=theta_T,
        theta_TR=theta_TR,
        beta=beta,
        delta=delta,
        delta_T=tx.heading,
        delta_R=rx.heading,
    )


def cos_half_bistatic_angle(d: float, L: float, theta: float, theta_TR: float) -> float:
    """
    cos(beta/2) expressed through the bistatic range at a fixed look angle.

    Returns 0 on the collinear branch where the target lies on the baseline
    between the sites.

    Raises:
        DomainError: if d < L.
    """
    if L < 0 or d < L:
        raise DomainError(f"bistatic range {d} m shorter than baseline {L} m")
    if L == 0.0:
        return 1.0

    c = np.cos(theta - theta_TR)
    radicand = d * d + L * L + 2.0 * d * L * c
    on_baseline = (d - L) <= COLLINEAR_TOL * d and c < 0
    if on_baseline or radicand <= 0.0:
        return 0.0
    value = (d + L * c) / np.sqrt(radicand)
    return float(np.clip(value, 0.0, 1.0))


def doppler_shift(geom: BistaticGeometry, speeds: SiteSpeeds, f_c: float) -> float:
    """Doppler shift at the receiver in Hz, positive for a closing bistatic range."""
    if f_c <= 0:
        raise DomainError(f"carrier frequency must be positive, got {f_c}")
    half = cos_half_bistatic_angle(geom.d, geom.L, geom.theta, geom.theta_TR)
    target_term = 2.0 * speeds.target * np.cos(geom.delta) * half
    tx_term = speeds.tx * np.cos(geom.delta_T - geom.theta_T)
    rx_term = speeds.rx * np.cos(geom.delta_R - geom.theta)
    return float(f_c / SPEED_OF_LIGHT * (target_term + tx_term + rx_term))


def dxi_dd(
    geom: BistaticGeometry,
    target_speed: float,
    delta: Optional[float] = None,
    f_c: float = 63.1e6,
) -> float:
    """
    Sensitivity of the target Doppler term to the bistatic range, in Hz/m.

    Zero on the collinear branch and when the look angle is aligned with the
    baseline direction.

    Raises:
        DomainError: if d < L.
    """
    d, L = geom.d, geom.L
    if d < L:
        raise DomainError(f"bistatic range {d} m shorter than baseline {L} m")
    if L == 0.0 or geom.is_collinear or cos_half_bistatic_angle(d, L, geom.theta, geom.theta_TR) == 0.0:
        return 0.0

    delta = geom.delta if delta is None else delta
    offset = geom.theta - geom.theta_TR
    radicand = d * d + L * L + 2.0 * d * L * np.cos(offset)
    numerator = 2.0 * target_speed * np.cos(delta) * L * L * np.sin(offset) ** 2
    return float(f_c / SPEED_OF_LIGHT * numerator / radicand ** 1.5)
