"""
Target measurement uncertainty (TMU) of a bistatic radar.

SNR and detection probability follow the T2R geometry; the measurement error
covariance over (bistatic range, bistatic velocity, DOA) is the CRLB of the
signal-domain delay/Doppler FIM mapped into the measurement domain.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..utils.config import ATSC_SETTINGS, COND_LIMIT, SIGNAL_DEFAULTS, SPEED_OF_LIGHT
from ..utils.errors import DomainError, SingularityError
from .geometry import KinematicState


@dataclass(frozen=True)
class SignalModel:
    """
    Transmitted-signal constants.

    S1, S2, S3 are the entries of the unit-SNR delay/Doppler FIM; the
    geometry enters through the SNR factor only.
    """

    S1: float
    S2: float
    S3: float
    f_c: float
    sigma_theta0: float
    vartheta0: float
    P_FA: float

    def __post_init__(self):
        if self.S1 <= 0 or self.S3 <= 0 or self.S1 * self.S3 - self.S2 ** 2 <= 0:
            raise DomainError("signal FIM must be positive definite")
        if not 0.0 < self.P_FA < 1.0:
            raise DomainError(f"P_FA must lie in (0, 1), got {self.P_FA}")
        for name in ('f_c', 'sigma_theta0', 'vartheta0'):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")

    @classmethod
    def atsc(
        cls,
        alpha: float = ATSC_SETTINGS['alpha'],
        T_sym: float = ATSC_SETTINGS['T_sym'],
        N: int = ATSC_SETTINGS['N'],
        f_c: float = ATSC_SETTINGS['f_c'],
        sigma_theta0: float = SIGNAL_DEFAULTS['sigma_theta0'],
        vartheta0: float = SIGNAL_DEFAULTS['vartheta0'],
        P_FA: float = SIGNAL_DEFAULTS['P_FA'],
    ) -> "SignalModel":
        S1, S2, S3 = atsc_signal_fim(alpha, T_sym, N)
        return cls(S1, S2, S3, f_c, sigma_theta0, vartheta0, P_FA)

    def with_(self, **changes) -> "SignalModel":
        return replace(self, **changes)


@dataclass(frozen=True)
class MeasCov:
    """Measurement error covariance over (d, v, theta) in (m^2, m^2/s^2, rad^2)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise DomainError(f"measurement covariance must be 3x3, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, 'matrix', m)

    @property
    def sigma_d(self) -> float:
        return math.sqrt(self.matrix[0, 0])

    @property
    def sigma_v(self) -> float:
        return math.sqrt(self.matrix[1, 1])

    @property
    def sigma_theta(self) -> float:
        return math.sqrt(self.matrix[2, 2])

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(np.diag(self.matrix))

    @property
    def is_diagonal(self) -> bool:
        return bool(np.all(self.matrix[~np.eye(3, dtype=bool)] == 0.0))

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)


def snr(R_T: float, R_R: float, vartheta0: float) -> float:
    """SNR after the two-way path loss: vartheta0^4 / (R_T R_R)^2."""
    if R_T <= 0 or R_R <= 0:
        raise DomainError(f"ranges must be positive, got R_T={R_T}, R_R={R_R}")
    return vartheta0 ** 4 / (R_T * R_R) ** 2


def detection_probability(psi, P_FA: float):
    """Swerling-I detection probability P_FA^(1/(1+psi)); vectorized over psi."""
    value = np.power(P_FA, 1.0 / (1.0 + np.asarray(psi, dtype=float)))
    return float(value) if np.ndim(value) == 0 else value


def atsc_signal_fim(alpha: float, T_sym: float, N: int):
    """Unit-SNR delay/Doppler FIM constants (S1, S2, S3) of an ATSC signal."""
    if alpha <= 0 or T_sym <= 0 or N < 1:
        raise DomainError("ATSC parameters must satisfy alpha > 0, T_sym > 0, N >= 1")
    S1 = (2.0 * alpha ** 2 / T_sym ** 2) * (-1.0 / math.pi ** 2 + 1.0 / (96.0 * alpha ** 2) + 1.0 / 8.0)
    S3 = 2.0 * T_sym ** 2 * (1.0 / (4.0 * alpha) + (N ** 2 - 1) / 3.0)
    return S1, 0.0, S3


def _check_psi(psi: float) -> None:
    if not psi > 0:
        raise DomainError(f"SNR must be positive, got {psi}")


def _range_velocity_fim(sig: SignalModel, psi: float, dxi: float) -> np.ndarray:
    c = SPEED_OF_LIGHT
    transform = np.array([[1.0 / c, dxi], [0.0, sig.f_c / c]])
    signal_fim = psi * np.array([[sig.S1, sig.S2], [sig.S2, sig.S3]])
    return transform @ signal_fim @ transform.T


def meas_cov_general(sig: SignalModel, psi: float, dxi_dd: float) -> MeasCov:
    """
    Measurement covariance keeping the range dependence of the Doppler shift.

    Raises:
        SingularityError: if the (d, v) information block is ill-conditioned.
    """
    _check_psi(psi)
    if np.linalg.cond(_range_velocity_fim(sig, psi, dxi_dd)) > COND_LIMIT:
        raise SingularityError("range/velocity information block is singular")

    c = SPEED_OF_LIGHT
    scale = c ** 4 / (psi * sig.f_c ** 2 * (sig.S1 * sig.S3 - sig.S2 ** 2))
    var_d = sig.f_c ** 2 * sig.S3 / c ** 2
    cov_dv = -sig.f_c * sig.S2 / c ** 2 - sig.f_c / c * dxi_dd * sig.S3
    var_v = sig.S1 / c ** 2 + 2.0 / c * dxi_dd * sig.S2 + dxi_dd ** 2 * sig.S3

    matrix = np.zeros((3, 3))
    matrix[0, 0] = scale * var_d
    matrix[0, 1] = matrix[1, 0] = scale * cov_dv
    matrix[1, 1] = scale * var_v
    matrix[2, 2] = sig.sigma_theta0 ** 2 / psi
    return MeasCov(matrix)


def meas_cov_assumption1(sig: SignalModel, psi: float) -> MeasCov:
    """Measurement covariance when the Doppler shift is insensitive to the bistatic range."""
    return meas_cov_general(sig, psi, 0.0)


def snr_gradient(
    target: KinematicState,
    tx_pos: np.ndarray,
    rx_pos: np.ndarray,
    vartheta0: float,
) -> np.ndarray:
    """Gradient of the SNR w.r.t. [px, py, vx, vy]; velocity entries are zero."""
    p = target.position
    rel_tx = p - np.asarray(tx_pos, dtype=float)
    rel_rx = p - np.asarray(rx_pos, dtype=float)
    R_T2 = float(rel_tx @ rel_tx)
    R_R2 = float(rel_rx @ rel_rx)
    if R_T2 <= 0 or R_R2 <= 0:
        raise DomainError("target coincides with a site")

    grad = np.zeros(4)
    grad[:2] = -2.0 * vartheta0 ** 4 / (R_R2 ** 2 * R_T2 ** 2) * (rel_rx * R_T2 + rel_tx * R_R2)
    return grad


def tmu_at(sig: SignalModel, R_T: float, R_R: float, dxi: Optional[float] = None):
    """SNR, Pd and measurement covariance at the given ranges."""
    psi = snr(R_T, R_R, sig.vartheta0)
    pd = detection_probability(psi, sig.P_FA)
    cov = meas_cov_assumption1(sig, psi) if dxi is None else meas_cov_general(sig, psi, dxi)
    return psi, pd, cov
