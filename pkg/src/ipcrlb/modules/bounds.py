"""
Recursive Fisher information bounds under measurement origin uncertainty.

The measurement information for a given measurement count m_k is

    J_Z(x, m_k) = L1 * H^T R^-1 H + L2 * g g^T,    g = dPsi/dx

where L1 is the information reduction factor and L2 the information gain
factor carried by the geometry-dependent SNR. Both are integrals over the
g-sigma gate in normalized measurement coordinates, estimated by uniform
Monte Carlo sampling of the gate cube. Samples are shared across every state
evaluated with the same stream key, so competing states are compared with
common random numbers.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..processor.integrator import McEstimate, estimates_from_values, uniform_cube_samples
from ..processor.rng import StreamTag, substream
from ..utils import get_logger
from ..utils.config import BOUND_DEFAULTS
from ..utils.errors import DomainError
from ..utils.helpers import spd_inverse, symmetrize
from .clutter import MEAS_DIM, ClutterModel, cardinality_probability, gate_volume, measurement_jacobian
from .geometry import KinematicState, build_geometry
from .tmu import MeasCov, SignalModel, detection_probability, meas_cov_assumption1, snr, snr_gradient

logger = get_logger(__name__)

# cap on (states x samples) evaluated at once
_CHUNK_ELEMENTS = 4_000_000


class BoundVariant(str, Enum):
    IPCRLB = 'ipcrlb'
    EFIM = 'efim'
    PCRLB = 'pcrlb'

    @property
    def upsilon_mask(self) -> Tuple[float, float, float]:
        return {
            BoundVariant.IPCRLB: (1.0, 1.0, 1.0),
            BoundVariant.EFIM: (1.0, 0.0, 0.0),
            BoundVariant.PCRLB: (0.0, 0.0, 0.0),
        }[self]


@dataclass
class FimState:
    """Bayesian information matrix J_k with the motion model that propagates it."""

    J: np.ndarray
    F: np.ndarray
    Q: np.ndarray
    k: int = 0

    def __post_init__(self):
        self.J = symmetrize(np.asarray(self.J, dtype=float))
        self.F = np.asarray(self.F, dtype=float)
        self.Q = symmetrize(np.asarray(self.Q, dtype=float))

    @classmethod
    def from_prior(cls, prior_cov: np.ndarray, F: np.ndarray, Q: np.ndarray) -> "FimState":
        return cls(J=spd_inverse(prior_cov), F=F, Q=Q, k=0)

    def covariance(self) -> np.ndarray:
        return spd_inverse(self.J)


@dataclass(frozen=True)
class McIntegralConfig:
    n_samples: int = BOUND_DEFAULTS['n_samples']
    m_max: int = BOUND_DEFAULTS['m_max']
    g: float = BOUND_DEFAULTS['g']
    seed: int = BOUND_DEFAULTS['seed']
    state_samples: int = BOUND_DEFAULTS['state_samples']

    def __post_init__(self):
        if self.n_samples < 1 or self.m_max < 1:
            raise DomainError("n_samples and m_max must be at least 1")
        if self.g <= 0:
            raise DomainError(f"gate size must be positive, got {self.g}")


@dataclass(frozen=True)
class InfoContext:
    """Everything the measurement information needs about one state."""

    psi: float
    pd: float
    p_fa: float
    density: float
    R: MeasCov
    H: np.ndarray
    snr_grad: np.ndarray
    g: float

    @property
    def v_g(self) -> float:
        return gate_volume(self.R, self.g)

    @property
    def lambda_vg(self) -> float:
        return self.density * self.v_g


@dataclass(frozen=True)
class InfoTerm:
    """One m_k term of the measurement information, kept for error propagation."""

    weight: float
    lambda1: McEstimate
    lambda2: McEstimate
    standard: np.ndarray
    gradient: np.ndarray


@dataclass
class MeasurementInfo:
    matrix: np.ndarray
    terms: List[InfoTerm] = field(default_factory=list)


def info_context(
    target: KinematicState,
    tx: KinematicState,
    rx: KinematicState,
    sig: SignalModel,
    clutter: ClutterModel,
    g: Optional[float] = None,
    snr_grad: Optional[np.ndarray] = None,
) -> InfoContext:
    """
    Evaluate SNR, Pd, R, H and dPsi/dx at a state.

    Raises:
        CollocatedError: if the state sits on a site.
        DomainError: if the signal model has a correlated range/Doppler FIM.
    """
    if sig.S2 != 0.0:
        raise DomainError("bound evaluation needs a diagonal measurement covariance (S2 = 0)")
    geom = build_geometry(target, tx, rx)
    psi = snr(geom.R_T, geom.R_R, sig.vartheta0)
    grad = snr_gradient(target, tx.position, rx.position, sig.vartheta0) if snr_grad is None else snr_grad
    return InfoContext(
        psi=psi,
        pd=detection_probability(psi, sig.P_FA),
        p_fa=sig.P_FA,
        density=clutter.density,
        R=meas_cov_assumption1(sig, psi),
        H=measurement_jacobian(target, tx, rx),
        snr_grad=np.asarray(grad, dtype=float),
        g=clutter.g if g is None else g,
    )


def gate_detection_quantities(Pd, lam, V_g, m_k: int):
    """Association probability d_g and normalizer l_g inside the gate."""
    if m_k < 1:
        raise DomainError("gate quantities need m_k >= 1")
    Pd = np.asarray(Pd, dtype=float)
    ell = (1.0 - Pd) * np.asarray(lam, dtype=float) * np.asarray(V_g, dtype=float) + m_k * Pd
    safe = np.where(ell > 0, ell, 1.0)
    d_g = np.where(ell > 0, m_k * Pd / safe, 0.0)
    if np.ndim(d_g) == 0:
        return float(d_g), float(ell)
    return d_g, ell


def association_sensitivity(Pd, lambda_vg, psi, p_fa: float, m_k: int):
    """Derivative of d_g w.r.t. the SNR through Pd."""
    Pd = np.asarray(Pd, dtype=float)
    lambda_vg = np.asarray(lambda_vg, dtype=float)
    ell = (1.0 - Pd) * lambda_vg + m_k * Pd
    safe = np.where(ell > 0, ell, 1.0)
    value = -lambda_vg * m_k * Pd * np.log(p_fa) / (safe ** 2 * (1.0 + np.asarray(psi)) ** 2)
    return np.where(ell > 0, value, 0.0)


# Integrands in normalized gate coordinates. Each sample is an (m_k, n) array
# of standardized residuals; only three per-sample sums enter the integrands.

def _gate_sums(zhat: np.ndarray):
    q = np.sum(zhat ** 2, axis=-1)
    e = np.exp(-0.5 * q)
    return e.sum(axis=-1), np.sum(q * e * e, axis=-1), np.sum(e * (q - MEAS_DIM), axis=-1)


def _normalized_likelihood(sum_e, d_g, m_k: int, g: float):
    v = (2.0 * g) ** MEAS_DIM
    k_n = (2.0 * np.pi) ** (MEAS_DIM / 2.0)
    return (1.0 - d_g) / v ** m_k + d_g * sum_e / (m_k * v ** (m_k - 1) * k_n)


def _irf_values(sums, d_g, m_k: int, g: float):
    sum_e, sum_qe2, _ = sums
    v = (2.0 * g) ** MEAS_DIM
    beta = _normalized_likelihood(sum_e, d_g, m_k, g)
    scale = d_g ** 2 / (m_k * v ** (2 * m_k - 2) * (2.0 * np.pi) ** MEAS_DIM)
    # averaged over measurements and components (exchangeable)
    return scale * sum_qe2 / (m_k * MEAS_DIM * beta)


def _igf_values(sums, d_g, dd_dpsi, psi, m_k: int, g: float, mask):
    sum_e, _, sum_ce = sums
    v = (2.0 * g) ** MEAS_DIM
    k_n = (2.0 * np.pi) ** (MEAS_DIM / 2.0)
    beta = _normalized_likelihood(sum_e, d_g, m_k, g)
    b = dd_dpsi * (sum_e / (k_n * m_k * v ** (m_k - 1)) - 1.0 / v ** m_k)
    c = -d_g / (2.0 * psi * m_k * v ** (m_k - 1) * k_n) * sum_ce
    upsilon = mask[0] * b * b + mask[1] * 2.0 * b * c + mask[2] * c * c
    return upsilon / beta


def irf_integrand(zhat: np.ndarray, d_g: float, m_k: int, g: float) -> np.ndarray:
    """Information reduction integrand at normalized gate points of shape (..., m_k, n)."""
    return _irf_values(_gate_sums(zhat), d_g, m_k, g)


def igf_integrand(
    zhat: np.ndarray,
    d_g: float,
    dd_dpsi: float,
    psi: float,
    m_k: int,
    g: float,
    mask: Sequence[float] = (1.0, 1.0, 1.0),
) -> np.ndarray:
    """Information gain integrand at normalized gate points of shape (..., m_k, n)."""
    return _igf_values(_gate_sums(zhat), d_g, dd_dpsi, psi, m_k, g, mask)


@lru_cache(maxsize=128)
def _cached_sums(seed: int, stream: Tuple[int, ...], m_k: int, n_samples: int, g: float):
    rng = substream(seed, StreamTag.BOUNDS, *stream, m_k)
    zhat = uniform_cube_samples(rng, n_samples, (m_k, MEAS_DIM), g)
    sums = _gate_sums(zhat)
    for arr in sums:
        arr.setflags(write=False)
    return sums


def _sums(cfg: McIntegralConfig, m_k: int, stream: Tuple[int, ...]):
    return _cached_sums(int(cfg.seed), tuple(int(s) for s in stream), m_k, int(cfg.n_samples), float(cfg.g))


def _chunked_estimates(values_fn, n_states: int, n_samples: int, volume: float):
    step = max(1, _CHUNK_ELEMENTS // max(n_samples, 1))
    means, stds = [], []
    for start in range(0, n_states, step):
        mean, std = estimates_from_values(values_fn(slice(start, start + step)), volume)
        means.append(mean)
        stds.append(std)
    return np.concatenate(means), np.concatenate(stds)


def _lambda_estimates(
    contexts: Sequence[InfoContext],
    m_k: int,
    mask: Sequence[float],
    cfg: McIntegralConfig,
    stream: Tuple[int, ...],
):
    """L1 and L2 estimates for every context from one shared sample set."""
    sums = _sums(cfg, m_k, stream)
    g = cfg.g
    volume = (2.0 * g) ** (MEAS_DIM * m_k)

    pd = np.array([c.pd for c in contexts])
    lambda_vg = np.array([c.lambda_vg for c in contexts])
    psi = np.array([c.psi for c in contexts])
    p_fa = np.array([c.p_fa for c in contexts])
    d_g, _ = gate_detection_quantities(pd, 1.0, lambda_vg, m_k)
    d_g = np.atleast_1d(d_g)
    dd = np.atleast_1d(association_sensitivity(pd, lambda_vg, psi, p_fa, m_k))

    l1 = _chunked_estimates(
        lambda s: _irf_values(sums, d_g[s, None], m_k, g), len(contexts), cfg.n_samples, volume)
    if not any(mask):
        zeros = np.zeros(len(contexts))
        return l1, (zeros, zeros)
    l2 = _chunked_estimates(
        lambda s: _igf_values(sums, d_g[s, None], dd[s, None], psi[s, None], m_k, g, mask),
        len(contexts), cfg.n_samples, volume)
    return l1, l2


def irf_lambda1(ctx: InfoContext, m_k: int, cfg: McIntegralConfig, stream: Tuple[int, ...] = ()) -> McEstimate:
    """Information reduction factor for m_k measurements."""
    (mean, std), _ = _lambda_estimates([ctx], m_k, (0.0, 0.0, 0.0), cfg, stream)
    return McEstimate(float(mean[0]), float(std[0]))


def igf_lambda2(
    ctx: InfoContext,
    m_k: int,
    variant: BoundVariant,
    cfg: McIntegralConfig,
    stream: Tuple[int, ...] = (),
    upsilon_mask: Optional[Sequence[float]] = None,
) -> McEstimate:
    """Information gain factor for m_k measurements; zero for the PCRLB."""
    variant = BoundVariant(variant)
    if variant is BoundVariant.PCRLB:
        return McEstimate.zero()
    mask = variant.upsilon_mask if upsilon_mask is None else tuple(upsilon_mask)
    _, (mean, std) = _lambda_estimates([ctx], m_k, mask, cfg, stream)
    return McEstimate(float(mean[0]), float(std[0]))


def _term_matrices(ctx: InfoContext):
    standard = ctx.H.T @ np.diag(1.0 / np.diag(ctx.R.matrix)) @ ctx.H
    gradient = np.outer(ctx.snr_grad, ctx.snr_grad)
    return standard, gradient


def _conditional(standard, gradient, lambda1: float, lambda2: float, variant: BoundVariant) -> np.ndarray:
    matrix = lambda1 * standard
    if variant is not BoundVariant.PCRLB:
        matrix = matrix + lambda2 * gradient
    return matrix


def conditional_info_matrix(
    target: KinematicState,
    tx: KinematicState,
    rx: KinematicState,
    sig: SignalModel,
    clutter: ClutterModel,
    m_k: int,
    variant: BoundVariant,
    cfg: McIntegralConfig,
    snr_grad: Optional[np.ndarray] = None,
    stream: Tuple[int, ...] = (),
) -> np.ndarray:
    """Measurement information given that m_k measurements were returned."""
    variant = BoundVariant(variant)
    ctx = info_context(target, tx, rx, sig, clutter, g=cfg.g, snr_grad=snr_grad)
    standard, gradient = _term_matrices(ctx)
    lambda1 = irf_lambda1(ctx, m_k, cfg, stream)
    lambda2 = igf_lambda2(ctx, m_k, variant, cfg, stream)
    return symmetrize(_conditional(standard, gradient, lambda1.mean, lambda2.mean, variant))


def measurement_info_batch(
    contexts: Sequence[InfoContext],
    variant: BoundVariant,
    cfg: McIntegralConfig,
    stream: Tuple[int, ...] = (),
) -> List[MeasurementInfo]:
    """Expected measurement information, sum over m_k of P(x, m_k) J_Z(x, m_k), per context."""
    variant = BoundVariant(variant)
    results = [MeasurementInfo(matrix=np.zeros((4, 4))) for _ in contexts]
    if not contexts:
        return results
    matrices = [_term_matrices(ctx) for ctx in contexts]
    pd = np.array([ctx.pd for ctx in contexts])
    lambda_vg = np.array([ctx.lambda_vg for ctx in contexts])

    for m_k in range(1, cfg.m_max + 1):
        (l1_mean, l1_std), (l2_mean, l2_std) = _lambda_estimates(
            contexts, m_k, variant.upsilon_mask, cfg, stream)
        weights = np.atleast_1d(cardinality_probability(pd, lambda_vg, m_k))
        for i in range(len(contexts)):
            weight = float(weights[i])
            standard, gradient = matrices[i]
            lambda1 = McEstimate(float(l1_mean[i]), float(l1_std[i]))
            lambda2 = McEstimate(float(l2_mean[i]), float(l2_std[i]))
            results[i].matrix = results[i].matrix + weight * _conditional(
                standard, gradient, lambda1.mean, lambda2.mean, variant)
            results[i].terms.append(InfoTerm(weight, lambda1, lambda2, standard, gradient))

    for info in results:
        info.matrix = symmetrize(info.matrix)
    return results


def measurement_info(
    ctx: InfoContext,
    variant: BoundVariant,
    cfg: McIntegralConfig,
    stream: Tuple[int, ...] = (),
) -> MeasurementInfo:
    """Expected measurement information at a single state."""
    return measurement_info_batch([ctx], variant, cfg, stream)[0]


def measurement_info_over_states(
    mean: KinematicState,
    cov: np.ndarray,
    tx: KinematicState,
    rx: KinematicState,
    sig: SignalModel,
    clutter: ClutterModel,
    variant: BoundVariant,
    cfg: McIntegralConfig,
    stream: Tuple[int, ...] = (),
) -> MeasurementInfo:
    """
    Measurement information averaged over states drawn from N(mean, cov).

    Uses cfg.state_samples draws; falls back to the mean state when zero.
    """
    n_states = int(cfg.state_samples)
    if n_states <= 0:
        return measurement_info(info_context(mean, tx, rx, sig, clutter, g=cfg.g), variant, cfg, stream)

    rng = substream(cfg.seed, StreamTag.STATES, *stream)
    draws = rng.multivariate_normal(mean.as_array(), cov, size=n_states)
    contexts = [info_context(KinematicState.from_array(x), tx, rx, sig, clutter, g=cfg.g) for x in draws]
    infos = measurement_info_batch(contexts, variant, cfg, stream)

    averaged = MeasurementInfo(matrix=symmetrize(sum(info.matrix for info in infos) / n_states))
    for info in infos:
        averaged.terms.extend(
            InfoTerm(t.weight / n_states, t.lambda1, t.lambda2, t.standard, t.gradient) for t in info.terms)
    return averaged


def predicted_information(prev: FimState) -> np.ndarray:
    """Prior information after one motion step: (Q + F J^-1 F^T)^-1."""
    return spd_inverse(prev.Q + prev.F @ spd_inverse(prev.J) @ prev.F.T)


def fim_step(prev: FimState, J_Z: np.ndarray, prior_info: Optional[np.ndarray] = None) -> FimState:
    """
    One step of the information recursion.

    Raises:
        SingularityError: if the previous information is not invertible.
    """
    prior_info = predicted_information(prev) if prior_info is None else prior_info
    return FimState(J=symmetrize(prior_info + J_Z), F=prev.F, Q=prev.Q, k=prev.k + 1)


def bound_trace(fim: FimState) -> float:
    return float(np.trace(fim.covariance()))


def position_trace(fim: FimState) -> float:
    return float(np.trace(fim.covariance()[:2, :2]))


def velocity_trace(fim: FimState) -> float:
    return float(np.trace(fim.covariance()[2:, 2:]))


def bound_trace_std(fim: FimState, info: MeasurementInfo, block: slice = slice(0, 4)) -> float:
    """First-order MC standard deviation of the bound trace from the L1/L2 estimator spread."""
    cov = fim.covariance()
    var = 0.0
    for term in info.terms:
        for estimate, matrix in ((term.lambda1, term.standard), (term.lambda2, term.gradient)):
            if estimate.std == 0.0:
                continue
            sensitivity = term.weight * np.trace((cov @ matrix @ cov)[block, block])
            var += (sensitivity * estimate.std) ** 2
    return float(np.sqrt(var))


def run_recursion(
    initial: FimState,
    contexts: Iterable[InfoContext],
    variant: BoundVariant,
    cfg: McIntegralConfig,
    stream: Tuple[int, ...] = (),
) -> List[FimState]:
    """Propagate the bound along a sequence of state contexts, one per step."""
    states = [initial]
    for k, ctx in enumerate(contexts, start=1):
        info = measurement_info(ctx, variant, cfg, stream + (k,))
        states.append(fim_step(states[-1], info.matrix))
    logger.debug(f"{variant.value} recursion finished after {len(states) - 1} steps")
    return states
