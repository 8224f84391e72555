"""
Myopic receiver trajectory control.

Each step enumerates a grid of (speed, heading) commands reachable from the
previous command, scores every candidate with the policy's cost at the
predicted target state and moves the receiver with the cheapest one.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from ..utils import get_logger
from ..utils.config import CONTROL_DEFAULTS
from ..utils.errors import CollocatedError, DomainError, EmptyLibraryError
from .bounds import (
    BoundVariant,
    FimState,
    McIntegralConfig,
    fim_step,
    info_context,
    measurement_info_batch,
    predicted_information,
)
from .clutter import ClutterModel
from .geometry import KinematicState
from .tmu import SignalModel
from .tracker import TrackEstimate

logger = get_logger(__name__)


@dataclass(frozen=True)
class ControlCommand:
    """Receiver speed [m/s] and heading [rad]."""

    v: float
    w: float


@dataclass(frozen=True)
class ManeuverLimits:
    v_min: float = CONTROL_DEFAULTS['v_min']
    v_max: float = CONTROL_DEFAULTS['v_max']
    w_max: float = CONTROL_DEFAULTS['w_max']
    a_v_max: float = CONTROL_DEFAULTS['a_v_max']
    a_w_max: float = CONTROL_DEFAULTS['a_w_max']

    def __post_init__(self):
        if self.a_v_max < 0 or self.a_w_max < 0 or self.w_max <= 0:
            raise DomainError("maneuver rates must be nonnegative and w_max positive")


@dataclass(frozen=True)
class CandidateCommand:
    command: ControlCommand
    clamped: bool


class ControlPolicy(str, Enum):
    MIN_TR_IPCRLB = 'min-tr-ipcrlb'
    MIN_TR_PCRLB = 'min-tr-pcrlb'
    MIN_PDST = 'min-pdst'
    FIXED = 'fixed'
    RANDOM = 'random'

    @property
    def bound_variant(self) -> Optional[BoundVariant]:
        return {
            ControlPolicy.MIN_TR_IPCRLB: BoundVariant.IPCRLB,
            ControlPolicy.MIN_TR_PCRLB: BoundVariant.PCRLB,
        }.get(self)


@dataclass(frozen=True)
class ControlConfig:
    limits: ManeuverLimits = field(default_factory=ManeuverLimits)
    N_v: int = CONTROL_DEFAULTS['N_v']
    N_w: int = CONTROL_DEFAULTS['N_w']
    T: float = 1.0
    cost: str = CONTROL_DEFAULTS['cost']
    bounds: McIntegralConfig = field(
        default_factory=lambda: McIntegralConfig(n_samples=CONTROL_DEFAULTS['n_samples']))

    def __post_init__(self):
        if self.cost not in ('full', 'position'):
            raise DomainError(f"unknown cost '{self.cost}', expected 'full' or 'position'")


@dataclass
class ControlWorld:
    """What a policy may look at when choosing the next receiver command."""

    predicted: TrackEstimate
    fim: FimState
    rx: KinematicState
    tx: KinematicState
    prev: ControlCommand
    sig: SignalModel
    clutter: ClutterModel
    stream: Tuple[int, ...] = ()


@dataclass
class ControlStepResult:
    rx: KinematicState
    command: ControlCommand
    index: int
    costs: np.ndarray
    fim: FimState


def _axis(center: float, rate: float, T: float, n: int) -> np.ndarray:
    return center - rate * T + np.arange(n + 1) * (2.0 * rate * T / n)


def command_library(
    prev: ControlCommand,
    limits: ManeuverLimits,
    N_v: int,
    N_w: int,
    T: float,
) -> List[CandidateCommand]:
    """
    (N_v + 1)(N_w + 1) commands on the grid reachable from prev within one step.

    Headings are unwrapped around the previous heading; an absolute heading
    clamp applies only when w_max < pi.

    Raises:
        EmptyLibraryError: if the speed limits admit no command.
    """
    if N_v < 1 or N_w < 1 or T <= 0:
        raise DomainError("N_v, N_w must be at least 1 and T positive")
    if limits.v_min > limits.v_max:
        raise EmptyLibraryError(f"v_min {limits.v_min} exceeds v_max {limits.v_max}")

    speeds = _axis(prev.v, limits.a_v_max, T, N_v)
    headings = _axis(prev.w, limits.a_w_max, T, N_w)
    clamp_heading = limits.w_max < np.pi

    library = []
    for v in speeds:
        v_ok = float(np.clip(v, limits.v_min, limits.v_max))
        for w in headings:
            w_ok = float(np.clip(w, -limits.w_max, limits.w_max)) if clamp_heading else float(w)
            library.append(CandidateCommand(ControlCommand(v_ok, w_ok), clamped=(v_ok != v or w_ok != w)))
    return library


def propagate_receiver(rx: KinematicState, cmd: ControlCommand, T: float) -> KinematicState:
    vx, vy = cmd.v * np.cos(cmd.w), cmd.v * np.sin(cmd.w)
    return KinematicState(rx.px + vx * T, rx.py + vy * T, float(vx), float(vy))


def _bound_costs(
    variant: BoundVariant,
    world: ControlWorld,
    receivers: List[KinematicState],
    cfg: ControlConfig,
):
    prior = predicted_information(world.fim)
    contexts, usable = [], []
    for i, rx in enumerate(receivers):
        try:
            contexts.append(info_context(world.predicted.state, world.tx, rx, world.sig, world.clutter,
                                         g=cfg.bounds.g))
            usable.append(i)
        except CollocatedError:
            continue

    costs = np.full(len(receivers), np.inf)
    states: List[Optional[FimState]] = [None] * len(receivers)
    infos = measurement_info_batch(contexts, variant, cfg.bounds, world.stream)
    block = slice(0, 2) if cfg.cost == 'position' else slice(0, 4)
    for i, info in zip(usable, infos):
        state = fim_step(world.fim, info.matrix, prior_info=prior)
        cost = float(np.trace(state.covariance()[block, block]))
        costs[i] = cost if np.isfinite(cost) else np.inf
        states[i] = state
    return costs, states


def select_command(
    policy: ControlPolicy,
    world: ControlWorld,
    library: List[CandidateCommand],
    cfg: ControlConfig,
    rng: np.random.Generator,
):
    """
    Pick a library index for the policy.

    Returns (index, costs, fim_states); fim_states is only filled for the
    bound-based policies. Ties go to the lowest index.
    """
    if not library:
        raise EmptyLibraryError("command library is empty")
    policy = ControlPolicy(policy)
    commands = [c.command for c in library]
    receivers = [propagate_receiver(world.rx, cmd, cfg.T) for cmd in commands]
    states: List[Optional[FimState]] = [None] * len(library)

    if policy.bound_variant is not None:
        costs, states = _bound_costs(policy.bound_variant, world, receivers, cfg)
    elif policy is ControlPolicy.MIN_PDST:
        target = world.predicted.mean[:2]
        costs = np.array([np.hypot(*(target - rx.position)) for rx in receivers])
    elif policy is ControlPolicy.FIXED:
        costs = np.array([np.hypot(c.v - cfg.limits.v_min, c.w - world.prev.w) for c in commands])
    else:
        costs = np.zeros(len(library))
        return int(rng.integers(len(library))), costs, states

    return int(np.argmin(costs)), costs, states


def control_step(
    policy: ControlPolicy,
    world: ControlWorld,
    cfg: ControlConfig,
    rng: np.random.Generator,
) -> ControlStepResult:
    """Build the library, score it, select a command and move the receiver."""
    policy = ControlPolicy(policy)
    library = command_library(world.prev, cfg.limits, cfg.N_v, cfg.N_w, cfg.T)
    index, costs, states = select_command(policy, world, library, cfg, rng)
    command = library[index].command

    if policy is ControlPolicy.FIXED:
        # non-actuated baseline: the receiver stays where it is
        rx = KinematicState(world.rx.px, world.rx.py, 0.0, 0.0)
    else:
        rx = propagate_receiver(world.rx, command, cfg.T)

    fim = states[index] if states[index] is not None else world.fim
    return ControlStepResult(rx=rx, command=command, index=index, costs=costs, fim=fim)
