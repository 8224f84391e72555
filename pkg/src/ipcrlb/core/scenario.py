"""
Scenario configuration.

A scenario file is a JSON object with the sections signal, clutter, target,
transmitter, receiver, motion, bounds, control, sim and an optional sweep.
Every key is optional; missing keys fall back to the defaults in
utils.config. Unknown keys are rejected with their dotted path.
"""

import math
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from ..modules.bounds import BoundVariant, McIntegralConfig
from ..modules.clutter import ClutterModel
from ..modules.control import ControlConfig, ControlPolicy, ManeuverLimits
from ..modules.geometry import KinematicState
from ..modules.tmu import SignalModel
from ..modules.tracker import MotionModel
from ..utils import get_logger, load_json
from ..utils.config import (
    ATSC_SETTINGS,
    BOUND_DEFAULTS,
    CLUTTER_DEFAULTS,
    CONTROL_DEFAULTS,
    MOTION_DEFAULTS,
    SIGNAL_DEFAULTS,
    SIM_DEFAULTS,
)
from ..utils.errors import ConfigError, IpcrlbError

logger = get_logger(__name__)

SWEEP_VARIABLES = ('theta', 'R_R', 'P_FA', 'vartheta0')

SECTION_KEYS = {
    'signal': ('alpha', 'T_sym', 'N', 'f_c', 'sigma_theta0_deg', 'vartheta0', 'P_FA', 'S1', 'S2', 'S3'),
    'clutter': ('density', 'V', 'g', 'N_cell'),
    'target': ('px', 'py', 'vx', 'vy'),
    'transmitter': ('px', 'py', 'vx', 'vy'),
    'receiver': ('px', 'py', 'vx', 'vy'),
    'motion': ('T', 'q'),
    'bounds': ('n_samples', 'm_max', 'g', 'seed', 'prior_pos_std', 'prior_vel_std', 'state_samples'),
    'control': ('v_min', 'v_max', 'w_max_deg', 'a_v_max', 'a_w_max_deg', 'N_v', 'N_w', 'n_samples',
                'cost', 'policies'),
    'sim': ('runs', 'horizon', 'seed'),
    'sweep': ('variable', 'grid', 'R_R', 'theta_deg', 'L', 'tx_bearing_deg', 'target_speed', 'delta_deg',
              'general_form', 'variants'),
}
GRID_KEYS = ('start', 'stop', 'step')

DEFAULT_STATES = {
    'target': {'px': 5000.0, 'py': 5000.0, 'vx': -80.0, 'vy': -100.0},
    'transmitter': {'px': 0.0, 'py': 0.0, 'vx': 0.0, 'vy': 0.0},
    'receiver': {'px': 5000.0, 'py': 0.0, 'vx': 0.0, 'vy': 0.0},
}


@dataclass(frozen=True)
class SweepSpec:
    """
    One-dimensional sweep over a single scene parameter.

    The receiver sits at the origin and the transmitter at range L and bearing
    tx_bearing from it; the target is placed at (R_R, theta) from the receiver
    moving with target_speed at angle delta from the bistatic bisector. Theta
    grids are in degrees, all other grids in SI units.
    """

    variable: str = 'theta'
    grid: Tuple[float, ...] = tuple(2.0 * i for i in range(181))
    R_R: float = 1500.0
    theta: float = math.pi / 2
    L: float = 5000.0
    tx_bearing: float = math.pi
    target_speed: float = 50.0
    delta: float = 0.0
    general_form: bool = False
    variants: Tuple[BoundVariant, ...] = (BoundVariant.IPCRLB, BoundVariant.EFIM, BoundVariant.PCRLB)

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"unknown sweep variable '{self.variable}'", key='sweep.variable')
        grid = np.asarray(self.grid, dtype=float)
        if grid.size == 0:
            raise ConfigError("sweep grid is empty", key='sweep.grid')
        steps = np.diff(grid)
        if grid.size > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
            raise ConfigError("sweep grid must be strictly monotone", key='sweep.grid')

    @property
    def column_name(self) -> str:
        return 'theta_deg' if self.variable == 'theta' else self.variable


@dataclass
class Scenario:
    sig: SignalModel = field(default_factory=SignalModel.atsc)
    clutter: ClutterModel = field(default_factory=ClutterModel)
    target: KinematicState = field(default_factory=lambda: KinematicState(**DEFAULT_STATES['target']))
    tx: KinematicState = field(default_factory=lambda: KinematicState(**DEFAULT_STATES['transmitter']))
    rx: KinematicState = field(default_factory=lambda: KinematicState(**DEFAULT_STATES['receiver']))
    motion: MotionModel = field(default_factory=MotionModel.ncv)
    bounds: McIntegralConfig = field(default_factory=McIntegralConfig)
    prior_pos_std: float = BOUND_DEFAULTS['prior_pos_std']
    prior_vel_std: float = BOUND_DEFAULTS['prior_vel_std']
    control: ControlConfig = field(default_factory=ControlConfig)
    policies: Tuple[ControlPolicy, ...] = tuple(ControlPolicy(p) for p in CONTROL_DEFAULTS['policies'])
    runs: int = SIM_DEFAULTS['runs']
    horizon: int = SIM_DEFAULTS['horizon']
    seed: int = SIM_DEFAULTS['seed']
    sweep: Optional[SweepSpec] = None

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("run count must be at least 1", key='sim.runs')
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1", key='sim.horizon')

    @property
    def prior_cov(self) -> np.ndarray:
        return np.diag([self.prior_pos_std ** 2] * 2 + [self.prior_vel_std ** 2] * 2)

    def with_overrides(
        self,
        seed: Optional[int] = None,
        samples: Optional[int] = None,
        runs: Optional[int] = None,
    ) -> "Scenario":
        """Apply command-line overrides on top of the file values."""
        scn = self
        if seed is not None:
            scn = replace(scn, seed=int(seed), bounds=replace(scn.bounds, seed=int(seed)),
                          control=replace(scn.control, bounds=replace(scn.control.bounds, seed=int(seed))))
        if samples is not None:
            scn = replace(scn, bounds=replace(scn.bounds, n_samples=int(samples)))
        if runs is not None:
            scn = replace(scn, runs=int(runs))
        return scn


def _section(data: Dict[str, Any], name: str) -> Dict[str, Any]:
    section = data.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError("expected an object", key=name)
    for key in section:
        if key not in SECTION_KEYS[name]:
            raise ConfigError("unknown key", key=f"{name}.{key}")
    return section


def _number(section: Dict[str, Any], name: str, key: str, default, cast=float):
    value = section.get(key, default)
    if value is None:
        return None
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {value!r}", key=f"{name}.{key}") from None


def _state(data: Dict[str, Any], name: str) -> KinematicState:
    section = _section(data, name)
    values = {k: _number(section, name, k, DEFAULT_STATES[name][k]) for k in SECTION_KEYS[name]}
    return KinematicState(**values)


def _signal(section: Dict[str, Any]) -> SignalModel:
    get = lambda key, default, cast=float: _number(section, 'signal', key, default, cast)
    common = dict(
        f_c=get('f_c', ATSC_SETTINGS['f_c']),
        sigma_theta0=math.radians(get('sigma_theta0_deg', math.degrees(SIGNAL_DEFAULTS['sigma_theta0']))),
        vartheta0=get('vartheta0', SIGNAL_DEFAULTS['vartheta0']),
        P_FA=get('P_FA', SIGNAL_DEFAULTS['P_FA']),
    )
    if any(k in section for k in ('S1', 'S2', 'S3')):
        S1, S3 = get('S1', None), get('S3', None)
        if S1 is None or S3 is None:
            raise ConfigError("S1 and S3 must be given together", key='signal.S1' if S1 is None else 'signal.S3')
        return SignalModel(S1=S1, S2=get('S2', 0.0), S3=S3, **common)
    return SignalModel.atsc(
        alpha=get('alpha', ATSC_SETTINGS['alpha']),
        T_sym=get('T_sym', ATSC_SETTINGS['T_sym']),
        N=get('N', ATSC_SETTINGS['N'], int),
        **common,
    )


def _clutter(section: Dict[str, Any], sig: SignalModel) -> ClutterModel:
    V = _number(section, 'clutter', 'V', CLUTTER_DEFAULTS['V'])
    g = _number(section, 'clutter', 'g', CLUTTER_DEFAULTS['g'])
    n_cell = _number(section, 'clutter', 'N_cell', None)
    if n_cell is not None:
        return ClutterModel.from_cells(n_cell, sig.P_FA, V, g)
    return ClutterModel(density=_number(section, 'clutter', 'density', CLUTTER_DEFAULTS['density']), V=V, g=g)


def _grid(value: Any) -> Tuple[float, ...]:
    if isinstance(value, dict):
        for key in value:
            if key not in GRID_KEYS:
                raise ConfigError("unknown key", key=f"sweep.grid.{key}")
        try:
            start, stop, step = (float(value[k]) for k in GRID_KEYS)
        except KeyError as exc:
            raise ConfigError("grid needs start, stop and step", key=f"sweep.grid.{exc.args[0]}") from None
        if step == 0:
            raise ConfigError("grid step must be nonzero", key='sweep.grid.step')
        count = int(round((stop - start) / step)) + 1
        return tuple(float(start + step * i) for i in range(max(count, 0)))
    if isinstance(value, (list, tuple)):
        try:
            return tuple(float(v) for v in value)
        except (TypeError, ValueError):
            raise ConfigError("grid entries must be numbers", key='sweep.grid') from None
    raise ConfigError("grid must be a list or {start, stop, step}", key='sweep.grid')


def _sweep(section: Dict[str, Any]) -> SweepSpec:
    get = lambda key, default, cast=float: _number(section, 'sweep', key, default, cast)
    defaults = SweepSpec()
    variants = section.get('variants', [v.value for v in defaults.variants])
    try:
        variants = tuple(BoundVariant(v) for v in variants)
    except ValueError as exc:
        raise ConfigError(str(exc), key='sweep.variants') from None
    return SweepSpec(
        variable=section.get('variable', defaults.variable),
        grid=_grid(section['grid']) if 'grid' in section else defaults.grid,
        R_R=get('R_R', defaults.R_R),
        theta=math.radians(get('theta_deg', math.degrees(defaults.theta))),
        L=get('L', defaults.L),
        tx_bearing=math.radians(get('tx_bearing_deg', math.degrees(defaults.tx_bearing))),
        target_speed=get('target_speed', defaults.target_speed),
        delta=math.radians(get('delta_deg', 0.0)),
        general_form=bool(section.get('general_form', defaults.general_form)),
        variants=variants,
    )


def _control(section: Dict[str, Any], bounds: McIntegralConfig, T: float) -> Tuple[ControlConfig, Tuple[ControlPolicy, ...]]:
    get = lambda key, default, cast=float: _number(section, 'control', key, default, cast)
    limits = ManeuverLimits(
        v_min=get('v_min', CONTROL_DEFAULTS['v_min']),
        v_max=get('v_max', CONTROL_DEFAULTS['v_max']),
        w_max=math.radians(get('w_max_deg', math.degrees(CONTROL_DEFAULTS['w_max']))),
        a_v_max=get('a_v_max', CONTROL_DEFAULTS['a_v_max']),
        a_w_max=math.radians(get('a_w_max_deg', math.degrees(CONTROL_DEFAULTS['a_w_max']))),
    )
    try:
        policies = tuple(ControlPolicy(p) for p in section.get('policies', CONTROL_DEFAULTS['policies']))
    except ValueError as exc:
        raise ConfigError(str(exc), key='control.policies') from None
    cfg = ControlConfig(
        limits=limits,
        N_v=get('N_v', CONTROL_DEFAULTS['N_v'], int),
        N_w=get('N_w', CONTROL_DEFAULTS['N_w'], int),
        T=T,
        cost=section.get('cost', CONTROL_DEFAULTS['cost']),
        bounds=replace(bounds, n_samples=get('n_samples', CONTROL_DEFAULTS['n_samples'], int)),
    )
    return cfg, policies


def scenario_from_dict(data: Dict[str, Any]) -> Scenario:
    """
    Build a scenario from a parsed configuration object.

    Raises:
        ConfigError: on unknown keys or invalid values, naming the dotted key.
    """
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a JSON object")
    for key in data:
        if key not in SECTION_KEYS:
            raise ConfigError("unknown section", key=key)

    section_name = 'signal'
    try:
        sig = _signal(_section(data, 'signal'))
        section_name = 'clutter'
        clutter = _clutter(_section(data, 'clutter'), sig)

        section_name = 'motion'
        motion_cfg = _section(data, 'motion')
        T = _number(motion_cfg, 'motion', 'T', MOTION_DEFAULTS['T'])
        motion = MotionModel.ncv(T, _number(motion_cfg, 'motion', 'q', MOTION_DEFAULTS['q']))

        section_name = 'bounds'
        b = _section(data, 'bounds')
        bounds = McIntegralConfig(
            n_samples=_number(b, 'bounds', 'n_samples', BOUND_DEFAULTS['n_samples'], int),
            m_max=_number(b, 'bounds', 'm_max', BOUND_DEFAULTS['m_max'], int),
            g=_number(b, 'bounds', 'g', clutter.g),
            seed=_number(b, 'bounds', 'seed', BOUND_DEFAULTS['seed'], int),
            state_samples=_number(b, 'bounds', 'state_samples', BOUND_DEFAULTS['state_samples'], int),
        )

        section_name = 'control'
        control, policies = _control(_section(data, 'control'), bounds, T)

        section_name = 'sim'
        s = _section(data, 'sim')
        section_name = 'sweep'
        sweep = _sweep(_section(data, 'sweep')) if 'sweep' in data else None

        section_name = 'scenario'
        return Scenario(
            sig=sig,
            clutter=clutter,
            target=_state(data, 'target'),
            tx=_state(data, 'transmitter'),
            rx=_state(data, 'receiver'),
            motion=motion,
            bounds=bounds,
            prior_pos_std=_number(b, 'bounds', 'prior_pos_std', BOUND_DEFAULTS['prior_pos_std']),
            prior_vel_std=_number(b, 'bounds', 'prior_vel_std', BOUND_DEFAULTS['prior_vel_std']),
            control=control,
            policies=policies,
            runs=_number(s, 'sim', 'runs', SIM_DEFAULTS['runs'], int),
            horizon=_number(s, 'sim', 'horizon', SIM_DEFAULTS['horizon'], int),
            seed=_number(s, 'sim', 'seed', SIM_DEFAULTS['seed'], int),
            sweep=sweep,
        )
    except ConfigError:
        raise
    except IpcrlbError as exc:
        raise ConfigError(str(exc), key=section_name) from exc


def load_scenario(path: Optional[str]) -> Scenario:
    """
    Load a scenario file, or the built-in defaults when path is None.

    Raises:
        ConfigError: if the file is missing, not valid JSON, or invalid.
    """
    if path is None:
        return Scenario()
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        data = load_json(path)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    logger.info(f"Loaded scenario from {path}")
    return scenario_from_dict(data)


def default_sweep(variable: str = 'theta', **fixed) -> SweepSpec:
    """Sweep over the figure ranges: theta 0..360 deg in 2 deg, R_R 1..10 km in 250 m."""
    grids: Dict[str, Sequence[float]] = {
        'theta': tuple(2.0 * i for i in range(181)),
        'R_R': tuple(1000.0 + 250.0 * i for i in range(37)),
        'P_FA': tuple(10.0 ** e for e in np.linspace(-6, -1, 11)),
        'vartheta0': tuple(3000.0 + 500.0 * i for i in range(15)),
    }
    return SweepSpec(variable=variable, grid=tuple(grids[variable]), **fixed)
