import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..modules.bounds import (
    BoundVariant,
    FimState,
    bound_trace,
    bound_trace_std,
    fim_step,
    info_context,
    measurement_info_over_states,
    position_trace,
    predicted_information,
    run_recursion,
    velocity_trace,
)
from ..modules.clutter import generate_measurements
from ..modules.control import ControlCommand, ControlPolicy, ControlWorld, control_step
from ..modules.geometry import KinematicState, build_geometry, dxi_dd
from ..modules.tmu import SignalModel, meas_cov_assumption1, meas_cov_general, snr, tmu_at
from ..modules.tracker import EkfPdaTracker, TrackEstimate, initial_track, is_diverged, rmse
from ..processor.rng import StreamTag, substream
from ..processor.tables import (
    ASSUMPTION1_COLUMNS,
    BOUND_COLUMNS,
    CLOSED_LOOP_COLUMNS,
    TMU_COLUMNS,
    TRACKING_COLUMNS,
    Table,
    emit_csv,
)
from ..utils import get_logger
from ..utils.config import SHOW_PROGRESS, THREADS
from .scenario import Scenario, SweepSpec, default_sweep

logger = get_logger(__name__)

OUTPUT_FILES = {
    'tmu-sweep': 'tmu_sweep.csv',
    'bounds-compare': 'bounds.csv',
    'track': 'tracking.csv',
    'control-compare': 'closed_loop.csv',
    'validate-assumption1': 'assumption1.csv',
}


@dataclass(frozen=True)
class SweepPoint:
    value: float
    target: KinematicState
    tx: KinematicState
    rx: KinematicState
    sig: SignalModel


def final_position_errors(runs: Sequence[Dict[str, Dict[str, np.ndarray]]], policy) -> np.ndarray:
    """Final-step position error of every closed-loop run for one policy."""
    name = ControlPolicy(policy).value
    return np.array([np.hypot(*(r[name]['estimates'][-1, :2] - r[name]['truth'][-1, :2])) for r in runs])


def _rotate(vector: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * vector[0] - s * vector[1], s * vector[0] + c * vector[1]])


def sweep_point(spec: SweepSpec, sig: SignalModel, value: float) -> SweepPoint:
    """Scene for one grid value: receiver at the origin, transmitter at (L, tx_bearing)."""
    theta = math.radians(value) if spec.variable == 'theta' else spec.theta
    R_R = value if spec.variable == 'R_R' else spec.R_R
    if spec.variable == 'P_FA':
        sig = sig.with_(P_FA=value)
    elif spec.variable == 'vartheta0':
        sig = sig.with_(vartheta0=value)

    rx = KinematicState(0.0, 0.0)
    tx = KinematicState(spec.L * math.cos(spec.tx_bearing), spec.L * math.sin(spec.tx_bearing))
    position = R_R * np.array([math.cos(theta), math.sin(theta)])

    to_tx, to_rx = tx.position - position, rx.position - position
    norm_tx, norm_rx = np.hypot(*to_tx), np.hypot(*to_rx)
    bisector = (to_tx / norm_tx if norm_tx > 0 else 0.0) + (to_rx / norm_rx if norm_rx > 0 else 0.0)
    if np.hypot(*bisector) < 1e-12:
        # on the baseline the bisector degenerates; use the cross-LOS direction
        bisector = np.array([-math.sin(theta), math.cos(theta)])
    direction = _rotate(bisector / np.hypot(*bisector), spec.delta)
    velocity = spec.target_speed * direction
    target = KinematicState(float(position[0]), float(position[1]), float(velocity[0]), float(velocity[1]))
    return SweepPoint(value=value, target=target, tx=tx, rx=rx, sig=sig)


class ExperimentPipeline:
    """Runs the sweeps, tracking runs and closed-loop control experiments of a scenario."""

    def __init__(self, scenario: Scenario, threads: Optional[int] = None, show_progress: bool = SHOW_PROGRESS):
        self.scenario = scenario
        self.threads = max(1, int(threads or THREADS))
        self.show_progress = show_progress

    def _map(self, fn: Callable, items: Sequence, desc: str) -> List:
        """Apply fn over items concurrently; results come back in item order."""
        items = list(items)
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            results = pool.map(fn, items)
            if self.show_progress:
                results = tqdm(results, total=len(items), desc=desc)
            return list(results)

    def _sweep(self, spec: Optional[SweepSpec]) -> SweepSpec:
        return spec or self.scenario.sweep or default_sweep()

    # Geometry sweeps

    def tmu_sweep(self, spec: Optional[SweepSpec] = None) -> Table:
        spec = self._sweep(spec)
        logger.info(f"TMU sweep over {spec.variable} ({len(spec.grid)} points)")
        table = Table(TMU_COLUMNS)
        for value in spec.grid:
            point = sweep_point(spec, self.scenario.sig, value)
            geom = build_geometry(point.target, point.tx, point.rx)
            dxi = dxi_dd(geom, point.target.speed, f_c=point.sig.f_c) if spec.general_form else None
            _, pd, cov = tmu_at(point.sig, geom.R_T, geom.R_R, dxi)
            table.append(
                sweep_var=spec.column_name, value=value, sigma_d_m=cov.sigma_d,
                sigma_v_mps=cov.sigma_v, sigma_theta_rad=cov.sigma_theta, pd=pd,
            )
        return table

    def validate_assumption1(self, spec: Optional[SweepSpec] = None) -> Table:
        """Doppler range-sensitivity and its effect on the velocity std along a theta sweep."""
        spec = spec or default_sweep('theta', R_R=7000.0)
        if spec.variable != 'theta':
            spec = default_sweep('theta', R_R=spec.R_R, L=spec.L, tx_bearing=spec.tx_bearing,
                                 target_speed=spec.target_speed, delta=spec.delta)
        logger.info(f"Validating range-insensitive Doppler at R_R={spec.R_R:.0f} m")
        table = Table(ASSUMPTION1_COLUMNS)
        for value in spec.grid:
            point = sweep_point(spec, self.scenario.sig, value)
            geom = build_geometry(point.target, point.tx, point.rx)
            psi = snr(geom.R_T, geom.R_R, point.sig.vartheta0)
            dxi = dxi_dd(geom, point.target.speed, f_c=point.sig.f_c)
            general = meas_cov_general(point.sig, psi, dxi).sigma_v
            simplified = meas_cov_assumption1(point.sig, psi).sigma_v
            table.append(
                theta_deg=value, dxi_dd_hz_per_m=dxi, sigma_v_general_mps=general,
                sigma_v_assumption1_mps=simplified, rel_diff=abs(general - simplified) / general,
            )
        return table

    def bound_comparison(self, spec: Optional[SweepSpec] = None,
                         variants: Optional[Sequence[BoundVariant]] = None) -> Table:
        """Single-step bound traces per grid point under a common prior."""
        scn = self.scenario
        spec = self._sweep(spec)
        variants = tuple(BoundVariant(v) for v in (variants or spec.variants))
        prior = FimState.from_prior(scn.prior_cov, scn.motion.F, scn.motion.Q)
        prior_info = predicted_information(prior)
        logger.info(f"Bound comparison over {spec.variable} ({len(spec.grid)} points, "
                    f"{scn.bounds.n_samples} samples, m_max={scn.bounds.m_max})")

        def evaluate(indexed: Tuple[int, float]) -> Dict[str, float]:
            index, value = indexed
            point = sweep_point(spec, scn.sig, value)
            row = {'sweep_var': spec.column_name, 'value': value}
            for variant in BoundVariant:
                if variant not in variants:
                    row[f'trace_{variant.value}'] = float('nan')
                    row[f'std_{variant.value}'] = float('nan')
                    continue
                info = measurement_info_over_states(
                    point.target, scn.prior_cov, point.tx, point.rx, point.sig, scn.clutter,
                    variant, scn.bounds, stream=(index,),
                )
                fim = fim_step(prior, info.matrix, prior_info=prior_info)
                row[f'trace_{variant.value}'] = bound_trace(fim)
                row[f'std_{variant.value}'] = bound_trace_std(fim, info)
            return row

        table = Table(BOUND_COLUMNS)
        for row in self._map(evaluate, list(enumerate(spec.grid)), desc='bounds'):
            table.append(**row)
        return table

    # Monte Carlo tracking

    def _truth(self, run: int, horizon: int, initial: KinematicState) -> np.ndarray:
        rng = substream(self.scenario.seed, run, StreamTag.TRUTH)
        states = [initial.as_array()]
        for _ in range(horizon):
            states.append(self.scenario.motion.sample(rng, states[-1]))
        return np.array(states)

    def _nominal(self, horizon: int) -> List[KinematicState]:
        x = self.scenario.target.as_array()
        path = []
        for _ in range(horizon):
            x = self.scenario.motion.F @ x
            path.append(KinematicState.from_array(x))
        return path

    def tracking(self) -> Table:
        """EKF-PDA Monte Carlo errors against the IPCRLB along the nominal trajectory."""
        scn = self.scenario
        tracker = EkfPdaTracker(scn.motion, scn.sig, scn.clutter)
        logger.info(f"Tracking {scn.runs} runs over {scn.horizon} steps")

        def one_run(run: int):
            truth = self._truth(run, scn.horizon, scn.target)
            track, _ = initial_track(scn.target, scn.prior_pos_std, scn.prior_vel_std,
                                     substream(scn.seed, run, StreamTag.PRIOR))
            rng = substream(scn.seed, run, StreamTag.CLUTTER)
            estimates = [track.mean]
            diverged_at = None
            for k in range(1, scn.horizon + 1):
                predicted = tracker.predict(track)
                center, half_widths = tracker.gate_box(predicted, scn.tx, scn.rx)
                Z = generate_measurements(rng, KinematicState.from_array(truth[k]), scn.tx, scn.rx,
                                          scn.sig, scn.clutter, center, half_widths)
                track = tracker.update(predicted, Z, scn.tx, scn.rx)
                estimates.append(track.mean)
                if diverged_at is None and is_diverged(track.mean, truth[k], scn.prior_pos_std):
                    diverged_at = k
            return np.array(estimates), truth, diverged_at

        results = self._map(one_run, range(scn.runs), desc='tracking')
        errors = np.array([est - tru for est, tru, _ in results])

        prior = FimState.from_prior(scn.prior_cov, scn.motion.F, scn.motion.Q)
        contexts = [info_context(target, scn.tx, scn.rx, scn.sig, scn.clutter, g=scn.bounds.g)
                    for target in self._nominal(scn.horizon)]
        states = run_recursion(prior, contexts, BoundVariant.IPCRLB, scn.bounds)

        table = Table(TRACKING_COLUMNS)
        for k in range(scn.horizon + 1):
            table.append(
                step=k,
                pos_mse=float(np.mean(np.sum(errors[:, k, :2] ** 2, axis=-1))),
                vel_mse=float(np.mean(np.sum(errors[:, k, 2:] ** 2, axis=-1))),
                pos_bound_ipcrlb=position_trace(states[k]),
                vel_bound_ipcrlb=velocity_trace(states[k]),
                diverged_runs=sum(1 for *_, at in results if at is not None and at <= k),
            )
        return table

    # Closed-loop receiver control

    def _closed_loop_run(self, run: int) -> Dict[str, Dict[str, np.ndarray]]:
        scn = self.scenario
        tracker = EkfPdaTracker(scn.motion, scn.sig, scn.clutter)
        truth = self._truth(run, scn.horizon, scn.target)
        start, _ = initial_track(scn.target, scn.prior_pos_std, scn.prior_vel_std,
                                 substream(scn.seed, run, StreamTag.PRIOR))

        outcome = {}
        for policy in scn.policies:
            # only Random draws from its stream
            policy_rng = substream(scn.seed, run, StreamTag.POLICY)
            track = TrackEstimate(start.mean.copy(), start.cov.copy(), 0)
            fim = FimState.from_prior(scn.prior_cov, scn.motion.F, scn.motion.Q)
            rx = scn.rx
            prev = ControlCommand(rx.speed, rx.heading)

            rx_path, estimates, quality = [rx.position], [track.mean], [self._quality(truth[0], rx)]
            diverged_at = None
            for k in range(1, scn.horizon + 1):
                predicted = tracker.predict(track)
                world = ControlWorld(predicted, fim, rx, scn.tx, prev, scn.sig, scn.clutter, stream=(run, k))
                step = control_step(policy, world, scn.control, policy_rng)
                rx, prev, fim = step.rx, step.command, step.fim

                truth_k = KinematicState.from_array(truth[k])
                center, half_widths = tracker.gate_box(predicted, scn.tx, rx)
                # one stream per (run, step) shared by all policies
                meas_rng = substream(scn.seed, run, StreamTag.CLUTTER, k)
                Z = generate_measurements(meas_rng, truth_k, scn.tx, rx, scn.sig, scn.clutter,
                                          center, half_widths)
                track = tracker.update(predicted, Z, scn.tx, rx)

                rx_path.append(rx.position)
                estimates.append(track.mean)
                quality.append(self._quality(truth[k], rx))
                if diverged_at is None and is_diverged(track.mean, truth[k], scn.prior_pos_std):
                    diverged_at = k

            outcome[ControlPolicy(policy).value] = {
                'rx': np.array(rx_path),
                'estimates': np.array(estimates),
                'truth': truth,
                'quality': np.array(quality),
                'diverged_at': diverged_at,
            }
        return outcome

    def _quality(self, truth: np.ndarray, rx: KinematicState) -> Tuple[float, float, float, float]:
        geom = build_geometry(KinematicState.from_array(truth), self.scenario.tx, rx)
        _, pd, cov = tmu_at(self.scenario.sig, geom.R_T, geom.R_R)
        return pd, cov.sigma_d, cov.sigma_v, cov.sigma_theta

    def closed_loop_runs(self) -> List[Dict[str, Dict[str, np.ndarray]]]:
        """Per-run receiver paths, estimates and truth keyed by policy name."""
        scn = self.scenario
        logger.info(f"Closed-loop control: {len(scn.policies)} policies, {scn.runs} runs, "
                    f"{scn.horizon} steps, {(scn.control.N_v + 1) * (scn.control.N_w + 1)} commands")
        return self._map(self._closed_loop_run, range(scn.runs), desc='control')

    def closed_loop(self, runs: Optional[Sequence[Dict[str, Dict[str, np.ndarray]]]] = None) -> Table:
        scn = self.scenario
        runs = self.closed_loop_runs() if runs is None else runs

        table = Table(CLOSED_LOOP_COLUMNS)
        for policy in scn.policies:
            name = ControlPolicy(policy).value
            rx = np.array([r[name]['rx'] for r in runs])
            errors = rmse([r[name]['estimates'] for r in runs], [r[name]['truth'] for r in runs])
            quality = np.array([r[name]['quality'] for r in runs])
            diverged = [r[name]['diverged_at'] for r in runs]
            for k in range(scn.horizon + 1):
                table.append(
                    step=k,
                    policy=name,
                    rx_x=float(rx[:, k, 0].mean()),
                    rx_y=float(rx[:, k, 1].mean()),
                    pos_rmse=float(errors.position[k]),
                    vel_rmse=float(errors.velocity[k]),
                    pd_mean=float(quality[:, k, 0].mean()),
                    pd_std=float(quality[:, k, 0].std()),
                    sigma_d_mean=float(quality[:, k, 1].mean()),
                    sigma_d_std=float(quality[:, k, 1].std()),
                    sigma_v_mean=float(quality[:, k, 2].mean()),
                    sigma_v_std=float(quality[:, k, 2].std()),
                    sigma_theta_mean=float(quality[:, k, 3].mean()),
                    sigma_theta_std=float(quality[:, k, 3].std()),
                    diverged_runs=sum(1 for at in diverged if at is not None and at <= k),
                )
        return table

    def run(self, subcommand: str, out_dir: str) -> str:
        """Execute one experiment and write its CSV; returns the file path."""
        experiments = {
            'tmu-sweep': self.tmu_sweep,
            'bounds-compare': self.bound_comparison,
            'track': self.tracking,
            'control-compare': self.closed_loop,
            'validate-assumption1': lambda: self.validate_assumption1(self.scenario.sweep),
        }
        logger.info(f"Starting {subcommand}")
        table = experiments[subcommand]()
        return emit_csv(table, os.path.join(out_dir, OUTPUT_FILES[subcommand]))
