import numpy as np
import pytest
from numpy.testing import assert_allclose

from ipcrlb.modules.clutter import (
    ClutterModel,
    MeasurementSet,
    generate_measurements,
    measurement_function,
    measurement_jacobian,
)
from ipcrlb.modules.geometry import KinematicState
from ipcrlb.modules.tmu import meas_cov_assumption1
from ipcrlb.modules.tracker import (
    EkfPdaTracker,
    MotionModel,
    TrackEstimate,
    initial_track,
    is_diverged,
    pda_update,
    predict,
    rmse,
)
from ipcrlb.processor.rng import substream
from ipcrlb.utils.errors import DomainError, LengthMismatchError


@pytest.fixture
def track():
    return TrackEstimate(np.array([1500.0, 1000.0, 10.0, 0.0]), np.diag([400.0, 400.0, 25.0, 25.0]))


def test_ncv_model():
    model = MotionModel.ncv(2.0, 0.5)
    assert_allclose(model.F[0, 2], 2.0)
    assert_allclose(model.Q, model.Q.T)
    assert np.all(np.linalg.eigvalsh(model.Q) >= 0)
    assert_allclose(model.Q[0, 0], 0.5 * 8.0 / 3.0)
    with pytest.raises(DomainError):
        MotionModel.ncv(0.0, 0.1)


def test_predict(track):
    model = MotionModel.ncv(1.0, 0.1)
    predicted = predict(track, model)
    assert_allclose(predicted.mean, [1510.0, 1000.0, 10.0, 0.0])
    assert_allclose(predicted.cov, model.F @ track.cov @ model.F.T + model.Q)
    assert predicted.k == track.k + 1


def test_empty_scan_keeps_prediction(atsc, tx, rx, clutter, track):
    R = meas_cov_assumption1(atsc, 59.0)
    updated = pda_update(track, MeasurementSet(), R, 0.9, clutter, tx, rx)
    assert np.array_equal(updated.mean, track.mean)
    assert np.array_equal(updated.cov, track.cov)


def test_single_exact_measurement_is_kalman_update(atsc, tx, rx, track):
    R = meas_cov_assumption1(atsc, 59.0)
    quiet = ClutterModel(density=0.0)
    z = measurement_function(track.state, tx, rx)
    updated = pda_update(track, MeasurementSet(z[None, :]), R, 0.9, quiet, tx, rx)

    H = measurement_jacobian(track.state, tx, rx)
    S = H @ track.cov @ H.T + R.matrix
    K = track.cov @ H.T @ np.linalg.inv(S)
    assert_allclose(updated.mean, track.mean, atol=1e-9)
    assert_allclose(updated.cov, track.cov - K @ S @ K.T, rtol=1e-8, atol=1e-8)


def test_far_measurement_is_gated_out(atsc, tx, rx, clutter, track):
    R = meas_cov_assumption1(atsc, 59.0)
    z = measurement_function(track.state, tx, rx) + np.array([5000.0, 0.0, 0.0])
    updated = pda_update(track, MeasurementSet(z[None, :]), R, 0.9, clutter, tx, rx)
    assert np.array_equal(updated.mean, track.mean)


def test_clutter_inflates_covariance(atsc, tx, rx, track):
    R = meas_cov_assumption1(atsc, 59.0)
    z = measurement_function(track.state, tx, rx)
    quiet = pda_update(track, MeasurementSet(z[None, :]), R, 0.9, ClutterModel(density=0.0), tx, rx)
    noisy = pda_update(track, MeasurementSet(z[None, :]), R, 0.9, ClutterModel(density=1e-2), tx, rx)
    assert np.trace(quiet.cov) < np.trace(noisy.cov) < np.trace(track.cov)


def test_relinearized_update_removes_curvature_error(atsc, tx, rx):
    predicted = TrackEstimate(np.array([3000.0, 200.0, 10.0, 0.0]), np.diag([900.0, 900.0, 25.0, 25.0]))
    truth = KinematicState(3030.0, 200.0, 10.0, 0.0)
    Z = MeasurementSet(measurement_function(truth, tx, rx)[None, :])
    R = meas_cov_assumption1(atsc, 1e4)
    quiet = ClutterModel(density=0.0)

    one_pass = pda_update(predicted, Z, R, 0.9, quiet, tx, rx)
    iterated = pda_update(predicted, Z, R, 0.9, quiet, tx, rx, iterations=5)
    error = lambda t: np.hypot(*(t.mean[:2] - truth.position))
    assert error(iterated) < error(one_pass)
    with pytest.raises(DomainError):
        EkfPdaTracker(MotionModel.ncv(), atsc, quiet, iterations=0)


def _final_errors(tracker, tx, rx, target, seeds, steps=20):
    errors = []
    for seed in seeds:
        track, _ = initial_track(target, 100.0, 10.0, substream(seed, 2))
        truth = target.as_array()
        rng = substream(seed, 3)
        for _ in range(steps):
            truth = tracker.model.F @ truth
            predicted = tracker.predict(track)
            center, half_widths = tracker.gate_box(predicted, tx, rx)
            Z = generate_measurements(rng, KinematicState.from_array(truth), tx, rx, tracker.sig,
                                      tracker.clutter, center, half_widths)
            track = tracker.update(predicted, Z, tx, rx)
        errors.append(np.hypot(*(track.mean[:2] - truth[:2])))
    return np.array(errors)


def test_tracker_follows_target_without_clutter(atsc, tx, rx, target):
    tracker = EkfPdaTracker(MotionModel.ncv(1.0, 0.1), atsc, ClutterModel(density=0.0))
    errors = _final_errors(tracker, tx, rx, target, range(40))
    assert np.all(errors < 100.0)
    assert np.sqrt(np.mean(errors ** 2)) < 40.0


def test_tracker_keeps_most_tracks_in_clutter(atsc, tx, rx, target):
    # tracks can still be lost while the prior gate is wide, so check the bulk
    tracker = EkfPdaTracker(MotionModel.ncv(1.0, 0.1), atsc, ClutterModel(density=1.5e-3))
    errors = _final_errors(tracker, tx, rx, target, range(40))
    assert np.median(errors) < 50.0
    assert np.mean(errors < 150.0) >= 0.8


def test_rmse():
    truths = np.zeros((2, 3, 4))
    estimates = np.zeros((2, 3, 4))
    estimates[0, :, 0] = 3.0
    estimates[1, :, 1] = 4.0
    estimates[:, 2, 2] = 1.0
    result = rmse(estimates, truths)
    assert_allclose(result.position, np.sqrt([12.5, 12.5, 12.5]))
    assert_allclose(result.velocity, [0.0, 0.0, 1.0])
    assert result.n_runs == 2

    masked = rmse(estimates, truths, mask=[True, False])
    assert_allclose(masked.position, [3.0, 3.0, 3.0])
    with pytest.raises(LengthMismatchError):
        rmse(estimates[:, :2], truths)


def test_divergence_flag():
    assert is_diverged(np.array([2000.0, 0.0, 0.0, 0.0]), np.zeros(4), 100.0)
    assert not is_diverged(np.array([50.0, 0.0, 0.0, 0.0]), np.zeros(4), 100.0)


def test_initial_track_is_reproducible(target):
    first, cov = initial_track(target, 100.0, 10.0, substream(5, 2))
    second, _ = initial_track(target, 100.0, 10.0, substream(5, 2))
    assert np.array_equal(first.mean, second.mean)
    assert_allclose(cov, np.diag([1e4, 1e4, 100.0, 100.0]))
