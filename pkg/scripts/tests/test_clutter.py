import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ipcrlb.modules.clutter import (
    ClutterModel,
    MeasurementSet,
    association_probability,
    cardinality_probability,
    conditional_likelihood,
    gate_volume,
    generate_measurements,
    innovations,
    measurement_function,
    measurement_jacobian,
)
from ipcrlb.modules.geometry import KinematicState
from ipcrlb.modules.tmu import MeasCov, meas_cov_assumption1
from ipcrlb.processor.rng import substream
from ipcrlb.utils.errors import DomainError
from ipcrlb.utils.helpers import wrap_to_pi


def test_cardinality_distribution_sums_to_one():
    total = sum(cardinality_probability(0.9, 1.0, m) for m in range(60))
    assert_allclose(total, 1.0, rtol=1e-12)
    assert_allclose(cardinality_probability(0.9, 1.0, 0), 0.1 * math.exp(-1.0))


def test_cardinality_is_vectorized():
    pd = np.array([0.2, 0.5, 0.9])
    lam = np.array([0.5, 1.0, 2.0])
    values = cardinality_probability(pd, lam, 2)
    assert values.shape == (3,)
    for i in range(3):
        assert_allclose(values[i], cardinality_probability(float(pd[i]), float(lam[i]), 2))
    with pytest.raises(DomainError):
        cardinality_probability(0.5, 1.0, -1)


def test_association_probability_limits():
    assert association_probability(1.0, 0.0, 3) == 1.0
    assert association_probability(0.0, 2.0, 1) == 0.0
    assert association_probability(0.9, 50.0, 1) < association_probability(0.9, 1.0, 1)
    with pytest.raises(DomainError):
        association_probability(0.9, 1.0, 0)


def test_jacobian_matches_finite_difference(tx, rx):
    state = np.array([1200.0, 900.0, 7.0, -4.0])
    H = measurement_jacobian(KinematicState.from_array(state), tx, rx)
    h = 1e-4
    for j in range(4):
        step = np.zeros(4)
        step[j] = h
        upper = measurement_function(KinematicState.from_array(state + step), tx, rx)
        lower = measurement_function(KinematicState.from_array(state - step), tx, rx)
        assert_allclose(H[:, j], (upper - lower) / (2 * h), rtol=1e-5, atol=1e-9)


def test_innovations_wrap_doa():
    points = np.array([[100.0, 1.0, 0.01]])
    expected = np.array([90.0, 2.0, 2 * math.pi - 0.01])
    assert_allclose(innovations(points, expected), [[10.0, -1.0, 0.02]], atol=1e-12)


def test_doa_half_turn_wraps_to_plus_pi():
    assert wrap_to_pi(-math.pi) == math.pi
    assert wrap_to_pi(math.pi) == math.pi
    assert_allclose(wrap_to_pi(np.array([-math.pi + 0.1, 2 * math.pi])), [-math.pi + 0.1, 0.0], atol=1e-12)

    residual = innovations(np.array([[0.0, 0.0, 0.0]]), np.array([0.0, 0.0, math.pi]))
    assert residual[0, 2] == math.pi


def test_gate_volume():
    R = MeasCov(np.diag([4.0, 9.0, 0.01]))
    assert_allclose(gate_volume(R, 2.0), 4.0 ** 3 * 2.0 * 3.0 * 0.1)


def test_likelihood_without_detection_is_uniform():
    R = MeasCov(np.diag([1.0, 1.0, 1.0]))
    Z = MeasurementSet(np.zeros((2, 3)), gate_volume=50.0)
    clutter = ClutterModel(density=0.01, V=1000.0, g=4.0)
    assert_allclose(conditional_likelihood(Z, np.zeros(3), R, 0.0, clutter), 1.0 / 50.0 ** 2)


def test_likelihood_single_target_measurement():
    R = MeasCov(np.diag([1.0, 4.0, 0.25]))
    Z = MeasurementSet(np.array([[1.0, 0.0, 0.0]]))
    clutter = ClutterModel(density=0.0, V=100.0, g=4.0)
    expected_pdf = math.exp(-0.5) / ((2 * math.pi) ** 1.5 * math.sqrt(1.0 * 4.0 * 0.25))
    assert_allclose(conditional_likelihood(Z, np.zeros(3), R, 0.9, clutter), expected_pdf, rtol=1e-12)


def test_clutter_from_cells():
    model = ClutterModel.from_cells(N_cell=1e6, P_FA=1e-3, V=2e5)
    assert_allclose(model.density, 1e6 * 1e-3 / 2e5)
    assert_allclose(model.expected_count(), 1e3)
    with pytest.raises(DomainError):
        ClutterModel(density=-1.0)


def test_generate_measurements_detection_only(atsc, tx, rx, target):
    quiet = ClutterModel(density=0.0)
    Z = generate_measurements(substream(7, 1), target, tx, rx, atsc, quiet, pd=1.0)
    assert Z.m_k == 1
    assert Z.target_index == 0

    missed = generate_measurements(substream(7, 1), target, tx, rx, atsc, quiet, pd=0.0)
    assert missed.m_k == 0
    assert missed.target_index is None


def test_generate_measurements_clutter_stays_in_box(atsc, tx, rx, target):
    center = measurement_function(target, tx, rx)
    half_widths = np.array([200.0, 30.0, 0.05])
    dense = ClutterModel(density=1e-2, V=1e9, g=4.0)
    Z = generate_measurements(substream(11, 2), target, tx, rx, atsc, dense, center, half_widths, pd=0.0)
    assert Z.m_k > 0
    assert_allclose(Z.gate_volume, np.prod(2 * half_widths))
    assert np.all(np.abs(Z.points[:, :2] - center[:2]) <= half_widths[:2] + 1e-9)
    assert np.all(np.abs(innovations(Z.points, center)[:, 2]) <= half_widths[2] + 1e-12)


def test_generate_measurements_is_deterministic(atsc, tx, rx, target, clutter):
    first = generate_measurements(substream(3, 4), target, tx, rx, atsc, clutter)
    second = generate_measurements(substream(3, 4), target, tx, rx, atsc, clutter)
    assert np.array_equal(first.points, second.points)
    assert first.target_index == second.target_index


def test_target_measurement_is_marked(atsc, tx, rx, target, clutter):
    R = meas_cov_assumption1(atsc, 59.0)
    for seed in range(5):
        Z = generate_measurements(substream(seed, 9), target, tx, rx, atsc, clutter, pd=1.0)
        assert Z.target_index is not None
        residual = innovations(Z.points[Z.target_index], measurement_function(target, tx, rx))
        assert np.all(np.abs(residual) < 10 * R.sigmas)
