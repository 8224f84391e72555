import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ipcrlb.modules.clutter import measurement_function
from ipcrlb.modules.geometry import (
    KinematicState,
    SiteSpeeds,
    build_geometry,
    cos_half_bistatic_angle,
    doppler_shift,
    dxi_dd,
)
from ipcrlb.utils.config import SPEED_OF_LIGHT
from ipcrlb.utils.errors import CollocatedError, DomainError

F_C = 63.1e6


def test_isosceles_triangle(tx, rx, target):
    geom = build_geometry(target, tx, rx)
    R = math.hypot(1500.0, 1000.0)
    assert_allclose([geom.R_T, geom.R_R, geom.L, geom.d], [R, R, 3000.0, 2 * R])
    assert_allclose(geom.theta, math.atan2(1000.0, -1500.0))
    assert geom.theta_TR == 0.0
    assert_allclose(math.cos(geom.beta), (2 * R ** 2 - 9e6) / (2 * R ** 2))
    assert not geom.is_collinear


def test_velocity_perpendicular_to_bisector(tx, rx, target):
    # moving parallel to the baseline above its midpoint: bisector points straight down
    geom = build_geometry(target, tx, rx)
    assert_allclose(geom.delta, math.pi / 2)
    assert_allclose(doppler_shift(geom, SiteSpeeds.of(target, tx, rx), F_C), 0.0, atol=1e-12)


def test_doppler_sign_matches_range_rate(tx, rx):
    closing = KinematicState(1500.0, 1000.0, 0.0, -10.0)
    geom = build_geometry(closing, tx, rx)
    assert_allclose(geom.delta, 0.0, atol=1e-12)

    xi = doppler_shift(geom, SiteSpeeds.of(closing, tx, rx), F_C)
    range_rate = measurement_function(closing, tx, rx)[1]
    assert xi > 0
    assert_allclose(xi, -F_C / SPEED_OF_LIGHT * range_rate, rtol=1e-12)


def test_moving_sites_contribute_to_doppler(tx):
    target = KinematicState(1000.0, 2000.0, 3.0, -4.0)
    rx = KinematicState(3000.0, 500.0, -7.0, 2.0)
    geom = build_geometry(target, tx, rx)
    xi = doppler_shift(geom, SiteSpeeds.of(target, tx, rx), F_C)

    # range rate of the receiver leg seen from a moving receiver
    p_t, p_r = target.position - tx.position, target.position - rx.position
    rate = p_t @ target.velocity / geom.R_T + p_r @ (target.velocity - rx.velocity) / geom.R_R
    assert_allclose(xi, -F_C / SPEED_OF_LIGHT * rate, rtol=1e-9)


def test_target_on_site_raises(tx, rx):
    with pytest.raises(CollocatedError):
        build_geometry(KinematicState(0.0, 0.0), tx, rx)
    with pytest.raises(CollocatedError):
        build_geometry(KinematicState(3000.0, 0.0), tx, rx)


def test_baseline_midpoint_is_collinear(tx, rx):
    geom = build_geometry(KinematicState(1500.0, 0.0), tx, rx)
    assert_allclose(geom.beta, math.pi)
    assert geom.is_collinear
    assert_allclose(geom.d, geom.L)
    assert cos_half_bistatic_angle(geom.d, geom.L, geom.theta, geom.theta_TR) == 0.0


@pytest.mark.parametrize("position", [(1200.0, 800.0), (-2500.0, 4000.0), (7000.0, -300.0), (3500.0, 10.0)])
def test_cos_half_bistatic_angle_matches_triangle(tx, rx, position):
    geom = build_geometry(KinematicState(*position), tx, rx)
    value = cos_half_bistatic_angle(geom.d, geom.L, geom.theta, geom.theta_TR)
    assert_allclose(value, math.cos(geom.beta / 2), rtol=1e-9, atol=1e-12)


def test_cos_half_bistatic_angle_limits():
    assert cos_half_bistatic_angle(100.0, 0.0, 1.0, 0.0) == 1.0
    with pytest.raises(DomainError):
        cos_half_bistatic_angle(100.0, 200.0, 1.0, 0.0)


def test_dxi_dd_matches_finite_difference(sweep_sites):
    tx, rx = sweep_sites
    speed = 50.0
    position = 7000.0 * np.array([math.cos(math.radians(60)), math.sin(math.radians(60))])
    geom = build_geometry(KinematicState(*position, 0.0, speed), tx, rx)

    def target_doppler(d):
        half = cos_half_bistatic_angle(d, geom.L, geom.theta, geom.theta_TR)
        return F_C / SPEED_OF_LIGHT * 2.0 * speed * math.cos(geom.delta) * half

    h = 1e-2
    numeric = (target_doppler(geom.d + h) - target_doppler(geom.d - h)) / (2 * h)
    assert_allclose(dxi_dd(geom, speed, f_c=F_C), numeric, rtol=1e-5)


def test_dxi_dd_vanishes_on_baseline_and_without_baseline(tx, rx):
    on_baseline = build_geometry(KinematicState(1500.0, 0.0, 10.0, 0.0), tx, rx)
    assert dxi_dd(on_baseline, 10.0) == 0.0

    monostatic = build_geometry(KinematicState(1000.0, 1000.0, 10.0, 0.0), tx, tx)
    assert dxi_dd(monostatic, 10.0) == 0.0


def test_range_insensitive_doppler_away_from_baseline(sweep_sites):
    tx, rx = sweep_sites
    for theta_deg in list(range(0, 171, 10)) + list(range(190, 361, 10)):
        theta = math.radians(theta_deg)
        position = 7000.0 * np.array([math.cos(theta), math.sin(theta)])
        geom = build_geometry(KinematicState(*position), tx, rx)
        assert abs(dxi_dd(geom, 50.0, delta=0.0, f_c=F_C)) < 1e-3


def test_kinematic_state_array_roundtrip():
    state = KinematicState(1.0, 2.0, 3.0, 4.0)
    assert KinematicState.from_array(state.as_array()) == state
    assert_allclose(state.speed, 5.0)
    assert_allclose(state.heading, math.atan2(4.0, 3.0))
    with pytest.raises(DomainError):
        KinematicState(float('nan'), 0.0)
    with pytest.raises(DomainError):
        KinematicState.from_array([1.0, 2.0, 3.0])
