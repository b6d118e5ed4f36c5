import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdasync.timebase import (C_LIGHT, MotionProfile, PhaseNoiseSpec, TimebaseParams, TimebaseState,
                              apparent_doppler, clock_time, internode_lo_phase, internode_time_offset)


def tb(**kw):
    return TimebaseState(TimebaseParams(**kw))


def test_identical_states_have_zero_offset():
    a, b = tb(delta_f=3e-6, t0_offset=1e-3), tb(delta_f=3e-6, t0_offset=1e-3)
    t = np.linspace(0, 5, 11)
    assert np.all(internode_time_offset(a, b, t) == 0)
    assert np.all(internode_lo_phase(a, b, t, 2.1e9) == 0)


def test_one_ppm_for_one_second_is_one_microsecond():
    assert internode_time_offset(tb(), tb(delta_f=1e-6), 1.0) == pytest.approx(1e-6, rel=1e-12)


def test_six_ppm_over_hundred_metres():
    tof = 100.0 / C_LIGHT
    got = internode_time_offset(tb(), tb(delta_f=6e-6), tof)
    assert got == pytest.approx(2.0e-12, rel=0.01)
    assert 0.5 * got == pytest.approx(1e-12, rel=0.01)


def test_lo_phase_one_cycle():
    ph = internode_lo_phase(tb(), tb(delta_f=1e-9), 1.0, 1e9)
    assert ph == pytest.approx(2 * np.pi, rel=1e-9)


def test_free_running_ramp():
    a, b = tb(), tb(delta_f=-182e-9)
    slope = (internode_lo_phase(a, b, 2.0, 1e9) - internode_lo_phase(a, b, 1.0, 1e9)) / (2 * np.pi)
    assert slope == pytest.approx(-182.0, rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e-5, 1e-5), st.floats(-1e-5, 1e-5), st.floats(-1e-3, 1e-3), st.floats(0, 100))
def test_offset_antisymmetric(dfa, dfb, t0, t):
    a, b = tb(delta_f=dfa), tb(delta_f=dfb, t0_offset=t0)
    assert internode_time_offset(a, b, t) == -internode_time_offset(b, a, t)


def test_apparent_doppler():
    assert apparent_doppler(0, 0, 0, 2.1e9) == 0
    assert apparent_doppler(1e-6, 0, 0, 1e9) == pytest.approx(1e3, rel=1e-9)
    assert apparent_doppler(0, 0, 0.3, 2.1e9) == pytest.approx(2.1e9 * 0.3 / C_LIGHT, rel=1e-12)
    assert apparent_doppler(0, 1e-6, 0, 1e9) == pytest.approx(-1e9 * 1e-6 / (1 + 1e-6), rel=1e-12)


def test_phase_noise_deterministic_and_order_free():
    pn = PhaseNoiseSpec(white_pm_level=1e-12, flicker_pm_level=1e-9, seed=5)
    a = TimebaseState(TimebaseParams(phase_noise=pn))
    b = TimebaseState(TimebaseParams(phase_noise=pn))
    t = np.array([0.31, 0.002, 0.17])
    late = a.clock_error(t[::-1])[::-1]
    b.clock_error(np.array([1.0]))
    assert np.array_equal(late, b.clock_error(t))
    assert np.array_equal(a.clock_error(t), a.clock_error(t))


def test_phase_noise_rejects_negative_time():
    s = TimebaseState(TimebaseParams(phase_noise=PhaseNoiseSpec(white_pm_level=1e-12)))
    with pytest.raises(ValueError):
        s.clock_error(-1.0)


def test_to_true_inverts_clock():
    s = TimebaseState(TimebaseParams(delta_f=7e-6, t0_offset=-3e-3,
                                     phase_noise=PhaseNoiseSpec(flicker_pm_level=1e-8, seed=2)))
    t = np.linspace(0.5, 3.0, 40)
    assert np.max(np.abs(s.to_true(clock_time(s, t)) - t)) < 1e-15


def test_drift_schedule_integrates():
    s = tb(drift_schedule=((0.0, 0.0), (1.0, 2e-6)))
    assert s.clock_error(1.0) == pytest.approx(1e-6, rel=1e-12)
    assert s.clock_error(2.0) == pytest.approx(3e-6, rel=1e-12)


@pytest.mark.parametrize("kw", [dict(f0_osc=0), dict(delta_f=1e-3), dict(kappa_lo=0),
                                dict(drift_schedule=((0.0, 0.0),))])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        TimebaseParams(**kw)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.001, 3.0), st.floats(0, 50))
def test_motion_stays_in_bounds(v, t):
    m = MotionProfile(r0=0.8, velocity_steps=((0.0, v),), bounds=(0.37, 1.34))
    r = m.range_at(t)
    assert 0.37 - 1e-12 <= r <= 1.34 + 1e-12
    assert abs(m.range_rate(t)) == pytest.approx(v)


def test_motion_reverses_at_track_end():
    m = MotionProfile(r0=1.0, velocity_steps=((0.0, 0.3),), bounds=(0.37, 1.34))
    assert m.range_rate(0.5) == 0.3
    assert m.range_at(2.0) == pytest.approx(1.34 - (0.6 - 0.34))
    assert m.range_rate(2.0) == -0.3
