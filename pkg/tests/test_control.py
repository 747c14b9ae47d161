import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from plate_netsim.control import ControllerState, PdGains, cascade_step, pd_step

vals = st.floats(-1e3, 1e3, allow_nan=False)


def test_constant_error_has_no_derivative():
    assert pd_step(PdGains(2.0, 5.0), 0.3, 0.3, 0.01) == pytest.approx(0.6)


def test_ramp_error_gives_exact_slope():
    g, m, dt = PdGains(1.5, 0.25), 3.0, 0.02
    assert pd_step(g, 1.0, 1.0 - m * dt, dt) == pytest.approx(1.5 + 0.25 * m)


def test_hand_computed_value():
    assert pd_step(PdGains(2.0, 0.5), 0.1, 0.08, 0.01) == pytest.approx(1.2)


def test_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        pd_step(PdGains(1, 1), 0.1, 0.0, 0.0)


def test_rejects_nonfinite_gains():
    with pytest.raises(ValueError):
        PdGains(math.inf, 0.0)


@given(vals, vals, st.floats(-10, 10, allow_nan=False), st.floats(1e-3, 1.0))
def test_pd_homogeneous(e, p, alpha, dt):
    g = PdGains(1.3, 0.7)
    assert pd_step(g, alpha * e, alpha * p, dt) == pytest.approx(
        alpha * pd_step(g, e, p, dt), rel=1e-9, abs=1e-6)


def test_zero_error_gives_zero_output():
    u, desired, cs = cascade_step(ControllerState(), 0.2, 0.2, 0.0, PdGains(1, 1), PdGains(20, 1),
                                  0.01, now=1.0)
    assert u == 0.0 and desired == 0.0
    assert cs.last_update_time == 1.0 and cs.commanded_u == 0.0


def test_degenerate_outer_loop_regulates_angle_to_zero():
    cs = ControllerState(prev_error_outer=0.0, prev_error_inner=-0.1, last_update_time=0.0)
    u, desired, _ = cascade_step(cs, 1.0, 0.0, 0.1, PdGains(0, 0), PdGains(10, 0.5), 0.01, now=0.01)
    assert desired == 0.0
    assert u == pytest.approx(pd_step(PdGains(10, 0.5), -0.1, -0.1, 0.01))


def test_first_update_has_no_derivative_kick():
    u, desired, _ = cascade_step(ControllerState(), 0.1, 0.0, 0.0, PdGains(0.5, 100.0),
                                 PdGains(10.0, 100.0), 0.01, now=0.5)
    assert desired == pytest.approx(-0.05)
    assert u == pytest.approx(10.0 * -0.05)


@given(vals, vals, st.floats(-1, 1), st.floats(-1, 1), st.floats(1e-4, 0.2))
def test_desired_angle_never_exceeds_limit(ref, meas, angle, prev, dt):
    cs = ControllerState(prev, prev, 0.0, 0.0)
    _, desired, _ = cascade_step(cs, ref, meas, angle, PdGains(5, 5), PdGains(50, 5), dt, 0.3, now=dt)
    assert -0.3 <= desired <= 0.3


def test_large_error_uses_clamped_setpoint():
    cs = ControllerState(0.0, 0.0, 0.0, 0.0)
    u, desired, new = cascade_step(cs, 100.0, 0.0, 0.0, PdGains(5, 0), PdGains(2, 0), 0.01, 0.5, now=0.01)
    assert desired == -0.5
    assert new.prev_error_inner == -0.5
    assert u == pytest.approx(-1.0)
