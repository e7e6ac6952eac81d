import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from svcvv import core, internal
from svcvv.core import SvcError

from oracles import washout_step_response

small = st.floats(-5, 5, allow_nan=False)
v3 = st.tuples(small, small, small).map(np.array)


def test_washout_step_response():
    dt = 0.01
    n = int(10 * 7.0 / dt)
    y = internal.washout_response(np.tile([1.0, 1.0, 1.0], (n, 1)), dt)
    t = (np.arange(n) + 1) * dt
    ref = washout_step_response(t)
    assert np.max(np.abs(y[:, 2] - ref)) / np.max(ref) < 1e-3


def test_internal_scc_step_single():
    x, y = internal.internal_scc_step(np.zeros(3), [0.0, 2.0, 0.0], 0.01)
    assert y[1] == pytest.approx(2.0 * np.exp(-0.01 / 7.0), rel=1e-9)
    assert x[1] + y[1] == pytest.approx(2.0)


def test_predicted_signals_linear_combination():
    w = internal.predicted_omega([1, 0, 0], [0, 1, 0])
    assert np.allclose(w, [0.1, 10.0, 0.0])
    a = internal.predicted_acceleration([1, 0, 0], [0, 1, 0])
    assert np.allclose(a, [0.1, 0.5, 0.0])


@given(v3, v3, v3, st.floats(0, 20), st.floats(0, 20))
def test_omega_loop_solution_satisfies_loop(w, w_s, x, kw, kwc):
    w_hat = internal.solve_omega_hat(w, w_s, x, kw, kwc)
    w_hat_s = w_hat - x
    resid = w_hat - internal.predicted_omega(w, w_s - w_hat_s, kw, kwc)
    assert np.allclose(resid, 0, atol=1e-9)


@given(v3, v3, v3, v3, st.floats(0, 5), st.floats(0, 5))
def test_accel_loop_solution_satisfies_loop(a, a_s, g_hat, v_hat, ka, kac):
    a_hat = internal.solve_a_hat(a, a_s, g_hat, v_hat, ka, kac)
    _, _, a_hat_s = internal.predicted_gia(g_hat, a_hat, v_hat)
    resid = a_hat - internal.predicted_acceleration(a, a_s - a_hat_s, ka, kac)
    assert np.allclose(resid, 0, atol=1e-9)


def test_complementary_filter_level_rest():
    q = internal.complementary_filter_step([1, 0, 0, 0], [0, 0, 0], [0, 0, 9.81], 0.01)
    assert np.allclose(q, [1, 0, 0, 0])


def test_complementary_filter_pulls_tilt():
    # attitude wrong by 10° about x while the accelerometer says level
    q = core.quat_from_axis_angle([1, 0, 0], np.radians(10))
    q1 = internal.complementary_filter_step(q, [0, 0, 0], [0, 0, 9.81], 0.01, alpha=0.98)
    up = core.quat_rotate(q1, [0, 0, 1])
    tilt = np.degrees(np.arccos(up[2]))
    assert tilt == pytest.approx(9.8, abs=1e-6)


def test_complementary_filter_free_fall_skips_correction():
    q = core.quat_from_axis_angle([1, 0, 0], 0.2)
    q1 = internal.complementary_filter_step(q, [0, 0, 0], [0, 0, 0.1], 0.01)
    assert np.allclose(q1, q)
    with pytest.raises(SvcError):
        internal.complementary_filter_step(q, [0, 0, 0], [0, 0, 9.81], 0.01, alpha=1.5)


@given(v3, st.tuples(small, small, small))
def test_gravity_observer_keeps_norm(g, w):
    if np.linalg.norm(g) < 1e-3:
        g = np.array([0.0, 9.81, 0.0])
    q0 = core.quat_identity()
    q1 = core.quat_from_rotvec(np.array(w) * 0.01)
    gn = internal.gravity_observer_step(g, q0, q1, 0.01)
    assert abs(np.linalg.norm(gn) - 9.81) < 1e-9


def test_gravity_observer_counter_rotates():
    # head rolls by +θ about z; gravity seen from the head turns by -θ
    g = np.array([0.0, 9.81, 0.0])
    q = core.quat_identity()
    steps = 100
    dq = core.quat_from_rotvec([0, 0, np.radians(30) / steps])
    for _ in range(steps):
        qn = core.quat_mul(q, dq)
        g = internal.gravity_observer_step(g, q, qn, 0.01)
        q = qn
    ang = np.degrees(np.arctan2(g[1], g[0]))
    assert ang == pytest.approx(60.0, abs=0.05)


def test_run_observer_matches_stepping():
    rng = np.random.default_rng(3)
    w = rng.normal(0, 0.2, (50, 3))
    f = np.tile([0, 0, 9.81], (50, 1)) + rng.normal(0, 0.1, (50, 3))
    g, q = internal.run_observer([0, 0, 9.81], [1, 0, 0, 0], w, f, 0.01)
    gk, qk = np.array([0, 0, 9.81]), np.array([1.0, 0, 0, 0])
    for k in range(50):
        qn = internal.complementary_filter_step(qk, w[k], f[k], 0.01)
        gk = internal.gravity_observer_step(gk, qk, qn, 0.01)
        qk = qn
    assert np.allclose(g[-1], gk) and np.allclose(q[-1], qk)


def test_g_hat_and_vv_hat():
    gh = internal.g_hat_step([0, 9.81, 0], [1, 0, 0], [0, 0, 1], 0.01)
    assert np.allclose(gh, [0.025, 9.81, 0.025])
    assert np.array_equal(internal.sensed_vv_hat([1, 2, 3]), [1, 2, 0])


def test_predicted_gia():
    f_hat, f_hat_s, a_hat_s = internal.predicted_gia([0, 9.81, 0], [1, 0, 0], [0, 9.0, 0])
    assert np.allclose(f_hat, [1, 9.81, 0]) and np.allclose(f_hat_s, f_hat)
    assert np.allclose(a_hat_s, [1, 0.81, 0])
