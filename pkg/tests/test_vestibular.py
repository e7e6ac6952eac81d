import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from svcvv import vestibular as ves

from oracles import lowpass_response, scc_step_response

DT = 0.01


def rel_err(num, ref):
    return np.max(np.abs(num - ref)) / np.max(np.abs(ref))


def test_oto_identity_and_sensed_acceleration():
    f = np.array([0.3, 9.7, -0.2])
    assert np.array_equal(ves.oto_sense(f), f)
    assert np.allclose(ves.sensed_acceleration(f, [0, 9.81, 0]), [0.3, -0.11, -0.2])


def test_scc_step_response_closed_form():
    n = int(10 * 7.0 / DT)
    y = ves.scc_response(np.tile([1.0, 0.0, 0.0], (n, 1)), DT)
    t = (np.arange(n) + 1) * DT
    assert rel_err(y[:, 0], scc_step_response(t)) < 1e-3
    assert np.all(y[:, 1:] == 0)
    # the canal passes an initial step at full gain
    assert y[0, 0] == pytest.approx(1.0, abs=0.01)


def test_scc_state_step_matches_response():
    x = ves.scc_zero_state()
    outs = []
    for _ in range(5):
        x, y = ves.scc_step(x, [0.0, 0.5, 0.0], DT)
        outs.append(y)
    ref = ves.scc_response(np.tile([0.0, 0.5, 0.0], (5, 1)), DT)
    assert np.allclose(outs, ref)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_scc_is_linear(a, b):
    rng = np.random.default_rng(0)
    u1 = rng.normal(size=(200, 3))
    u2 = rng.normal(size=(200, 3))
    lhs = ves.scc_response(a * u1 + b * u2, DT)
    rhs = a * ves.scc_response(u1, DT) + b * ves.scc_response(u2, DT)
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_lp_first_order_response():
    n = int(10 * 2.0 / DT)
    v0 = np.array([0.0, 9.81, 0.0])
    f = np.array([1.7, 9.66, 0.0])
    v = ves.lp_response(v0, np.tile(f, (n, 1)), np.zeros((n, 3)), DT)
    t = (np.arange(n) + 1) * DT
    ref = lowpass_response(t[:, None], v0, f)
    assert rel_err(v - f, ref - f) < 1e-3


@given(st.tuples(*[st.floats(-2, 2)] * 3))
def test_lp_rotation_term_preserves_norm_at_equilibrium(w):
    # f = v: only the rotation term acts, which is a pure rotation of v
    v = np.array([0.0, 9.81, 0.0])
    out = ves.lp_step(v, v, np.array(w), DT, tau=1e9)
    assert np.linalg.norm(out) == pytest.approx(9.81, rel=1e-8)


def test_lp_rest_is_fixed_point():
    v = np.array([0.0, 9.81, 0.0])
    assert np.array_equal(ves.lp_step(v, v, np.zeros(3), DT), v)
