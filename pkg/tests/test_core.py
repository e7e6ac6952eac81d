import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from svcvv import core
from svcvv.core import ImuSeries, SvcError, TimeSeries

from oracles import quat_to_matrix, rodrigues

finite = st.floats(-10, 10, allow_nan=False)
vec = st.tuples(finite, finite, finite).map(np.array)
nonzero_vec = vec.filter(lambda v: np.linalg.norm(v) > 1e-3)


def test_vec3_and_validation():
    assert np.array_equal(core.vec3(1, 2, 3), [1.0, 2.0, 3.0])
    with pytest.raises(SvcError, match="shape"):
        core.as_vec3([1, 2])
    with pytest.raises(SvcError, match="non-finite"):
        core.as_vec3([1, np.nan, 0])
    with pytest.raises(SvcError, match="unit quaternion"):
        core.as_quat([1, 1, 0, 0])


def test_cross_right_handed():
    assert np.allclose(core.cross([1, 0, 0], [0, 1, 0]), [0, 0, 1])
    assert np.allclose(core.cross([0, 1, 0], [0, 0, 1]), [1, 0, 0])


def test_normalize_to():
    assert np.allclose(core.normalize_to([3, 0, 4], 9.81), [3 * 1.962, 0, 4 * 1.962])
    with pytest.raises(SvcError, match="degenerate direction"):
        core.normalize_to([0, 0, 0], 9.81)


@given(nonzero_vec, st.floats(-np.pi, np.pi), vec)
def test_quat_rotation_matches_rodrigues(axis, angle, v):
    q = core.quat_from_axis_angle(axis, angle)
    assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-12)
    expect = rodrigues(axis, angle) @ v
    assert np.allclose(core.quat_rotate(q, v), expect, atol=1e-9)
    assert np.allclose(quat_to_matrix(q) @ v, expect, atol=1e-9)


@given(nonzero_vec, st.floats(-3, 3), nonzero_vec, st.floats(-3, 3), vec)
def test_quat_mul_composes_rotations(a1, t1, a2, t2, v):
    p = core.quat_from_axis_angle(a1, t1)
    q = core.quat_from_axis_angle(a2, t2)
    pq = core.quat_mul(p, q)
    assert np.allclose(core.quat_rotate(pq, v), core.quat_rotate(p, core.quat_rotate(q, v)), atol=1e-9)
    assert np.linalg.norm(pq) == pytest.approx(1.0, abs=1e-12)
    back = core.quat_rotate(core.quat_conj(p), core.quat_rotate(p, v))
    assert np.allclose(back, v, atol=1e-9)


@given(nonzero_vec, nonzero_vec)
def test_two_vector_rotation(u, v):
    q = core.quat_from_two_vectors(u, v)
    out = core.quat_rotate(q, u / np.linalg.norm(u))
    assert np.allclose(out, v / np.linalg.norm(v), atol=1e-9)


def test_two_vector_rotation_antiparallel_and_identity():
    q = core.quat_from_two_vectors([0, 0, 1], [0, 0, -1])
    assert np.allclose(core.quat_rotate(q, [0, 0, 1]), [0, 0, -1], atol=1e-12)
    assert np.array_equal(core.quat_from_two_vectors([0, 0, 2], [0, 0, 5]), [1, 0, 0, 0])


@given(vec.map(lambda v: v * 0.3), st.floats(1e-3, 0.02))
def test_body_rate_recovers_constant_rate(w, dt):
    q0 = core.quat_from_axis_angle([0.3, -0.2, 0.9], 0.7)
    q1 = core.quat_mul(q0, core.quat_from_rotvec(w * dt))
    rate = core.quat_derivative_body_rate(q0, q1, dt)
    # the finite difference returns 2 sin(|w|dt/2)/dt along the rotation axis
    n = np.linalg.norm(w)
    expected = w * (2 * np.sin(n * dt / 2) / (n * dt)) if n > 0 else w
    assert np.allclose(rate, expected, atol=1e-9)


def test_body_rate_is_body_frame():
    # attitude rotated 90° about z; a body-x rotation must come back as body x
    q0 = core.quat_from_axis_angle([0, 0, 1], np.pi / 2)
    q1 = core.quat_mul(q0, core.quat_from_rotvec([0.01, 0, 0]))
    assert np.allclose(core.quat_derivative_body_rate(q0, q1, 0.01), [1, 0, 0], atol=1e-5)
    with pytest.raises(SvcError):
        core.quat_derivative_body_rate(q0, q1, 0.0)


def test_time_series_validation():
    TimeSeries([0, 1, 2], np.zeros((3, 3)))
    with pytest.raises(SvcError, match="strictly increasing"):
        TimeSeries([0, 1, 1], np.zeros((3, 3)))
    with pytest.raises(SvcError):
        TimeSeries([0, 1], np.zeros((3, 3)))


def test_imu_series_slice_and_index():
    t = np.arange(10) * 0.01
    imu = ImuSeries(t, np.tile([0, 9.81, 0], (10, 1)), np.zeros((10, 3)))
    assert imu.dt == pytest.approx(0.01)
    s = imu.slice_time(0.02, 0.05)
    assert np.allclose(s.t, [0.02, 0.03, 0.04, 0.05])
    assert imu[3].t == pytest.approx(0.03)
    with pytest.raises(SvcError):
        ImuSeries(t[::-1], imu.f, imu.omega)
