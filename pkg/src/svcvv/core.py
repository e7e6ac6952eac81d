"""Vector, quaternion and time-series primitives shared by the model blocks.

Conventions:
    - Vec3 values are float64 arrays of shape (3,).
    - Quaternions are float64 arrays [w, x, y, z] (scalar first) composed with
      the Hamilton product. A quaternion ``q`` maps body (head) vectors into
      the world frame: ``v_world = q ∘ v_body ∘ q*``.
    - The world frame used by the attitude filter has +z pointing up.

The ``_``-prefixed functions are numba kernels used inside the simulation
loop; the public functions wrap them with input validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numba import njit

GRAVITY = 9.81


class SvcError(ValueError):
    """Base class for user-facing errors raised by this package."""


class DivergenceError(SvcError):
    """Raised when the simulated state stops being finite."""


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _norm3(v):
    return np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


@njit(cache=True)
def _qmul(p, q):
    out = np.empty(4)
    out[0] = p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3]
    out[1] = p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2]
    out[2] = p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1]
    out[3] = p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0]
    return out


@njit(cache=True)
def _qconj(q):
    out = np.empty(4)
    out[0] = q[0]
    out[1] = -q[1]
    out[2] = -q[2]
    out[3] = -q[3]
    return out


@njit(cache=True)
def _qnormalize(q):
    n = np.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return q / n


@njit(cache=True)
def _qrotate(q, v):
    # R(q) v without building the matrix
    qv = np.empty(3)
    qv[0] = q[1]
    qv[1] = q[2]
    qv[2] = q[3]
    t = 2.0 * _cross(qv, v)
    return v + q[0] * t + _cross(qv, t)


@njit(cache=True)
def _qexp(axis_angle):
    # quaternion of the rotation vector ``axis_angle`` (radians)
    out = np.empty(4)
    angle = _norm3(axis_angle)
    if angle < 1e-300:
        out[0] = 1.0
        out[1] = 0.0
        out[2] = 0.0
        out[3] = 0.0
        return out
    s = np.sin(0.5 * angle) / angle
    out[0] = np.cos(0.5 * angle)
    out[1] = axis_angle[0] * s
    out[2] = axis_angle[1] * s
    out[3] = axis_angle[2] * s
    return out


@njit(cache=True)
def _body_rate(q0, q1, dt):
    # vector part of 2 q0^-1 ∘ (q1 - q0)/dt; the q0^-1 ∘ q0 term has no vector part
    d = _qmul(_qconj(q0), q1)
    out = np.empty(3)
    out[0] = 2.0 * d[1] / dt
    out[1] = 2.0 * d[2] / dt
    out[2] = 2.0 * d[3] / dt
    return out


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=np.float64)


def as_vec3(v: Any, name: str = "vector") -> np.ndarray:
    """Coerce ``v`` to a finite float64 array of shape (3,)."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (3,):
        raise SvcError(f"{name} must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SvcError(f"{name} has non-finite components: {arr}")
    return arr


def as_quat(q: Any, name: str = "quaternion", tol: float = 1e-6) -> np.ndarray:
    arr = np.asarray(q, dtype=np.float64)
    if arr.shape != (4,):
        raise SvcError(f"{name} must have shape (4,), got {arr.shape}")
    n = np.linalg.norm(arr)
    if not np.isfinite(n) or abs(n - 1.0) > tol:
        raise SvcError(f"{name} is not a unit quaternion (norm={n})")
    return arr


def cross(a, b) -> np.ndarray:
    """Right-handed cross product ``a × b``."""
    return _cross(as_vec3(a, "a"), as_vec3(b, "b"))


def normalize_to(v, target_norm: float) -> np.ndarray:
    """Rescale ``v`` to L2 norm ``target_norm`` keeping its direction."""
    v = as_vec3(v)
    n = _norm3(v)
    if n == 0.0:
        raise SvcError("degenerate direction: cannot normalize a zero vector")
    return v * (target_norm / n)


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_mul(p, q) -> np.ndarray:
    return _qmul(np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64))


def quat_conj(q) -> np.ndarray:
    return _qconj(np.asarray(q, dtype=np.float64))


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise SvcError("cannot normalize a zero quaternion")
    return q / n


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = as_vec3(axis, "axis")
    n = np.linalg.norm(axis)
    if n == 0.0:
        return quat_identity()
    return _qexp(axis * (angle / n))


def quat_from_rotvec(rotvec) -> np.ndarray:
    return _qexp(as_vec3(rotvec, "rotvec"))


def quat_rotate(q, v) -> np.ndarray:
    """Rotate ``v`` by ``q`` (body → world for attitude quaternions)."""
    return _qrotate(np.asarray(q, dtype=np.float64), as_vec3(v))


def quat_from_two_vectors(u, v) -> np.ndarray:
    """Shortest-arc rotation taking the direction of ``u`` onto that of ``v``."""
    u = normalize_to(u, 1.0)
    v = normalize_to(v, 1.0)
    c = float(np.dot(u, v))
    axis = np.cross(u, v)
    s = np.linalg.norm(axis)
    if s < 1e-12:
        if c > 0:
            return quat_identity()
        # antiparallel: any axis orthogonal to u
        ortho = np.cross(u, [1.0, 0.0, 0.0])
        if np.linalg.norm(ortho) < 1e-6:
            ortho = np.cross(u, [0.0, 1.0, 0.0])
        return quat_from_axis_angle(ortho, np.pi)
    return quat_from_axis_angle(axis, np.arctan2(s, c))


def quat_derivative_body_rate(q_k, q_next, dt: float) -> np.ndarray:
    """Head-frame angular velocity between two consecutive attitude samples.

    The derivative is the forward difference ``(q_next - q_k) / dt`` and the
    rate is the vector part of ``2 q_k^-1 ∘ dq/dt``, which for body → world
    quaternions is the rate expressed in the body frame.
    """
    if dt <= 0:
        raise SvcError(f"dt must be positive, got {dt}")
    return _body_rate(as_quat(q_k, "q_k"), as_quat(q_next, "q_next"), float(dt))


@dataclass(frozen=True)
class TimeSeries:
    """Samples ``values[i]`` taken at strictly increasing times ``t[i]`` (s)."""

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        values = np.asarray(self.values)
        if t.ndim != 1:
            raise SvcError("timestamps must be one-dimensional")
        if len(values) != len(t):
            raise SvcError(f"{len(t)} timestamps but {len(values)} values")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            i = int(np.argmax(np.diff(t) <= 0)) + 1
            raise SvcError(f"timestamps must be strictly increasing (index {i})")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class ImuSample:
    t: float
    f: np.ndarray
    omega: np.ndarray


@dataclass
class ImuSeries:
    """Columnar IMU record: GIA ``f`` (m/s²) and angular velocity ``omega`` (rad/s)
    in the head frame, one row per timestamp."""

    t: np.ndarray
    f: np.ndarray
    omega: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64).reshape(-1)
        self.f = np.asarray(self.f, dtype=np.float64).reshape(-1, 3)
        self.omega = np.asarray(self.omega, dtype=np.float64).reshape(-1, 3)
        if not (len(self.t) == len(self.f) == len(self.omega)):
            raise SvcError("IMU columns have different lengths")
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise SvcError("IMU timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> ImuSample:
        return ImuSample(float(self.t[i]), self.f[i].copy(), self.omega[i].copy())

    @property
    def dt(self) -> float:
        if len(self.t) < 2:
            raise SvcError("need at least two samples to infer the sample period")
        return float(np.median(np.diff(self.t)))

    def slice_time(self, start: float, end: float) -> "ImuSeries":
        """Samples with ``start <= t <= end`` (small tolerance at both ends)."""
        eps = 1e-9
        mask = (self.t >= start - eps) & (self.t <= end + eps)
        return ImuSeries(self.t[mask], self.f[mask], self.omega[mask], dict(self.meta))
