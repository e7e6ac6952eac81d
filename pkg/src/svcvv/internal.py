"""Internal (central nervous system) models and the gravity observer.

Internal canal model per axis (washout)::

    ω̂_s = τd s / (τd s + 1) ω̂      state x:  x' = (ω̂ - x)/τd,  ω̂_s = ω̂ - x

The predicted angular velocity and predicted linear acceleration feed back
their own conflicts through blocks with direct feedthrough::

    ω̂ = Kω ω + Kωc (ω_s - ω̂_s),      ω̂_s = ω̂ - x
    â = Ka a + Kac (a_s - â_s),       â_s = ĝ + â - v̂_s

Both loops are linear in the unknown, so ``solve_omega_hat`` and
``solve_a_hat`` return the exact solution given the current block states.

The observer gravity ``g`` is propagated with the rate recovered from a
complementary-filter attitude and renormalised to 9.81 m/s² every step.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .core import GRAVITY, _body_rate, _cross, _norm3, _qexp, _qmul, _qnormalize, _qrotate
from .core import SvcError, as_quat, as_vec3
from .vestibular import _lp_step

CF_ALPHA = 0.98
FREE_FALL = 0.5


@njit(cache=True)
def _washout_step(x, u, dt, tau_d):
    # x' = (u - x)/τd is linear; RK4 with held u
    k1 = (u - x) / tau_d
    k2 = (u - (x + 0.5 * dt * k1)) / tau_d
    k3 = (u - (x + 0.5 * dt * k2)) / tau_d
    k4 = (u - (x + dt * k3)) / tau_d
    xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return xn, u - xn


@njit(cache=True)
def _solve_omega_hat(w, w_s, x_hat, k_w, k_wc):
    return (k_w * w + k_wc * (w_s + x_hat)) / (1.0 + k_wc)


@njit(cache=True)
def _solve_a_hat(a, a_s, g_hat, v_hat_s, k_a, k_ac):
    return (k_a * a + k_ac * (a_s - g_hat + v_hat_s)) / (1.0 + k_ac)


@njit(cache=True)
def _cf_step(q, w, f, dt, alpha, free_fall):
    q = _qnormalize(_qmul(q, _qexp(w * dt)))
    nf = _norm3(f)
    if nf < free_fall:
        return q
    up = _qrotate(q, f / nf)
    # tilt error: rotation about up × ẑ taking ``up`` onto world +z
    axis = np.empty(3)
    axis[0] = up[1]
    axis[1] = -up[0]
    axis[2] = 0.0
    s = _norm3(axis)
    if s < 1e-15:
        return q
    phi = np.arctan2(s, up[2])
    corr = _qexp(axis * ((1.0 - alpha) * phi / s))
    return _qnormalize(_qmul(corr, q))


@njit(cache=True)
def _g_deriv(g, w):
    return -_cross(w, g)


@njit(cache=True)
def _gravity_step(g, q0, q1, dt):
    w = _body_rate(q0, q1, dt)
    k1 = _g_deriv(g, w)
    k2 = _g_deriv(g + 0.5 * dt * k1, w)
    k3 = _g_deriv(g + 0.5 * dt * k2, w)
    k4 = _g_deriv(g + dt * k3, w)
    gn = g + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return gn * (GRAVITY / _norm3(gn))


@njit(cache=True)
def _g_hat_rate(d_vv, d_v, k_vvc, k_vc, use_vv):
    if use_vv:
        return k_vvc * d_vv + k_vc * d_v
    return k_vc * d_v


@njit(cache=True)
def _g_hat_step(g_hat, rate, dt):
    # dĝ/dt is constant over the step, so every RK4 stage equals ``rate``
    return g_hat + (dt / 6.0) * (rate + 2.0 * rate + 2.0 * rate + rate)


@njit(cache=True)
def _vv_hat(g_hat):
    out = np.empty(3)
    out[0] = g_hat[0]
    out[1] = g_hat[1]
    out[2] = 0.0
    return out


@njit(cache=True)
def _washout_response(u, dt, tau_d):
    n = u.shape[0]
    out = np.empty((n, 3))
    x = np.zeros(3)
    for k in range(n):
        x, out[k] = _washout_step(x, u[k], dt, tau_d)
    return out


@njit(cache=True)
def _observer_run(g0, q0, w, f, dt, alpha, free_fall):
    n = w.shape[0]
    g_out = np.empty((n, 3))
    q_out = np.empty((n, 4))
    g = g0.copy()
    q = q0.copy()
    for k in range(n):
        qn = _cf_step(q, w[k], f[k], dt, alpha, free_fall)
        g = _gravity_step(g, q, qn, dt)
        q = qn
        g_out[k] = g
        q_out[k] = q
    return g_out, q_out


def internal_scc_step(state, omega_hat, dt: float, tau_d: float = 7.0):
    """Advance the internal canal washout; returns ``(new_state, omega_hat_s)``."""
    return _washout_step(as_vec3(state, "state"), as_vec3(omega_hat, "omega_hat"), float(dt), float(tau_d))


def washout_response(u, dt: float, tau_d: float = 7.0) -> np.ndarray:
    u = np.ascontiguousarray(u, dtype=np.float64).reshape(-1, 3)
    return _washout_response(u, float(dt), float(tau_d))


def predicted_omega(omega, d_omega, K_omega: float = 0.1, K_omega_c: float = 10.0) -> np.ndarray:
    return K_omega * as_vec3(omega, "omega") + K_omega_c * as_vec3(d_omega, "d_omega")


def predicted_acceleration(a, d_a, K_a: float = 0.1, K_ac: float = 0.5) -> np.ndarray:
    return K_a * as_vec3(a, "a") + K_ac * as_vec3(d_a, "d_a")


def solve_omega_hat(omega, omega_s, scc_hat_state, K_omega=0.1, K_omega_c=10.0) -> np.ndarray:
    """ω̂ satisfying ``ω̂ = Kω ω + Kωc (ω_s - (ω̂ - x))`` for washout state ``x``."""
    return _solve_omega_hat(
        as_vec3(omega), as_vec3(omega_s), as_vec3(scc_hat_state), float(K_omega), float(K_omega_c)
    )


def solve_a_hat(a, a_s, g_hat, v_hat_s, K_a=0.1, K_ac=0.5) -> np.ndarray:
    """â satisfying ``â = Ka a + Kac (a_s - (ĝ + â - v̂_s))``."""
    return _solve_a_hat(
        as_vec3(a), as_vec3(a_s), as_vec3(g_hat), as_vec3(v_hat_s), float(K_a), float(K_ac)
    )


def complementary_filter_step(
    q, omega, f, dt: float, alpha: float = CF_ALPHA, free_fall: float = FREE_FALL
) -> np.ndarray:
    """Propagate attitude with the gyro, then pull the tilt toward the accelerometer.

    ``alpha`` is the fraction of the gyro estimate kept each step; the
    remaining ``1 - alpha`` of the tilt error is removed by rotating about the
    horizontal axis. Tilt correction is skipped when ``|f| < free_fall``.
    """
    if dt <= 0:
        raise SvcError("dt must be positive")
    if not 0.0 <= alpha <= 1.0:
        raise SvcError("alpha must lie in [0, 1]")
    return _cf_step(as_quat(q), as_vec3(omega, "omega"), as_vec3(f, "f"), float(dt), float(alpha), float(free_fall))


def gravity_observer_step(g, q_k, q_next, dt: float) -> np.ndarray:
    """Rotate ``g`` by the attitude change ``q_k → q_next`` and fix its norm to 9.81."""
    if dt <= 0:
        raise SvcError("dt must be positive")
    return _gravity_step(as_vec3(g, "g"), as_quat(q_k), as_quat(q_next), float(dt))


def run_observer(g0, q0, omega, f, dt: float, alpha: float = CF_ALPHA, free_fall: float = FREE_FALL):
    """Run filter + gravity observer over (N, 3) series; returns ``(g, q)`` after each step."""
    omega = np.ascontiguousarray(omega, dtype=np.float64).reshape(-1, 3)
    f = np.ascontiguousarray(f, dtype=np.float64).reshape(-1, 3)
    return _observer_run(as_vec3(g0), as_quat(q0), omega, f, float(dt), float(alpha), float(free_fall))


def internal_lp_step(v_hat_s, f_hat_s, omega_hat_s, dt: float, tau: float = 2.0) -> np.ndarray:
    """Internal copy of the otolith-canal interaction; same law as ``lp_step``."""
    return _lp_step(as_vec3(v_hat_s), as_vec3(f_hat_s), as_vec3(omega_hat_s), float(dt), float(tau))


def g_hat_step(g_hat, d_vv, d_v, dt: float, K_vvc: float = 2.5, K_vc: float = 2.5) -> np.ndarray:
    rate = _g_hat_rate(as_vec3(d_vv, "d_vv"), as_vec3(d_v, "d_v"), float(K_vvc), float(K_vc), True)
    return _g_hat_step(as_vec3(g_hat, "g_hat"), rate, float(dt))


def sensed_vv_hat(g_hat) -> np.ndarray:
    """Projection of ĝ onto the head x-y plane."""
    return np.diag([1.0, 1.0, 0.0]) @ as_vec3(g_hat, "g_hat")


def predicted_gia(g_hat, a_hat, v_hat_s):
    """Returns ``(f_hat, f_hat_s, a_hat_s)``; the internal otolith model is the identity."""
    f_hat = as_vec3(g_hat, "g_hat") + as_vec3(a_hat, "a_hat")
    f_hat_s = np.eye(3) @ f_hat
    return f_hat, f_hat_s, f_hat_s - as_vec3(v_hat_s, "v_hat_s")
