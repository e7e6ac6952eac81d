"""Sensory organs: otoliths (OTO), semicircular canals (SCC) and the
otolith-canal interaction (LP).

All continuous dynamics are advanced with one classical RK4 step per call,
inputs held constant over the step.

Canal transfer function per axis::

    H(s) = τa τd s² / ((τa s + 1)(τd s + 1)) = s² / (s² + a1 s + a0)

realised in controllable canonical form with states (x1, x2)::

    x1' = x2
    x2' = -a0 x1 - a1 x2 + u
    y   = u - a0 x1 - a1 x2
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .core import _cross, as_vec3

TAU = 2.0
TAU_A = 190.0
TAU_D = 7.0


@njit(cache=True)
def _scc_deriv(x, u, a0, a1):
    dx = np.empty((3, 2))
    for i in range(3):
        dx[i, 0] = x[i, 1]
        dx[i, 1] = -a0 * x[i, 0] - a1 * x[i, 1] + u[i]
    return dx


@njit(cache=True)
def _scc_step(x, u, dt, tau_a, tau_d):
    a0 = 1.0 / (tau_a * tau_d)
    a1 = (tau_a + tau_d) / (tau_a * tau_d)
    k1 = _scc_deriv(x, u, a0, a1)
    k2 = _scc_deriv(x + 0.5 * dt * k1, u, a0, a1)
    k3 = _scc_deriv(x + 0.5 * dt * k2, u, a0, a1)
    k4 = _scc_deriv(x + dt * k3, u, a0, a1)
    xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    y = np.empty(3)
    for i in range(3):
        y[i] = u[i] - a0 * xn[i, 0] - a1 * xn[i, 1]
    return xn, y


@njit(cache=True)
def _lp_deriv(v, f, w, tau):
    return (f - v) / tau - _cross(w, v)


@njit(cache=True)
def _lp_step(v, f, w, dt, tau):
    k1 = _lp_deriv(v, f, w, tau)
    k2 = _lp_deriv(v + 0.5 * dt * k1, f, w, tau)
    k3 = _lp_deriv(v + 0.5 * dt * k2, f, w, tau)
    k4 = _lp_deriv(v + dt * k3, f, w, tau)
    return v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _scc_response(u, dt, tau_a, tau_d):
    n = u.shape[0]
    out = np.empty((n, 3))
    x = np.zeros((3, 2))
    for k in range(n):
        x, out[k] = _scc_step(x, u[k], dt, tau_a, tau_d)
    return out


@njit(cache=True)
def _lp_response(v0, f, w, dt, tau):
    n = f.shape[0]
    out = np.empty((n, 3))
    v = v0.copy()
    for k in range(n):
        v = _lp_step(v, f[k], w[k], dt, tau)
        out[k] = v
    return out


def scc_zero_state() -> np.ndarray:
    return np.zeros((3, 2))


def oto_sense(f) -> np.ndarray:
    """Sensed GIA. The otolith transform is the identity matrix."""
    return np.eye(3) @ as_vec3(f, "f")


def scc_step(state, omega, dt: float, tau_a: float = TAU_A, tau_d: float = TAU_D):
    """Advance the canal filters by ``dt``.

    Returns ``(new_state, omega_s)`` where ``omega_s`` is the sensed angular
    velocity at the end of the step.
    """
    state = np.asarray(state, dtype=np.float64).reshape(3, 2)
    return _scc_step(state, as_vec3(omega, "omega"), float(dt), float(tau_a), float(tau_d))


def lp_step(v_s, f_s, omega_s, dt: float, tau: float = TAU) -> np.ndarray:
    """One step of ``dv/dt = (f - v)/τ - ω × v`` (sensed vertical)."""
    return _lp_step(
        as_vec3(v_s, "v_s"), as_vec3(f_s, "f_s"), as_vec3(omega_s, "omega_s"), float(dt), float(tau)
    )


def sensed_acceleration(f_s, v_s) -> np.ndarray:
    return as_vec3(f_s, "f_s") - as_vec3(v_s, "v_s")


def scc_response(omega, dt: float, tau_a: float = TAU_A, tau_d: float = TAU_D) -> np.ndarray:
    """Canal output for an (N, 3) input series starting from rest."""
    omega = np.ascontiguousarray(omega, dtype=np.float64).reshape(-1, 3)
    return _scc_response(omega, float(dt), float(tau_a), float(tau_d))


def lp_response(v0, f_s, omega_s, dt: float, tau: float = TAU) -> np.ndarray:
    """Sensed-vertical trajectory for (N, 3) input series; row k is the state after step k."""
    f_s = np.ascontiguousarray(f_s, dtype=np.float64).reshape(-1, 3)
    omega_s = np.ascontiguousarray(omega_s, dtype=np.float64).reshape(-1, 3)
    return _lp_response(as_vec3(v0, "v0"), f_s, omega_s, float(dt), float(tau))
