"""Motion sickness incidence from the vertical conflict.

MSI = P / (τ_I s + 1)² · h,   h = (|Δv|/b) / (1 + |Δv|/b)

The double lag is two identical first-order lags in cascade, so the state is
``[x1, x2]`` and MSI = P·x2.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .core import SvcError, _norm3, as_vec3

B = 0.5
TAU_I = 720.0
P = 85.0


@njit(cache=True)
def _hill(dv, b):
    x = _norm3(dv) / b
    return x / (1.0 + x)


@njit(cache=True)
def _msi_deriv(x, h, tau_i):
    dx = np.empty(2)
    dx[0] = (h - x[0]) / tau_i
    dx[1] = (x[0] - x[1]) / tau_i
    return dx


@njit(cache=True)
def _msi_step(x, h, dt, tau_i, p):
    k1 = _msi_deriv(x, h, tau_i)
    k2 = _msi_deriv(x + 0.5 * dt * k1, h, tau_i)
    k3 = _msi_deriv(x + 0.5 * dt * k2, h, tau_i)
    k4 = _msi_deriv(x + dt * k3, h, tau_i)
    xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return xn, p * xn[1]


@njit(cache=True)
def _msi_response(h, dt, tau_i, p):
    n = h.shape[0]
    out = np.empty(n)
    x = np.zeros(2)
    for k in range(n):
        x, out[k] = _msi_step(x, h[k], dt, tau_i, p)
    return out


def hill(d_v, b: float = B) -> float:
    """Hill normalisation of the conflict, in [0, 1).

    ``d_v`` is either the conflict vector or its (non-negative) magnitude.
    """
    if b <= 0:
        raise SvcError("b must be positive")
    if np.ndim(d_v) == 0:
        mag = float(d_v)
        if not mag >= 0:
            raise SvcError("conflict magnitude must be non-negative")
        x = mag / b
        return x / (1.0 + x)
    return float(_hill(as_vec3(d_v, "d_v"), float(b)))


def msi_step(state, hill_value: float, dt: float, tau_I: float = TAU_I, P: float = P):
    """Advance the double lag by ``dt``; returns ``(new_state, msi_percent)``."""
    state = np.asarray(state, dtype=np.float64).reshape(2)
    xn, msi = _msi_step(state, float(hill_value), float(dt), float(tau_I), float(P))
    return xn, float(msi)


def msi_response(hill_values, dt: float, tau_I: float = TAU_I, P: float = P) -> np.ndarray:
    """MSI (%) after each step for a series of Hill values, starting from zero."""
    h = np.ascontiguousarray(hill_values, dtype=np.float64).reshape(-1)
    return _msi_response(h, float(dt), float(tau_I), float(P))
