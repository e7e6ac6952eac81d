"""The full subjective-vertical-conflict loop, with and without the visual
vertical pathway.

Per step of length dt the inputs f, ω and vv_s are held constant. The
discrete gravity observer (complementary filter q, observer gravity g,
a = f - g) is advanced first. Then every continuous block is advanced
together with one RK4 step. Each derivative evaluation runs in this order:

1. sensors      f_s = f; canal filters → ω_s; sensed vertical v_s; a_s = f_s - v_s
2. internal     ω̂ and â from the exact solutions of their loops; internal
                canal → ω̂_s; f̂_s = ĝ + â; internal vertical v̂_s;
                Δv = v_s - v̂_s, Δvv = vv_s - T̂ ĝ; ĝ' = Kvvc Δvv + Kvc Δv
3. sickness     Hill(|Δv|) → double lag → MSI

The flat state vector (27 floats) is laid out as::

    [0:6]   canal filter states, axis-major (x1, x2)
    [6:9]   v_s
    [9:13]  q (attitude, body → world)
    [13:16] g (observer gravity, head frame)
    [16:19] internal canal washout states
    [19:22] v̂_s
    [22:25] ĝ
    [25:27] MSI lag states
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .core import GRAVITY, DivergenceError, ImuSeries, SvcError, _cross, _norm3
from .core import as_vec3, quat_from_two_vectors
from .internal import (
    CF_ALPHA,
    FREE_FALL,
    _cf_step,
    _g_hat_rate,
    _gravity_step,
    _solve_a_hat,
    _solve_omega_hat,
    _vv_hat,
)
from .msi import _hill
from .params import ParameterSet, preset

STATE_SIZE = 27
VARIANTS = ("svc", "svc-vv")
BLOCKS = ("", "vestibular", "gravity observer", "internal model", "msi")

# indices into ParameterSet.as_array()
_KA, _KW, _KWC, _KAC, _KVC, _KVVC, _TAU, _TAUA, _TAUD, _B, _TAUI, _P = range(12)


@dataclass(frozen=True)
class ModelConfig:
    """Numerical options that are not part of the published parameter table."""

    cf_alpha: float = CF_ALPHA  # gyro weight per step at ``cf_reference_dt``
    cf_reference_dt: float = 0.01
    free_fall: float = FREE_FALL  # m/s², skip tilt correction below this |f|
    ghat_init: str = "measured"  # or "zero"
    init_window: float = 1.0  # s of stationary data used for g(0)

    def __post_init__(self):
        if self.ghat_init not in ("measured", "zero"):
            raise SvcError("ghat_init must be 'measured' or 'zero'")
        if not 0.0 <= self.cf_alpha <= 1.0:
            raise SvcError("cf_alpha must lie in [0, 1]")

    def alpha_for(self, dt: float) -> float:
        # keep the correction rate per second independent of the sample rate
        return self.cf_alpha ** (dt / self.cf_reference_dt)


@dataclass
class ModelState:
    scc: np.ndarray
    v_s: np.ndarray
    q: np.ndarray
    g: np.ndarray
    scc_hat: np.ndarray
    v_hat_s: np.ndarray
    g_hat: np.ndarray
    msi: np.ndarray
    t: float = 0.0

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                np.reshape(self.scc, 6),
                self.v_s,
                self.q,
                self.g,
                self.scc_hat,
                self.v_hat_s,
                self.g_hat,
                self.msi,
            ]
        ).astype(np.float64)

    @classmethod
    def from_vector(cls, s: np.ndarray, t: float = 0.0) -> "ModelState":
        s = np.asarray(s, dtype=np.float64)
        return cls(
            scc=s[0:6].reshape(3, 2).copy(),
            v_s=s[6:9].copy(),
            q=s[9:13].copy(),
            g=s[13:16].copy(),
            scc_hat=s[16:19].copy(),
            v_hat_s=s[19:22].copy(),
            g_hat=s[22:25].copy(),
            msi=s[25:27].copy(),
            t=float(t),
        )


@dataclass(frozen=True)
class StepOutputs:
    msi: float
    d_v: np.ndarray
    d_vv: np.ndarray | None
    g: np.ndarray


# --------------------------------------------------------------------------
# kernel
# --------------------------------------------------------------------------


# physical states stay O(10); anything past this has already blown up
DIVERGED = 1e12


@njit(cache=True)
def _all_finite(x):
    for v in x.ravel():
        if not np.isfinite(v) or abs(v) > DIVERGED:
            return False
    return True


@njit(cache=True)
def _deriv(s, f, w, a, vv, use_vv, p, out_dv, out_dvv):
    """Time derivative of the continuous states (observer slots stay zero).

    Inputs are held over the step. ω̂ and â are the exact solutions of their
    algebraic loops at the current state. The conflicts are written to
    ``out_dv`` / ``out_dvv``.
    """
    ds = np.zeros(STATE_SIZE)
    a0 = 1.0 / (p[_TAUA] * p[_TAUD])
    a1 = (p[_TAUA] + p[_TAUD]) / (p[_TAUA] * p[_TAUD])
    tau = p[_TAU]

    # sensors: canals then the sensed vertical
    w_s = np.empty(3)
    for i in range(3):
        x1 = s[2 * i]
        x2 = s[2 * i + 1]
        ds[2 * i] = x2
        ds[2 * i + 1] = w[i] - a0 * x1 - a1 * x2
        w_s[i] = ds[2 * i + 1]
    v_s = s[6:9]
    ds[6:9] = (f - v_s) / tau - _cross(w_s, v_s)

    # internal models
    x_hat = s[16:19]
    v_hat = s[19:22]
    g_hat = s[22:25]
    w_hat = _solve_omega_hat(w, w_s, x_hat, p[_KW], p[_KWC])
    ds[16:19] = (w_hat - x_hat) / p[_TAUD]
    a_hat = _solve_a_hat(a, f - v_s, g_hat, v_hat, p[_KA], p[_KAC])
    ds[19:22] = (g_hat + a_hat - v_hat) / tau - _cross(w_hat - x_hat, v_hat)
    d_v = v_s - v_hat
    if use_vv:
        d_vv = vv - _vv_hat(g_hat)
    else:
        d_vv = np.zeros(3)
    ds[22:25] = _g_hat_rate(d_vv, d_v, p[_KVVC], p[_KVC], use_vv)

    # motion sickness double lag
    h = _hill(d_v, p[_B])
    ds[25] = (h - s[25]) / p[_TAUI]
    ds[26] = (s[25] - s[26]) / p[_TAUI]
    out_dv[:] = d_v
    out_dvv[:] = d_vv
    return ds


@njit(cache=True)
def _block_failed(s):
    if not (_all_finite(s[0:9])):
        return 1
    if not (_all_finite(s[9:16])):
        return 2
    if not (_all_finite(s[16:25])):
        return 3
    if not (_all_finite(s[25:27])):
        return 4
    return 0


@njit(cache=True)
def _step(s, f, w, vv, use_vv, p, dt, alpha, free_fall):
    """One model step. Returns (new_state, msi, d_v, d_vv, failed_block).

    ``d_v`` and ``d_vv`` are the conflicts at the start of the step; ``msi``
    is the value at its end.
    """
    # gravity observer: discrete filter, advanced first
    q0 = s[9:13]
    q1 = _cf_step(q0, w, f, dt, alpha, free_fall)
    g = _gravity_step(s[13:16], q0, q1, dt)
    a = f - g

    # every continuous block advanced together by RK4
    d_v = np.empty(3)
    d_vv = np.empty(3)
    tmp_v = np.empty(3)
    tmp_vv = np.empty(3)
    k1 = _deriv(s, f, w, a, vv, use_vv, p, d_v, d_vv)
    k2 = _deriv(s + 0.5 * dt * k1, f, w, a, vv, use_vv, p, tmp_v, tmp_vv)
    k3 = _deriv(s + 0.5 * dt * k2, f, w, a, vv, use_vv, p, tmp_v, tmp_vv)
    k4 = _deriv(s + dt * k3, f, w, a, vv, use_vv, p, tmp_v, tmp_vv)
    out = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out[9:13] = q1
    out[13:16] = g
    err = _block_failed(out)
    return out, p[_P] * out[26], d_v, d_vv, err


@njit(cache=True)
def _run(s0, f, w, vv, use_vv, p, dt, alpha, free_fall):
    n = f.shape[0]
    msi = np.empty(n)
    ndv = np.empty(n)
    ndvv = np.full(n, np.nan)
    g = np.empty((n, 3))
    s = s0.copy()
    for k in range(n):
        s, m, d_v, d_vv, err = _step(s, f[k], w[k], vv[k], use_vv, p, dt, alpha, free_fall)
        if err != 0:
            return s, msi, ndv, ndvv, g, err, k
        msi[k] = m
        ndv[k] = _norm3(d_v)
        if use_vv:
            ndvv[k] = _norm3(d_vv)
        g[k] = s[13:16]
    return s, msi, ndv, ndvv, g, 0, n


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------


def init_state(
    imu_prefix: ImuSeries, params: ParameterSet | None = None, config: ModelConfig = ModelConfig()
) -> ModelState:
    """Initial state from a stationary start.

    g(0) is the mean GIA over the first ``config.init_window`` seconds scaled
    to 9.81 m/s²; v_s, v̂_s and ĝ start at g(0) (ĝ at zero when
    ``ghat_init == "zero"``); the attitude is the tilt-only rotation taking
    g(0) onto world +z; every filter state starts at zero.
    """
    t = imu_prefix.t
    if len(t) < 2:
        raise SvcError("insufficient initialization window: fewer than two IMU samples")
    dt = imu_prefix.dt
    window = config.init_window
    if t[-1] - t[0] + dt < window - 1e-9:
        raise SvcError(
            f"insufficient initialization window: {t[-1] - t[0] + dt:.3f} s < {window} s"
        )
    mask = t < t[0] + window - 1e-9
    mean_f = imu_prefix.f[mask].mean(axis=0)
    n = np.linalg.norm(mean_f)
    if n == 0:
        raise SvcError("degenerate direction: mean GIA over the initialization window is zero")
    g0 = mean_f * (GRAVITY / n)
    q0 = quat_from_two_vectors(g0, [0.0, 0.0, 1.0])
    g_hat0 = g0.copy() if config.ghat_init == "measured" else np.zeros(3)
    return ModelState(
        scc=np.zeros((3, 2)),
        v_s=g0.copy(),
        q=q0,
        g=g0.copy(),
        scc_hat=np.zeros(3),
        v_hat_s=g0.copy(),
        g_hat=g_hat0,
        msi=np.zeros(2),
        t=float(t[0]),
    )


def step(
    state: ModelState,
    f,
    omega,
    vv_s=None,
    params: ParameterSet | None = None,
    dt: float = 0.01,
    config: ModelConfig = ModelConfig(),
) -> tuple[ModelState, StepOutputs]:
    """Advance the model by one sample. ``vv_s=None`` is allowed only when K_vvc = 0."""
    params = params or preset("svc")
    if dt <= 0:
        raise SvcError("dt must be positive")
    use_vv = vv_s is not None
    if not use_vv and params.K_vvc != 0.0:
        raise SvcError("visual vertical input is required when K_vvc != 0")
    vv = as_vec3(vv_s, "vv_s") if use_vv else np.zeros(3)
    s, msi, d_v, d_vv, err = _step(
        state.to_vector(),
        as_vec3(f, "f"),
        as_vec3(omega, "omega"),
        vv,
        use_vv,
        params.as_array(),
        float(dt),
        config.alpha_for(dt),
        config.free_fall,
    )
    if err:
        raise DivergenceError(f"numerical divergence in {BLOCKS[err]} at t={state.t + dt:.4f} s")
    new = ModelState.from_vector(s, state.t + dt)
    return new, StepOutputs(float(msi), d_v, d_vv if use_vv else None, new.g.copy())


@dataclass
class TrialResult:
    t: np.ndarray
    msi: np.ndarray
    norm_dv: np.ndarray
    norm_dvv: np.ndarray
    theta_vv: np.ndarray
    theta_g: np.ndarray
    g: np.ndarray
    variant: str
    params: ParameterSet
    final_state: ModelState | None = field(default=None, repr=False)

    @property
    def mean_msi(self) -> float:
        return float(np.mean(self.msi)) if len(self.msi) else 0.0

    @property
    def max_msi(self) -> float:
        return float(np.max(self.msi)) if len(self.msi) else 0.0

    def summary(self) -> dict:
        return {
            "variant": self.variant,
            "params_hash": self.params.digest(),
            "params": asdict(self.params),
            "n_samples": int(len(self.t)),
            "duration_s": float(self.t[-1] - self.t[0]) if len(self.t) > 1 else 0.0,
            "mean_msi": self.mean_msi,
            "max_msi": self.max_msi,
        }

    def to_csv(self, path: str | Path) -> None:
        cols = np.column_stack(
            [self.t, self.msi, self.norm_dv, self.norm_dvv, self.theta_vv, self.theta_g]
        )
        with open(path, "w", newline="") as fh:
            fh.write(f"# params_hash={self.params.digest()} variant={self.variant}\n")
            fh.write("t,msi,norm_dv,norm_dvv,theta_vv,theta_g\n")
            np.savetxt(fh, cols, delimiter=",", fmt="%.17g")


def load_trial_csv(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=np.float64).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def check_uniform(t: np.ndarray, name: str = "IMU") -> float:
    """Sample period of ``t``; raises if any step is off by more than half a sample."""
    if len(t) < 2:
        raise SvcError(f"{name} series needs at least two samples")
    d = np.diff(t)
    dt = float(np.median(d))
    bad = np.abs(d - dt) > 0.5 * dt
    if np.any(bad):
        i = int(np.argmax(bad)) + 1
        raise SvcError(f"timestamp misalignment in {name} at sample {i} (t={t[i]:.6f})")
    return dt


def run_trial(
    imu: ImuSeries,
    vv=None,
    params: ParameterSet | None = None,
    variant: str = "svc",
    config: ModelConfig = ModelConfig(),
) -> TrialResult:
    """Simulate a whole trial on a uniform IMU grid.

    ``vv`` is an (N, 3) array or a ``TimeSeries`` already resampled onto the
    IMU timestamps; it is required for ``variant="svc-vv"`` and ignored for
    ``"svc"``.
    """
    from .eval import theta_g as _theta

    if variant not in VARIANTS:
        raise SvcError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    params = params or preset(variant)
    dt = check_uniform(imu.t)
    use_vv = variant == "svc-vv"
    n = len(imu)
    if use_vv:
        if vv is None:
            raise SvcError("variant svc-vv requires a visual vertical series")
        if hasattr(vv, "values"):
            tv = np.asarray(vv.t, dtype=np.float64)
            if len(tv) != n or np.any(np.abs(tv - imu.t) > 0.5 * dt):
                raise SvcError("timestamp misalignment between IMU and visual vertical series")
            vv = vv.values
        vv_arr = np.ascontiguousarray(vv, dtype=np.float64).reshape(-1, 3)
        if len(vv_arr) != n:
            raise SvcError(f"visual vertical has {len(vv_arr)} samples, IMU has {n}")
        if not np.all(np.isfinite(vv_arr)):
            raise SvcError("visual vertical series contains non-finite values")
    else:
        vv_arr = np.zeros((n, 3))
    if not (np.all(np.isfinite(imu.f)) and np.all(np.isfinite(imu.omega))):
        raise SvcError("IMU series contains non-finite values")

    state0 = init_state(imu, params, config)
    s, msi, ndv, ndvv, g, err, k = _run(
        state0.to_vector(),
        np.ascontiguousarray(imu.f),
        np.ascontiguousarray(imu.omega),
        vv_arr,
        use_vv,
        params.as_array(),
        dt,
        config.alpha_for(dt),
        config.free_fall,
    )
    if err:
        raise DivergenceError(f"numerical divergence in {BLOCKS[err]} at t={imu.t[k]:.4f} s")
    theta_vv = _theta(vv_arr) if use_vv else np.full(n, np.nan)
    return TrialResult(
        t=imu.t.copy(),
        msi=msi,
        norm_dv=ndv,
        norm_dvv=ndvv,
        theta_vv=theta_vv,
        theta_g=_theta(g),
        g=g,
        variant=variant,
        params=params,
        final_state=ModelState.from_vector(s, float(imu.t[-1]) + dt),
    )
