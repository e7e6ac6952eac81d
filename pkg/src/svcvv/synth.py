"""Synthetic inputs: slalom head-motion IMU tracks and rotated-stripe scenes.

Head frame (default ``up_axis="y"``): x to the right, y up, z backward, so
the vehicle drives along -z. Yaw is a rotation about +y and positive yaw
rate is a left turn. The head is rigidly mounted by default; a non-zero
``head_roll_gain`` rolls it about z in proportion to the lateral
acceleration, outward as a passive passenger's head does, which makes the
head-frame gravity direction move away from 90°.

Slalom pattern (an interpretation; the real course is only sketched): the
vehicle weaves past ``n_centers`` rotation centres spaced by one diameter,
driving a half circle around each, loops around the last one and weaves
back. Every lap holds as many left as right arcs. Consecutive arcs are
joined by a linear yaw-rate ramp (trapezoidal blending) lasting
``blend_time``. Speed changes only happen on straight segments and follow a
raised-cosine profile.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .core import GRAVITY, ImuSeries, SvcError

# (right, up, back) -> (forward, left, up)
_Z_UP = np.array([[0.0, 0.0, -1.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class SlalomSpec:
    rotation_diameter: float = 2.5  # m
    n_centers: int = 4
    max_speed: float = 6.0 / 3.6  # m/s
    max_accel: float = 1.7  # m/s²
    duration: float = 1200.0  # s
    dt: float = 0.01  # s
    lead_in: float = 2.0  # s at rest before and after driving
    blend_time: float = 0.5  # s, yaw-rate ramp between arcs
    speed_ramp_accel: float = 0.5  # fraction of max_accel used to speed up / slow down
    clamp_speed: bool = True  # lower arc speed when the centripetal limit binds
    head_roll_gain: float = 0.0  # rad of outward roll per m/s² of lateral acceleration
    gyro_noise: float = 0.0  # rad/s, white, per axis
    accel_noise: float = 0.0  # m/s², white, per axis
    gyro_bias: tuple[float, float, float] = (0.0, 0.0, 0.0)  # rad/s
    seed: int = 0
    up_axis: str = "y"

    def __post_init__(self):
        checks = [
            ("rotation_diameter", self.rotation_diameter > 0),
            ("max_speed", self.max_speed > 0),
            ("max_accel", self.max_accel > 0),
            ("duration", self.duration >= 0),
            ("dt", self.dt > 0),
            ("lead_in", self.lead_in >= 0),
            ("blend_time", self.blend_time > 0),
            ("speed_ramp_accel", 0 < self.speed_ramp_accel <= 1),
            ("gyro_noise", self.gyro_noise >= 0),
            ("accel_noise", self.accel_noise >= 0),
        ]
        for name, ok in checks:
            if not ok:
                raise SvcError(f"infeasible spec: {name}={getattr(self, name)!r} is out of range")
        if self.n_centers < 0 or int(self.n_centers) != self.n_centers:
            raise SvcError(f"infeasible spec: n_centers={self.n_centers!r} must be a non-negative integer")
        if self.up_axis not in ("y", "z"):
            raise SvcError("up_axis must be 'y' or 'z'")
        if len(self.gyro_bias) != 3:
            raise SvcError("gyro_bias needs three components")

    @property
    def radius(self) -> float:
        return self.rotation_diameter / 2.0

    def arc_speed(self) -> tuple[float, bool]:
        """Arc speed and whether the acceleration limit lowered it."""
        limit = float(np.sqrt(self.max_accel * self.radius))
        if self.max_speed <= limit:
            return self.max_speed, False
        if not self.clamp_speed:
            demand = self.max_speed**2 / self.radius
            raise SvcError(
                f"infeasible spec: centripetal acceleration {demand:.3f} m/s² on the arc exceeds "
                f"max_accel {self.max_accel} m/s²"
            )
        return limit, True

    @classmethod
    def from_dict(cls, doc: dict) -> "SlalomSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise SvcError(f"unknown slalom spec field(s): {', '.join(sorted(unknown))}")
        doc = dict(doc)
        if "gyro_bias" in doc:
            b = doc["gyro_bias"]
            doc["gyro_bias"] = tuple(float(x) for x in (b if np.ndim(b) else (b, b, b)))
        return cls(**doc)


@dataclass
class SlalomTrack:
    """Generated IMU plus the ground truth it was built from (head frame)."""

    imu: ImuSeries
    gravity: np.ndarray  # (N, 3) constructed gravity reaction, |g| = 9.81
    accel: np.ndarray  # (N, 3) linear acceleration
    speed: np.ndarray  # (N,) m/s
    yaw_rate: np.ndarray  # (N,) rad/s, left positive
    roll: np.ndarray  # (N,) rad, head roll about the backward axis
    position: np.ndarray  # (N, 2) planar path, m (forward, left)
    meta: dict = field(default_factory=dict)

    @property
    def theta_g(self) -> np.ndarray:
        """Head-plane gravity angle (deg); meaningful for ``up_axis='y'``."""
        from .eval import theta_g

        return theta_g(self.gravity)


def _raised_cosine(t, t0, T, v0, v1):
    """Speed and its derivative for a raised-cosine change from v0 to v1."""
    u = np.clip((t - t0) / T, 0.0, 1.0)
    inside = (t > t0) & (t < t0 + T)
    v = v0 + (v1 - v0) * 0.5 * (1.0 - np.cos(np.pi * u))
    dv = np.where(inside, (v1 - v0) * 0.5 * np.pi / T * np.sin(np.pi * u), 0.0)
    return v, dv


def _arc_boundaries(arc_start, arc_T, signs, blend):
    """Centres of the yaw-rate ramps between arcs.

    A ramp that reverses the turn direction costs each neighbouring arc a
    quarter blend of turning, so the arc is lengthened by ``blend/4`` at each
    such end and every arc still turns by exactly half a circle. The ramps
    at the start and end of the drive lie wholly inside their arc.
    """
    n = len(signs)
    b = [arc_start + 0.5 * blend]
    for j in range(n):
        zero_in = int(j > 0 and signs[j - 1] != signs[j])
        zero_out = int(j < n - 1 and signs[j + 1] != signs[j])
        b.append(b[-1] + arc_T + 0.25 * blend * (zero_in + zero_out))
    return np.array(b)


def _schedule(spec: SlalomSpec, v_arc: float):
    """Timing of the drive: (t_go, ramp_T, signs, boundaries, t_stop)."""
    ramp_T = v_arc * np.pi / (2.0 * spec.speed_ramp_accel * spec.max_accel)
    arc_T = np.pi * spec.radius / v_arc
    t_go = spec.lead_in
    arc_start = t_go + ramp_T
    # leave room for the stop and the trailing rest
    avail = spec.duration - spec.lead_in - arc_start - ramp_T
    if avail < spec.blend_time:
        raise SvcError(
            f"infeasible spec: duration {spec.duration} s is too short to start and stop "
            f"(needs at least {spec.duration - avail + spec.blend_time:.2f} s)"
        )
    lap = 2 * spec.n_centers
    n_arcs = int((avail - spec.blend_time) // (arc_T + 0.5 * spec.blend_time)) // lap * lap
    signs = _arc_signs(n_arcs, spec.n_centers)
    bounds = _arc_boundaries(arc_start, arc_T, signs, spec.blend_time)
    t_stop = bounds[-1] + 0.5 * spec.blend_time
    return t_go, ramp_T, signs, bounds, t_stop


def _arc_signs(n_arcs: int, n_centers: int) -> np.ndarray:
    """+1 left, -1 right, for whole laps.

    A lap weaves out past the centres with alternating half circles, loops
    around the last centre (two half circles in the same direction), weaves
    back and loops around the first one: ``+-+- -+-+`` for four centres.
    """
    if n_arcs == 0:
        return np.zeros(0)
    out = np.where(np.arange(n_centers) % 2 == 0, 1.0, -1.0)
    lap = np.concatenate([out, -out])
    return np.tile(lap, n_arcs // len(lap) + 1)[:n_arcs]


def _yaw_knots(bounds, omega, signs, blend):
    """Knots of the yaw-rate profile, one ramp centred on every arc boundary."""
    h = 0.5 * blend
    n = len(signs)
    kt, kw = [], []
    for j, tj in enumerate(bounds):
        kt += [tj - h, tj + h]
        kw += [signs[j - 1] * omega if j else 0.0, signs[j] * omega if j < n else 0.0]
    kt, kw = np.array(kt), np.array(kw)
    if np.any(np.diff(kt) <= 0):
        raise SvcError("infeasible spec: arcs are shorter than the yaw-rate blend time")
    return kt, kw


def _piecewise_linear(t, kt, kw):
    """Value and slope of the piecewise-linear profile through the knots."""
    val = np.interp(t, kt, kw)
    slopes = np.concatenate([[0.0], np.diff(kw) / np.diff(kt), [0.0]])
    idx = np.searchsorted(kt, t, side="right")
    return val, slopes[idx]


def gen_slalom_track(spec: SlalomSpec = SlalomSpec()) -> SlalomTrack:
    n = int(round(spec.duration / spec.dt))
    t = np.arange(n) * spec.dt
    meta = {"generator": "slalom", "spec": _spec_dict(spec), "up_axis": spec.up_axis}
    v_arc, clamped = spec.arc_speed() if spec.n_centers > 0 else (spec.max_speed, False)
    meta.update(arc_speed=v_arc, speed_clamped=clamped)

    if spec.n_centers == 0:
        # straight line at constant speed: no acceleration, no rotation
        v = np.full(n, v_arc)
        dv = np.zeros(n)
        psi_dot = np.zeros(n)
        psi_ddot = np.zeros(n)
        meta.update(n_arcs=0, n_left=0, n_right=0)
    elif n == 0:
        v = dv = psi_dot = psi_ddot = np.zeros(0)
        meta.update(n_arcs=0, n_left=0, n_right=0)
    else:
        t_go, ramp_T, signs, bounds, t_stop = _schedule(spec, v_arc)
        n_arcs = len(signs)
        if n_arcs == 0:
            raise SvcError("infeasible spec: duration leaves no room for one full lap")
        omega = v_arc / spec.radius
        kt, kw = _yaw_knots(bounds, omega, signs, spec.blend_time)
        psi_dot, psi_ddot = _piecewise_linear(t, kt, kw)
        v_up, dv_up = _raised_cosine(t, t_go, ramp_T, 0.0, v_arc)
        v_dn, dv_dn = _raised_cosine(t, t_stop, ramp_T, v_arc, 0.0)
        late = t >= t_stop
        v = np.where(late, v_dn, v_up)
        dv = np.where(late, dv_dn, dv_up)
        meta.update(
            n_arcs=n_arcs,
            n_left=int(np.sum(signs > 0)),
            n_right=int(np.sum(signs < 0)),
            arc_period=np.pi * spec.radius / v_arc,
            drive_start=t_go,
            drive_stop=t_stop + ramp_T,
        )

    # vehicle-frame kinematics (right, up, back)
    a_left = v * psi_dot
    a_v = np.column_stack([-a_left, np.zeros(n), -dv])
    g_v = np.tile([0.0, GRAVITY, 0.0], (n, 1))

    # passive head roll about the backward axis, away from the turn centre
    phi = -spec.head_roll_gain * a_left
    phi_dot = -spec.head_roll_gain * (dv * psi_dot + v * psi_ddot)
    c, s = np.cos(phi), np.sin(phi)

    def to_head(x):  # R_z(phi)^T x
        return np.column_stack([c * x[:, 0] + s * x[:, 1], -s * x[:, 0] + c * x[:, 1], x[:, 2]])

    accel = to_head(a_v)
    gravity = to_head(g_v)
    omega_h = to_head(np.column_stack([np.zeros(n), psi_dot, np.zeros(n)]))
    omega_h[:, 2] += phi_dot
    f = accel + gravity

    heading = np.concatenate([[0.0], np.cumsum(0.5 * (psi_dot[1:] + psi_dot[:-1]) * spec.dt)]) if n else np.zeros(0)
    vel = np.column_stack([v * np.cos(heading), v * np.sin(heading)])
    position = np.concatenate([np.zeros((1, 2)), np.cumsum(0.5 * (vel[1:] + vel[:-1]) * spec.dt, axis=0)]) if n else np.zeros((0, 2))

    if spec.up_axis == "z":
        f, accel, gravity, omega_h = (x @ _Z_UP.T for x in (f, accel, gravity, omega_h))

    rng = np.random.default_rng(spec.seed)
    f_meas = f + rng.normal(0.0, spec.accel_noise, f.shape) if spec.accel_noise > 0 else f
    w_meas = omega_h + np.asarray(spec.gyro_bias, dtype=np.float64)
    if spec.gyro_noise > 0:
        w_meas = w_meas + rng.normal(0.0, spec.gyro_noise, w_meas.shape)

    imu = ImuSeries(t, f_meas, w_meas, meta)
    return SlalomTrack(imu, gravity, accel, v, psi_dot, phi, position, meta)


def gen_slalom(spec: SlalomSpec = SlalomSpec()) -> ImuSeries:
    return gen_slalom_track(spec).imu


def gen_static(duration: float, dt: float = 0.01, **kwargs) -> SlalomTrack:
    """A stationary head: zero speed, no rotation, optional sensor errors."""
    spec = SlalomSpec(duration=duration, dt=dt, n_centers=0, max_speed=1e-12, **kwargs)
    track = gen_slalom_track(spec)
    track.meta["generator"] = "static"
    return track


def _spec_dict(spec) -> dict:
    out = {}
    for k in spec.__dataclass_fields__:
        v = getattr(spec, k)
        if callable(v) or isinstance(v, np.ndarray):
            continue
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


# --------------------------------------------------------------------------
# scenes
# --------------------------------------------------------------------------

ROLL_LIMIT = 55.0  # deg, keeps the true vertical inside the search window


@dataclass(frozen=True)
class SceneSpec:
    width: int = 1000
    height: int = 480
    fps: float = 30.0
    duration: float = 60.0  # s
    roll_offset: float = 0.0  # deg
    roll_amplitude: float = 0.0  # deg
    roll_frequency: float = 0.0  # Hz
    roll_series: tuple | None = None  # explicit per-frame roll (deg), overrides the sinusoid
    stripe_period: float = 40.0  # px
    contrast: float = 0.9
    noise: float = 0.0  # grey-level σ on a 0..1 scale
    seed: int = 0

    def __post_init__(self):
        if self.width < 3 or self.height < 3:
            raise SvcError("scene must be at least 3×3 pixels")
        if self.fps <= 0 or self.duration < 0 or self.stripe_period <= 2:
            raise SvcError("fps must be positive, duration non-negative and stripe_period > 2 px")

    @property
    def n_frames(self) -> int:
        if self.roll_series is not None:
            return len(self.roll_series)
        return int(round(self.duration * self.fps))

    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) / self.fps

    def roll(self) -> np.ndarray:
        if self.roll_series is not None:
            return np.asarray(self.roll_series, dtype=np.float64)
        t = self.times()
        return self.roll_offset + self.roll_amplitude * np.sin(2 * np.pi * self.roll_frequency * t)

    @classmethod
    def from_dict(cls, doc: dict) -> "SceneSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise SvcError(f"unknown scene spec field(s): {', '.join(sorted(unknown))}")
        doc = dict(doc)
        if doc.get("roll_series") is not None:
            doc["roll_series"] = tuple(float(x) for x in doc["roll_series"])
        return cls(**doc)


def render_stripes(width: int, height: int, roll_deg: float, period: float = 40.0,
                   contrast: float = 0.9, noise: float = 0.0, rng=None) -> np.ndarray:
    """uint8 RGB image of straight stripes whose lines lean counter-clockwise by ``roll_deg``."""
    phi = np.deg2rad(roll_deg)
    cols = (np.arange(width, dtype=np.float32) - (width - 1) / 2)[None, :]
    rows = (np.arange(height, dtype=np.float32) - (height - 1) / 2)[:, None]
    s = cols * np.float32(np.cos(phi)) - rows * np.float32(np.sin(phi))
    img = 0.5 + 0.5 * contrast * np.sin(s * np.float32(2 * np.pi / period))
    if noise > 0:
        rng = rng if rng is not None else np.random.default_rng()
        img = img + rng.normal(0.0, noise, img.shape).astype(np.float32)
    grey = np.clip(img * 255.0 + 0.5, 0, 255).astype(np.uint8)
    return np.repeat(grey[:, :, None], 3, axis=2)


class SceneSequence:
    """Lazily rendered frames with the analytic visual vertical."""

    def __init__(self, spec: SceneSpec):
        roll = spec.roll()
        if len(roll) and np.max(np.abs(roll)) > ROLL_LIMIT:
            worst = float(roll[np.argmax(np.abs(roll))])
            raise SvcError(f"roll {worst:.2f}° is outside ±{ROLL_LIMIT:g}° of upright")
        self.spec = spec
        self.roll = roll
        self.t = np.arange(len(roll)) / spec.fps
        self.theta_true = 90.0 + roll

    def __len__(self) -> int:
        return len(self.roll)

    def __getitem__(self, k: int) -> np.ndarray:
        sp = self.spec
        rng = np.random.default_rng([sp.seed, k]) if sp.noise > 0 else None
        return render_stripes(sp.width, sp.height, float(self.roll[k]), sp.stripe_period, sp.contrast, sp.noise, rng)

    def __iter__(self) -> Iterator[np.ndarray]:
        return (self[k] for k in range(len(self)))


def gen_scene_sequence(spec: SceneSpec = SceneSpec()) -> SceneSequence:
    return SceneSequence(spec)


def scene_from_roll(roll_deg, fps: float = 30.0, **kwargs) -> SceneSequence:
    """Scene that follows an explicit roll trajectory (deg per frame)."""
    return SceneSequence(SceneSpec(fps=fps, roll_series=tuple(float(r) for r in roll_deg), **kwargs))


def vv_from_gravity(gravity: np.ndarray) -> np.ndarray:
    """Visual vertical perfectly aligned with the head-plane gravity direction."""
    g = np.asarray(gravity, dtype=np.float64).reshape(-1, 3)
    planar = np.hypot(g[:, 0], g[:, 1])
    out = np.zeros_like(g)
    ok = planar > 0
    out[ok, 0] = g[ok, 0] / planar[ok] * GRAVITY
    out[ok, 1] = g[ok, 1] / planar[ok] * GRAVITY
    return out


def vv_constant(n: int, theta_deg: float = 90.0) -> np.ndarray:
    rad = np.deg2rad(theta_deg)
    return np.tile([GRAVITY * np.cos(rad), GRAVITY * np.sin(rad), 0.0], (n, 1))


__all__ = [
    "SlalomSpec",
    "SlalomTrack",
    "SceneSpec",
    "SceneSequence",
    "gen_slalom",
    "gen_slalom_track",
    "gen_static",
    "gen_scene_sequence",
    "scene_from_roll",
    "render_stripes",
    "vv_from_gravity",
    "vv_constant",
]
