"""Visual vertical estimation from camera frames.

Per frame: luma grey-scale, min-max normalisation, 3×3 Sobel gradients,
edge angle folded to [0°, 180°), magnitude-weighted 1° histogram, the three
strongest bins within [30°, 150°] blended by weight, then a two-branch
exponential smoother against the previous estimate. The resulting angle is
turned into a 9.81 m/s² vector in the head x-y plane and zero-order held
onto the IMU clock.

Image coordinates: column index grows to the right and row index grows
downward. ``gx`` differentiates along columns and ``gy`` along rows, and the
edge angle is ``atan2(gx, gy)``. With this choice vertical structures give
90°, and an image whose vertical structures lean counter-clockwise by φ
gives 90° + φ, the same angle as the head-frame gravity
``(9.81 cos θ, 9.81 sin θ, 0)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import GRAVITY, SvcError, TimeSeries

THETA0 = 90.0
WINDOW = (30, 150)
LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


class NoContrastError(SvcError):
    """The frame has a single grey level; the previous estimate must be held."""


@dataclass(frozen=True)
class GradientField:
    gx: np.ndarray
    gy: np.ndarray
    magnitude: np.ndarray  # min-max normalised to [0, 1]
    angle: np.ndarray  # degrees in [0, 180)


@dataclass(frozen=True)
class VvEstimate:
    theta_vv: float
    vv: np.ndarray
    frame_time: float
    quality: int = 0  # 1 when the frame had no contrast and the estimate was held


def to_gray_normalized(image: np.ndarray) -> np.ndarray:
    """Grey level in [0, 1] from an H×W×3 RGB image (or an H×W grey image)."""
    img = np.asarray(image)
    if img.ndim == 3:
        if img.shape[2] != 3:
            raise SvcError(f"expected 3 colour channels, got {img.shape[2]}")
        gray = img.astype(np.float32, copy=False) @ LUMA
    elif img.ndim == 2:
        gray = img.astype(np.float32)
    else:
        raise SvcError(f"expected an H×W×3 image, got shape {img.shape}")
    if gray.shape[0] < 3 or gray.shape[1] < 3:
        raise SvcError(f"image too small for 3×3 gradients: {gray.shape}")
    lo = gray.min()
    hi = gray.max()
    if hi <= lo:
        raise NoContrastError("no contrast: constant image")
    return (gray - lo) / (hi - lo)


def sobel_gradients(gray: np.ndarray) -> GradientField:
    p = np.pad(gray, 1, mode="edge")
    tl, tc, tr = p[:-2, :-2], p[:-2, 1:-1], p[:-2, 2:]
    ml, mr = p[1:-1, :-2], p[1:-1, 2:]
    bl, bc, br = p[2:, :-2], p[2:, 1:-1], p[2:, 2:]
    gx = (tr - tl) + 2 * (mr - ml) + (br - bl)
    gy = (bl - tl) + 2 * (bc - tc) + (br - tr)

    mag = np.sqrt(gx * gx + gy * gy)
    angle = np.arctan2(gx, gy)
    angle *= np.float32(180.0 / np.pi) if angle.dtype == np.float32 else 180.0 / np.pi
    # (-180, 180] -> [0, 360) -> [0, 180)
    angle[angle < 0] += 360
    angle[angle >= 180] -= 180
    angle[angle >= 180] = 0  # 360° wraps to 0
    angle[mag == 0] = 0

    lo = mag.min()
    hi = mag.max()
    mag = (mag - lo) / (hi - lo) if hi > lo else np.zeros_like(mag)
    return GradientField(gx, gy, mag, angle)


def weighted_angle_histogram(field: GradientField) -> np.ndarray:
    """180 one-degree bins; bin d sums the magnitudes with floor(angle) == d."""
    bins = field.angle.astype(np.intp).ravel()
    bins[(bins < 0) | (bins >= 180)] = 0
    return np.bincount(bins, weights=field.magnitude.ravel().astype(np.float64), minlength=180)


def best3(hist: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Angles and counts of the three largest bins inside the search window.

    Ascending stable order by count with bin index as the secondary key, so
    among equal counts the larger angle is preferred.
    """
    lo, hi = WINDOW
    counts = np.asarray(hist, dtype=np.float64)[lo : hi + 1]
    angles = np.arange(lo, hi + 1)
    order = np.lexsort((angles, counts))
    top = order[-3:]
    return angles[top], counts[top]


def smooth_theta(raw: float, theta_prev: float) -> float:
    if abs(raw - theta_prev) <= 4.0:
        return 0.7 * raw + 0.3 * theta_prev
    return 0.2 * raw + 0.8 * theta_prev


def compute_theta_vv(hist: np.ndarray, theta_prev: float = THETA0) -> float:
    hist = np.asarray(hist, dtype=np.float64)
    if hist.shape != (180,):
        raise SvcError(f"histogram must have 180 bins, got {hist.shape}")
    angles, counts = best3(hist)
    total = counts.sum()
    if total <= 0:
        return float(theta_prev)
    raw = float(angles @ (counts / total))
    return smooth_theta(raw, theta_prev)


def theta_to_vv(theta_vv: float) -> np.ndarray:
    rad = np.deg2rad(theta_vv)
    return np.array([GRAVITY * np.cos(rad), GRAVITY * np.sin(rad), 0.0])


def sense_vv(vv, t_vis: np.ndarray | None = None) -> np.ndarray:
    """Sensed visual vertical; the transform defaults to the identity."""
    t_vis = np.eye(3) if t_vis is None else np.asarray(t_vis, dtype=np.float64)
    return t_vis @ np.asarray(vv, dtype=np.float64)


def frame_histogram(image: np.ndarray) -> np.ndarray:
    return weighted_angle_histogram(sobel_gradients(to_gray_normalized(image)))


class VisualVerticalEstimator:
    """Stateful per-trial estimator; feed frames in time order."""

    def __init__(self, theta0: float = THETA0):
        self.theta = float(theta0)

    def update(self, image: np.ndarray, t: float = 0.0) -> VvEstimate:
        try:
            hist = frame_histogram(image)
        except NoContrastError:
            return VvEstimate(self.theta, theta_to_vv(self.theta), float(t), quality=1)
        self.theta = compute_theta_vv(hist, self.theta)
        return VvEstimate(self.theta, theta_to_vv(self.theta), float(t))


@dataclass
class VvSeries:
    """Per-frame estimates: angle (deg), vector (m/s²) and quality flag."""

    t: np.ndarray
    theta: np.ndarray
    vv: np.ndarray
    quality: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def as_timeseries(self) -> TimeSeries:
        return TimeSeries(self.t, self.vv)


def estimate_sequence(frames: Iterable[np.ndarray], times, theta0: float = THETA0) -> VvSeries:
    times = np.asarray(times, dtype=np.float64)
    est = VisualVerticalEstimator(theta0)
    out = [est.update(img, t) for img, t in zip(frames, times)]
    if len(out) != len(times):
        raise SvcError(f"{len(times)} timestamps but {len(out)} frames")
    return VvSeries(
        t=times.copy(),
        theta=np.array([e.theta_vv for e in out]),
        vv=np.array([sense_vv(e.vv) for e in out]).reshape(-1, 3),
        quality=np.array([e.quality for e in out], dtype=int),
    )


def zoh_resample(series: TimeSeries, target_times) -> TimeSeries:
    """Hold the most recent sample at or before each target time."""
    target = np.asarray(target_times, dtype=np.float64)
    src_t = np.asarray(series.t, dtype=np.float64)
    if len(src_t) == 0:
        raise SvcError("no sample to hold: empty source series")
    # tolerance absorbs float noise when grid times coincide with frame times
    idx = np.searchsorted(src_t, target + 1e-9, side="right") - 1
    if np.any(idx < 0):
        first = float(target[np.argmax(idx < 0)])
        raise SvcError(f"no sample to hold at t={first:.6f} (first frame at {src_t[0]:.6f})")
    return TimeSeries(target, np.asarray(series.values)[idx])
