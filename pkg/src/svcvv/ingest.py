"""Reading, validating and aligning recorded trial data.

File formats (SI units throughout):

* IMU: comma-separated text, header ``t,fx,fy,fz,wx,wy,wz``.
* Frames: a directory of ``NNNNNN.png`` images plus ``index.txt`` whose
  records are ``frame_number,t_seconds`` (an optional ``frame,t`` header is
  allowed, ``#`` starts a comment).
* Visual vertical series: header ``t,theta_vv_deg,vv_x,vv_y,vv_z,quality_flag``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image

from .core import ImuSeries, SvcError, TimeSeries
from .vvp import VvSeries, zoh_resample

log = logging.getLogger(__name__)

IMU_COLUMNS = ("t", "fx", "fy", "fz", "wx", "wy", "wz")
VV_COLUMNS = ("t", "theta_vv_deg", "vv_x", "vv_y", "vv_z", "quality_flag")
INDEX_NAME = "index.txt"
IMU_RATE = 100.0
CAMERA_RATE = 30.0
CROP = (1000, 480)  # width, height


class IngestError(SvcError):
    pass


# --------------------------------------------------------------------------
# IMU
# --------------------------------------------------------------------------


def _read_table(path: Path, columns: tuple[str, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Rows of floats plus the line number of each row."""
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise IngestError(f"file not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError(f"{path}: empty file (expected header {','.join(columns)})")
        header = [h.strip() for h in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise IngestError(f"{path}: line 1: missing column(s) {', '.join(missing)}")
        pos = [header.index(c) for c in columns]
        rows, lines = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(row[i]) for i in pos])
            except ValueError:
                raise IngestError(f"{path}: line {lineno}: non-numeric value") from None
            lines.append(lineno)
    data = np.array(rows, dtype=np.float64).reshape(-1, len(columns))
    if not np.all(np.isfinite(data)):
        bad = int(np.argmax(~np.all(np.isfinite(data), axis=1)))
        raise IngestError(f"{path}: line {lines[bad]}: non-finite value")
    return data, np.array(lines, dtype=int)


def regrid(t: np.ndarray, period: float, strict: bool = True, lines=None, source: str = "IMU"):
    """Map near-uniform timestamps onto ``t0 + k·period``.

    Returns ``(grid_times, row_index)`` where ``row_index[k]`` is the input
    row held at grid slot k (zero-order hold across single missing samples).
    Raises on non-monotonic time, on gaps longer than two periods and, when
    ``strict``, on jitter larger than 10 % of the period.
    """
    lines = np.arange(2, len(t) + 2) if lines is None else lines
    if len(t) == 0:
        return np.empty(0), np.empty(0, dtype=int)
    d = np.diff(t)
    if np.any(d <= 0):
        i = int(np.argmax(d <= 0)) + 1
        what = "duplicated timestamp" if d[i - 1] == 0 else "non-monotonic time"
        raise IngestError(f"{source}: line {lines[i]}: {what} (t={t[i]!r})")
    if np.any(d > 2 * period + 1e-9):
        i = int(np.argmax(d > 2 * period + 1e-9)) + 1
        if strict:
            raise IngestError(
                f"{source}: line {lines[i]}: gap exceeds tolerance ({d[i - 1] * 1e3:.1f} ms > {2 * period * 1e3:.1f} ms)"
            )
        log.warning("%s: line %d: gap of %.1f ms filled by hold", source, lines[i], d[i - 1] * 1e3)
    slot = np.rint((t - t[0]) / period).astype(np.int64)
    jitter = np.abs(t - (t[0] + slot * period))
    if np.any(jitter > 0.1 * period + 1e-12):
        i = int(np.argmax(jitter > 0.1 * period + 1e-12))
        if strict:
            raise IngestError(f"{source}: line {lines[i]}: timestamp jitter exceeds 10% of the sample period")
        log.warning("%s: line %d: timestamp jitter above tolerance", source, lines[i])
    if np.any(np.diff(slot) <= 0):
        i = int(np.argmax(np.diff(slot) <= 0)) + 1
        raise IngestError(f"{source}: line {lines[i]}: two samples fall in the same grid slot")
    n = int(slot[-1]) + 1
    grid = t[0] + np.arange(n) * period
    row = np.searchsorted(slot, np.arange(n), side="right") - 1
    return grid, row


def load_imu(path: str | Path, rate: float = IMU_RATE, strict: bool = True) -> ImuSeries:
    path = Path(path)
    data, lines = _read_table(path, IMU_COLUMNS)
    grid, row = regrid(data[:, 0], 1.0 / rate, strict=strict, lines=lines, source=str(path))
    return ImuSeries(grid, data[row, 1:4], data[row, 4:7], {"source": str(path), "rate": rate})


def write_imu(imu: ImuSeries, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(IMU_COLUMNS) + "\n")
        np.savetxt(fh, np.column_stack([imu.t, imu.f, imu.omega]).reshape(-1, 7), delimiter=",", fmt="%.17g")


# --------------------------------------------------------------------------
# visual vertical series
# --------------------------------------------------------------------------


def write_vv_series(series: VvSeries, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(VV_COLUMNS) + "\n")
        cols = np.column_stack([series.t, series.theta, series.vv, series.quality]).reshape(-1, 6)
        np.savetxt(fh, cols, delimiter=",", fmt=["%.17g"] * 5 + ["%d"])


def load_vv_series(path: str | Path) -> VvSeries:
    path = Path(path)
    data, lines = _read_table(path, VV_COLUMNS)
    t = data[:, 0]
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        i = int(np.argmax(np.diff(t) <= 0)) + 1
        raise IngestError(f"{path}: line {lines[i]}: non-monotonic time")
    return VvSeries(t, data[:, 1], data[:, 2:5], data[:, 5].astype(int))


# --------------------------------------------------------------------------
# frames
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FrameRef:
    t: float
    path: Path
    dims: tuple[int, int]  # width, height


def frame_name(number: int) -> str:
    return f"{number:06d}.png"


def read_index(path: Path) -> list[tuple[int, float]]:
    if not path.is_file():
        raise IngestError(f"frame index not found: {path}")
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if lineno == 1 and parts[:2] == ["frame", "t"]:
                continue
            if len(parts) != 2:
                raise IngestError(f"{path}: line {lineno}: expected 'frame_number,t'")
            try:
                records.append((int(parts[0]), float(parts[1])))
            except ValueError:
                raise IngestError(f"{path}: line {lineno}: malformed record {line!r}") from None
    return records


def write_index(path: Path, records: list[tuple[int, float]]) -> None:
    with open(path, "w") as fh:
        fh.write("frame,t\n")
        for n, t in records:
            fh.write(f"{n},{t!r}\n")


def load_frames(
    directory: str | Path, expected_dims: tuple[int, int] | None = None, strict: bool = True
) -> list[FrameRef]:
    """Frame references in time order, checked against the index file.

    ``expected_dims`` is ``(width, height)``; in strict mode every frame must
    match it exactly, otherwise frames merely need to be at least that big.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestError(f"frame directory not found: {directory}")
    records = read_index(directory / INDEX_NAME)
    listed = {frame_name(n) for n, _ in records}
    present = {p.name for p in directory.glob("*.png")}
    missing = sorted(listed - present)
    if missing:
        raise IngestError(f"{directory}: index lists {len(listed)} frames, missing {missing[0]} (and {len(missing) - 1} more)")
    extra = sorted(present - listed)
    if extra and strict:
        raise IngestError(f"{directory}: {len(extra)} image(s) not in the index, e.g. {extra[0]}")
    refs = []
    prev_t = -np.inf
    for n, t in records:
        if t <= prev_t:
            raise IngestError(f"{directory / INDEX_NAME}: frame {n}: timestamps must increase")
        prev_t = t
        path = directory / frame_name(n)
        try:
            with Image.open(path) as im:
                dims = im.size
        except OSError as exc:
            raise IngestError(f"unreadable image {path}: {exc}") from None
        if expected_dims is not None:
            w, h = expected_dims
            if strict and dims != (w, h):
                raise IngestError(f"{path}: dimensions {dims[0]}x{dims[1]} differ from expected {w}x{h}")
            if dims[0] < w or dims[1] < h:
                raise IngestError(f"{path}: {dims[0]}x{dims[1]} is smaller than {w}x{h}")
        refs.append(FrameRef(t, path, dims))
    return refs


def read_frame(ref: FrameRef) -> np.ndarray:
    try:
        with Image.open(ref.path) as im:
            return np.asarray(im.convert("RGB"))
    except OSError as exc:
        raise IngestError(f"unreadable image {ref.path}: {exc}") from None


def iter_frames(refs: list[FrameRef], crop: tuple[int, int] | None = None) -> Iterator[np.ndarray]:
    for ref in refs:
        img = read_frame(ref)
        yield crop_center(img, crop) if crop else img


def write_frames(directory: str | Path, frames, times) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records = []
    for n, (img, t) in enumerate(zip(frames, times)):
        Image.fromarray(np.asarray(img, dtype=np.uint8)).save(directory / frame_name(n), compress_level=1)
        records.append((n, float(t)))
    write_index(directory / INDEX_NAME, records)


def crop_center(image: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Centre crop to ``target = (width, height)``."""
    w, h = target
    src_h, src_w = image.shape[:2]
    if src_w < w or src_h < h:
        raise IngestError(f"cannot crop {src_w}x{src_h} to {w}x{h}: source is smaller")
    x0 = (src_w - w) // 2
    y0 = (src_h - h) // 2
    return image[y0 : y0 + h, x0 : x0 + w]


# --------------------------------------------------------------------------
# synchronisation
# --------------------------------------------------------------------------


@dataclass
class AlignedTrial:
    imu: ImuSeries
    vv: TimeSeries | None  # visual vertical held onto ``imu.t``


def overlap(imu_t: np.ndarray, frame_t: np.ndarray, frame_period: float | None = None) -> tuple[float, float]:
    """Common time range; a frame is held for one period after its timestamp."""
    if len(imu_t) == 0 or len(frame_t) == 0:
        raise IngestError("no overlap: empty series")
    if frame_period is None:
        frame_period = float(np.median(np.diff(frame_t))) if len(frame_t) > 1 else 0.0
    start = max(imu_t[0], frame_t[0])
    end = min(imu_t[-1], frame_t[-1] + frame_period)
    if end < start:
        raise IngestError(
            f"no overlap between IMU [{imu_t[0]:.3f}, {imu_t[-1]:.3f}] s and frames [{frame_t[0]:.3f}, {frame_t[-1]:.3f}] s"
        )
    return float(start), float(end)


def synchronize(imu: ImuSeries, vv: TimeSeries | VvSeries) -> AlignedTrial:
    """Clip to the common range and hold the visual vertical onto the IMU grid."""
    if isinstance(vv, VvSeries):
        vv = vv.as_timeseries()
    start, end = overlap(imu.t, vv.t)
    clipped = imu.slice_time(start, end)
    # a frame only counts once the IMU grid reaches it
    clipped = clipped.slice_time(max(start, vv.t[0]), end)
    if len(clipped) == 0:
        raise IngestError("no IMU samples inside the overlap")
    return AlignedTrial(clipped, zoh_resample(vv, clipped.t))
