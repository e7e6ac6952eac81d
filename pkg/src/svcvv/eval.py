"""Evaluation maths: gravity direction angle, Pearson correlation, LAD/WAD
confusion matrices and the derived classification scores."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import SvcError


def theta_g(g) -> np.ndarray | float:
    """Angle (deg, in [0, 180)) of the head-plane projection of ``g``.

    Accepts a single vector or an (N, 3) array. Samples whose (x, y)
    projection is zero come back as NaN.
    """
    g = np.asarray(g, dtype=np.float64)
    single = g.ndim == 1
    g = g.reshape(-1, g.shape[-1])
    gx, gy = g[:, 0], g[:, 1]
    ang = np.degrees(np.arctan2(gy, gx))
    ang = np.where(ang < 0, ang + 180.0, ang)
    ang = np.where(ang >= 180.0, ang - 180.0, ang)
    ang = np.where((gx == 0) & (gy == 0), np.nan, ang)
    return float(ang[0]) if single else ang


def pearson(x, y) -> float:
    """Pearson correlation; pairs with a NaN on either side are dropped."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise SvcError(f"series lengths differ: {len(x)} vs {len(y)}")
    keep = np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    if len(x) < 2:
        raise SvcError("need at least two paired samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise SvcError("zero variance: correlation undefined for a constant series")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricReport:
    """Scores; ``None`` marks a metric whose denominator is zero."""

    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("accuracy", "precision", "recall", "f1")}


def confusion(misc_lad, misc_wad, msi_lad, msi_wad) -> ConfusionMatrix:
    """Positive means LAD < WAD; ties count as negative on both axes."""
    arrs = [np.asarray(a, dtype=np.float64).ravel() for a in (misc_lad, misc_wad, msi_lad, msi_wad)]
    if len({len(a) for a in arrs}) != 1:
        raise SvcError("all four summaries need one value per participant")
    true_pos = arrs[0] < arrs[1]
    pred_pos = arrs[2] < arrs[3]
    return ConfusionMatrix(
        tp=int(np.sum(true_pos & pred_pos)),
        fp=int(np.sum(~true_pos & pred_pos)),
        fn=int(np.sum(true_pos & ~pred_pos)),
        tn=int(np.sum(~true_pos & ~pred_pos)),
    )


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def metrics(cm: ConfusionMatrix) -> MetricReport:
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        # equal to 2PR/(P+R), but a single correctly rounded division
        f1 = 2 * cm.tp / (2 * cm.tp + cm.fp + cm.fn)
    return MetricReport(_ratio(cm.tp + cm.tn, cm.total), precision, recall, f1)


# --------------------------------------------------------------------------
# cohort summaries
# --------------------------------------------------------------------------

COHORT_COLUMNS = ("participant_id", "condition", "mean_misc", "max_misc", "mean_msi", "max_msi")
CONDITIONS = ("LAD", "WAD")


@dataclass
class Cohort:
    """Per-participant LAD/WAD summaries, aligned by ``ids``."""

    ids: list[str]
    misc: dict[str, dict[str, np.ndarray]]  # measure -> condition -> values
    msi: dict[str, dict[str, np.ndarray]]

    def __len__(self) -> int:
        return len(self.ids)

    def without_zero_misc(self) -> "Cohort":
        """Drop participants who reported MISC = 0 throughout both conditions."""
        zero = np.ones(len(self.ids), dtype=bool)
        for measure in ("mean", "max"):
            for cond in CONDITIONS:
                zero &= self.misc[measure][cond] == 0
        keep = ~zero
        return Cohort(
            [i for i, k in zip(self.ids, keep) if k],
            {m: {c: v[keep] for c, v in d.items()} for m, d in self.misc.items()},
            {m: {c: v[keep] for c, v in d.items()} for m, d in self.msi.items()},
        )

    def confusion(self, measure: str = "mean") -> ConfusionMatrix:
        if measure not in ("mean", "max"):
            raise SvcError("measure must be 'mean' or 'max'")
        return confusion(
            self.misc[measure]["LAD"],
            self.misc[measure]["WAD"],
            self.msi[measure]["LAD"],
            self.msi[measure]["WAD"],
        )


def load_cohort(path: str | Path) -> Cohort:
    path = Path(path)
    rows: dict[str, dict[str, list[float]]] = {}
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise SvcError(f"cohort summary not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != COHORT_COLUMNS:
            raise SvcError(f"{path}: line 1: expected header {','.join(COHORT_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(COHORT_COLUMNS):
                raise SvcError(f"{path}: line {lineno}: expected {len(COHORT_COLUMNS)} fields, got {len(row)}")
            pid, cond = row[0].strip(), row[1].strip().upper()
            if cond not in CONDITIONS:
                raise SvcError(f"{path}: line {lineno}: condition must be LAD or WAD, got {row[1]!r}")
            try:
                vals = [float(c) for c in row[2:]]
            except ValueError:
                raise SvcError(f"{path}: line {lineno}: non-numeric summary value") from None
            if not all(np.isfinite(vals)):
                raise SvcError(f"{path}: line {lineno}: non-finite summary value")
            per = rows.setdefault(pid, {})
            if cond in per:
                raise SvcError(f"{path}: line {lineno}: duplicate {cond} row for participant {pid}")
            per[cond] = vals
    ids = list(rows)
    for pid in ids:
        missing = set(CONDITIONS) - set(rows[pid])
        if missing:
            raise SvcError(f"{path}: participant {pid} has no {'/'.join(sorted(missing))} row")

    def col(j: int, cond: str) -> np.ndarray:
        return np.array([rows[p][cond][j] for p in ids])

    misc = {m: {c: col(j, c) for c in CONDITIONS} for m, j in (("mean", 0), ("max", 1))}
    msi = {m: {c: col(j, c) for c in CONDITIONS} for m, j in (("mean", 2), ("max", 3))}
    return Cohort(ids, misc, msi)


def write_cohort(path: str | Path, rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COHORT_COLUMNS)
        w.writerows(rows)


def _fmt(v: float | None) -> str:
    return "undefined" if v is None else f"{v:.4f}"


def format_report(cm: ConfusionMatrix, report: MetricReport, measure: str) -> str:
    lines = [
        f"Confusion matrix ({measure} MISC vs {measure} MSI, positive = LAD < WAD)",
        "",
        "                 true +    true -",
        f"  predicted +  {cm.tp:8d}  {cm.fp:8d}",
        f"  predicted -  {cm.fn:8d}  {cm.tn:8d}",
        "",
    ]
    for name, value in report.as_dict().items():
        lines.append(f"  {name:<10s} {_fmt(value)}")
    return "\n".join(lines) + "\n"


def write_report_csv(path: str | Path, cm: ConfusionMatrix, report: MetricReport, measure: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["measure", "tp", "fp", "fn", "tn", "accuracy", "precision", "recall", "f1"])
        vals = ["undefined" if v is None else repr(v) for v in report.as_dict().values()]
        w.writerow([measure, cm.tp, cm.fp, cm.fn, cm.tn, *vals])
