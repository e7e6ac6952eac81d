"""Static figures: MSI time series, cohort bar summaries, confusion matrices."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .eval import CONDITIONS, Cohort, ConfusionMatrix  # noqa: E402


def msi_timeseries(results: dict, path: str | Path, title: str = "") -> None:
    """``results`` maps a label to a TrialResult; time axis in minutes."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for label, r in results.items():
        ax.plot((r.t - r.t[0]) / 60.0, r.msi, label=label, lw=1.2)
    ax.set_xlabel("time [min]")
    ax.set_ylabel("MSI [%]")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def angle_timeseries(t, theta_vv, theta_g, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 3.0))
    ax.plot(t, theta_g, lw=1.0, label=r"$\theta_g$")
    ax.plot(t, theta_vv, lw=1.0, label=r"$\theta_{vv}$")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("angle [deg]")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cohort_bars(cohort: Cohort, measure: str, path: str | Path) -> None:
    """Mean ± SD of MISC and MSI per condition."""
    fig, axes = plt.subplots(1, 2, figsize=(7, 3.2))
    for ax, (name, table) in zip(axes, (("MISC", cohort.misc), ("MSI [%]", cohort.msi))):
        vals = [table[measure][c] for c in CONDITIONS]
        means = [float(np.mean(v)) if len(v) else 0.0 for v in vals]
        sds = [float(np.std(v, ddof=1)) if len(v) > 1 else 0.0 for v in vals]
        ax.bar(CONDITIONS, means, yerr=sds, capsize=4, color=["#4c72b0", "#dd8452"])
        ax.set_title(f"{measure} {name}")
        ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def confusion_figure(cm: ConfusionMatrix, path: str | Path, title: str = "") -> None:
    grid = np.array([[cm.tp, cm.fp], [cm.fn, cm.tn]])
    fig, ax = plt.subplots(figsize=(3.6, 3.2))
    ax.imshow(grid, cmap="Blues")
    for (i, j), v in np.ndenumerate(grid):
        ax.text(j, i, str(v), ha="center", va="center", fontsize=14)
    ax.set_xticks([0, 1], ["true +", "true -"])
    ax.set_yticks([0, 1], ["pred +", "pred -"])
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
