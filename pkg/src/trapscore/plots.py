"""Matplotlib figure rendering for the report path.

All figures are written as SVG with a fixed hash salt and no embedded
timestamp, so repeated runs on the same inputs produce byte-identical
files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

QUINTILE_COLORS = ("#2c7bb6", "#abd9e9", "#ffffbf", "#fdae61", "#d7191c")


def save_svg(fig, path: str | Path) -> None:
    plt.rcParams["svg.hashsalt"] = "trapscore"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def roc_figure(rocs, thresholds=None):
    """Per-fold ROC curves with the chance diagonal."""
    fig, ax = plt.subplots(figsize=(5.2, 5.0))
    for f, roc in enumerate(rocs):
        order = np.argsort(roc.fpr, kind="stable")
        ax.plot(roc.fpr[order], roc.tpr[order], lw=1.2, label=f"fold {f}")
    ax.plot([0, 1], [0, 1], ls="--", c="grey", lw=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title("cross-validated ROC by fold")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    return fig


def score_histogram_figure(scores, m: float):
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    scores = np.asarray(scores, dtype=float)
    ax.hist(scores, bins=20, range=(0.0, 1.0), color="#4575b4", edgecolor="white")
    ax.axvline(scores.mean(), color="#313695", ls="--", lw=1.2,
               label=f"mean = {scores.mean():.3f}")
    ax.set_xlabel(f"trap score (m = {m:g})")
    ax.set_ylabel("number of traps")
    ax.set_title("distribution of trap scores")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def score_map_figure(points, m: float):
    """Trap locations coloured by score quintile.

    ``points`` are (longitude, latitude, score) triples; traps without a
    score are drawn as grey crosses.
    """
    scored = [(lon, lat, s) for lon, lat, s in points if s is not None]
    unscored = [(lon, lat) for lon, lat, s in points if s is None]
    fig, ax = plt.subplots(figsize=(5.8, 5.4))
    if unscored:
        xs, ys = zip(*unscored)
        ax.scatter(xs, ys, marker="x", s=14, c="#bbbbbb", label="no score")
    if scored:
        xs, ys, ss = map(np.asarray, zip(*scored))
        edges = np.quantile(ss, [0.2, 0.4, 0.6, 0.8])
        bins = np.searchsorted(edges, ss, side="left")
        for q in range(5):
            mask = bins == q
            if mask.any():
                ax.scatter(
                    xs[mask], ys[mask], s=18, c=QUINTILE_COLORS[q],
                    edgecolors="black", linewidths=0.3, label=f"quintile {q + 1}",
                )
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.set_title(f"trap scores by location (m = {m:g})")
    ax.legend(fontsize=7, loc="best")
    fig.tight_layout()
    return fig


def adrf_figure(estimate, exposure: str, outcome_label: str = "score"):
    """Dose-response curve with a 95% pointwise band."""
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    ax.plot(estimate.grid, estimate.mu, c="#d62728", lw=1.6)
    if estimate.se is not None:
        lo = estimate.mu - 1.96 * estimate.se
        hi = estimate.mu + 1.96 * estimate.se
        ax.fill_between(estimate.grid, lo, hi, color="#2ca02c", alpha=0.25,
                        label="95% pointwise band")
        ax.legend(fontsize=8)
    ax.set_xlabel(exposure)
    ax.set_ylabel(f"estimated mean {outcome_label}")
    ax.set_title(f"dose-response of {outcome_label} on {exposure}")
    fig.tight_layout()
    return fig
