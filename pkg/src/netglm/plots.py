"""Figure rendering for the report paths.

All figures are written straight to files (Agg backend); the CLI drops them
next to the delimited output so a run's directory is self-contained.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_roc_figure(curves: dict, path: str, title: str = "Cross-validated ROC") -> str:
    """Plot one or more ROC staircases; ``curves`` maps label -> (fpr, tpr) list."""
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    for label, pts in curves.items():
        arr = np.asarray(pts)
        ax.plot(arr[:, 0], arr[:, 1], label=label, lw=1.6)
    ax.plot([0, 1], [0, 1], ls="--", c="grey", lw=0.8)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_alpha_figure(alpha: np.ndarray, group: np.ndarray, path: str) -> str:
    """Scatter the fitted individual effects, grouped and color-banded by group."""
    alpha = np.asarray(alpha, dtype=float)
    group = np.asarray(group)
    labels = sorted(set(group.tolist()))
    fig, ax = plt.subplots(figsize=(max(6.0, 0.35 * len(labels)), 4.0))
    offset = 0
    ticks, tick_labels = [], []
    for k, label in enumerate(labels):
        vals = alpha[group == label]
        xs = offset + np.arange(vals.size)
        ax.scatter(xs, vals, s=4, alpha=0.6, color=f"C{k % 10}")
        ticks.append(offset + vals.size / 2)
        tick_labels.append(str(label))
        offset += vals.size
    ax.axhline(0.0, c="grey", lw=0.8)
    ax.set_xticks(ticks)
    ax.set_xticklabels(tick_labels, rotation=90, fontsize=7)
    ax.set_ylabel("fitted individual effect")
    ax.set_xlabel("group")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_scenario_figure(per_outer: list, path: str, title: str = "") -> str:
    """Per-outer-draw diagnostics for one simulation scenario.

    Left: distribution of within-draw coverage with the nominal level.
    Right: within-draw mean squared error and prediction error.
    """
    coverage = np.array([row["coverage"] for row in per_outer])
    mse = np.array([row["mse_beta2"] for row in per_outer])
    mspe = np.array([row["mspe"] for row in per_outer])
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    axes[0].hist(coverage, bins=min(20, max(5, coverage.size // 3)), color="C0", alpha=0.8)
    axes[0].axvline(0.95, color="C3", ls="--", lw=1.0, label="nominal")
    axes[0].set_xlabel("per-draw coverage")
    axes[0].set_ylabel("outer draws")
    axes[0].legend(fontsize=8)
    axes[1].boxplot(
        [mse * 100, mspe * 100], tick_labels=["MSE x100", "MSPE x100"], showfliers=True
    )
    axes[1].set_ylabel("error")
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
