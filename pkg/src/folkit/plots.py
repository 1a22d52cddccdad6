"""Figure rendering for report paths.

Every figure goes to a file next to the structured output; nothing is shown
interactively, so the Agg backend is forced before pyplot loads.
"""

from __future__ import annotations

import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import BUCKETS, MetricsReport

_RATE_COLORS = {"correct": "#2a9d8f", "incorrect": "#e9c46a", "error": "#e76f51"}
_SPLIT_COLORS = {"corpus": "#577590", "sft": "#43aa8b", "pref": "#f3722c"}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    fig.savefig(tmp, format=path.suffix.lstrip(".") or "png", dpi=150, bbox_inches="tight")
    plt.close(fig)
    os.replace(tmp, path)
    return path


def save_rates_figure(report: MetricsReport, path: str | Path, title: str = "") -> Path:
    """Bar chart of the rate triple plus the two F1 scores."""
    fig, (ax_rates, ax_f1) = plt.subplots(1, 2, figsize=(8, 3.2))
    names = ["Correct", "Incorrect", "Error"]
    values = [report.correct_pct, report.incorrect_pct, report.error_pct]
    ax_rates.bar(names, values, color=list(_RATE_COLORS.values()))
    ax_rates.set_ylabel("% of stories")
    ax_rates.set_ylim(0, 100)
    for i, v in enumerate(values):
        ax_rates.text(i, v + 1, f"{v:.2f}", ha="center", fontsize=8)
    ax_rates.set_title(f"rates (k={report.k})")

    ax_f1.bar(
        ["Overall F1", "True F1"],
        [report.weighted_f1 * 100, report.true_f1 * 100],
        color=["#264653", "#2a9d8f"],
    )
    ax_f1.set_ylim(0, 100)
    ax_f1.set_title("F1 (%)")
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def save_bucket_figure(report: MetricsReport, path: str | Path, title: str = "") -> Path | None:
    """Grouped bars of the rate triple per context-length bucket."""
    names = [name for name, _, _ in BUCKETS if name in report.buckets]
    if not names:
        return None
    fig, ax = plt.subplots(figsize=(6, 3.2))
    width = 0.25
    for offset, rate in enumerate(("correct", "incorrect", "error")):
        values = [getattr(report.buckets[name], f"{rate}_pct") for name in names]
        positions = [i + (offset - 1) * width for i in range(len(names))]
        ax.bar(positions, values, width=width, label=rate, color=_RATE_COLORS[rate])
    supports = [report.buckets[name].n_stories for name in names]
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels([f"{n}\n(n={s})" for n, s in zip(names, supports)])
    ax.set_ylabel("% of stories")
    ax.set_ylim(0, 100)
    ax.legend(fontsize=8)
    ax.set_title(title or "rates by context length")
    return _save(fig, path)


def save_label_distribution_figure(stats: dict, path: str | Path, title: str = "") -> Path:
    """Grouped bars of per-label counts for the corpus/sft/pref splits.

    ``stats`` is the ``per_label`` mapping of a build's stats payload.
    """
    labels = [name for name in stats if name != "Total"]
    fig, ax = plt.subplots(figsize=(6, 3.2))
    width = 0.25
    for offset, split in enumerate(("corpus", "sft", "pref")):
        values = [stats[label].get(split, 0) for label in labels]
        positions = [i + (offset - 1) * width for i in range(len(labels))]
        ax.bar(positions, values, width=width, label=split, color=_SPLIT_COLORS[split])
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.set_ylabel("instances")
    ax.legend(fontsize=8)
    ax.set_title(title or "label distribution")
    return _save(fig, path)
