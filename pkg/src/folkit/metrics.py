"""Scoring for NL-to-FOL translation systems.

Rates are computed per run and averaged over the k runs: correct means the
predicted label equals gold, incorrect means a real label (True, False,
Uncertain) different from gold, error means the prediction is Error.  The
three always sum to 100.

F1 treats Error as a predicted-only fourth class with zero gold support, so
erroring on a story costs recall of its gold class without owning any
support weight.  Weighted F1 and True-label F1 are computed per run and then
averaged, matching run-averaged rate reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .story import GOLD_LABELS, Label


@dataclass(frozen=True)
class RunPredictions:
    run_index: int
    labels: tuple[Label, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))


@dataclass
class MetricsReport:
    correct_pct: float
    incorrect_pct: float
    error_pct: float
    weighted_f1: float
    true_f1: float
    k: int
    n_stories: int
    buckets: dict[str, "MetricsReport"] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "correct_pct": self.correct_pct,
            "incorrect_pct": self.incorrect_pct,
            "error_pct": self.error_pct,
            "weighted_f1": self.weighted_f1,
            "true_f1": self.true_f1,
            "k": self.k,
            "n_stories": self.n_stories,
        }
        if self.buckets:
            out["buckets"] = {name: rep.to_dict() for name, rep in self.buckets.items()}
        return out


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def _run_scores(golds: Sequence[Label], preds: Sequence[Label]) -> tuple[float, float, float, float, float]:
    n = len(golds)
    correct = sum(1 for g, p in zip(golds, preds) if p == g)
    error = sum(1 for p in preds if p is Label.ERROR)
    incorrect = n - correct - error

    supports: dict[Label, int] = {}
    f1s: dict[Label, float] = {}
    for cls in GOLD_LABELS:
        tp = sum(1 for g, p in zip(golds, preds) if g == cls and p == cls)
        fp = sum(1 for g, p in zip(golds, preds) if g != cls and p == cls)
        fn = sum(1 for g, p in zip(golds, preds) if g == cls and p != cls)
        supports[cls] = tp + fn
        f1s[cls] = _f1(tp, fp, fn)
    total_support = sum(supports.values())
    weighted = (
        sum(supports[c] * f1s[c] for c in GOLD_LABELS) / total_support if total_support else 0.0
    )
    return (
        100.0 * correct / n,
        100.0 * incorrect / n,
        100.0 * error / n,
        weighted,
        f1s[Label.TRUE],
    )


def score(golds: Sequence[Label], runs: Sequence[RunPredictions]) -> MetricsReport:
    """Run-averaged rates and F1 scores for predictions against gold labels."""
    if not runs:
        raise ValueError("need at least one run")
    if not golds:
        raise ValueError("need at least one story")
    for g in golds:
        if g not in GOLD_LABELS:
            raise ValueError(f"gold labels must be True/False/Uncertain, got {g}")
    for run in runs:
        if len(run.labels) != len(golds):
            raise ValueError(
                f"run {run.run_index} has {len(run.labels)} predictions "
                f"for {len(golds)} stories"
            )
    per_run = [_run_scores(golds, run.labels) for run in runs]
    k = len(runs)
    means = [sum(values[i] for values in per_run) / k for i in range(5)]
    return MetricsReport(
        correct_pct=means[0],
        incorrect_pct=means[1],
        error_pct=means[2],
        weighted_f1=means[3],
        true_f1=means[4],
        k=k,
        n_stories=len(golds),
    )


_TIE_ORDER = (Label.UNCERTAIN, Label.FALSE, Label.TRUE)


def majority_vote(runs: Sequence[RunPredictions]) -> RunPredictions:
    """Collapse k runs into one prediction per story by modal non-Error label.

    Stories where every run errored predict Error.  Ties resolve in the fixed
    order Uncertain over False over True.
    """
    if not runs:
        raise ValueError("need at least one run")
    n = len(runs[0].labels)
    for run in runs:
        if len(run.labels) != n:
            raise ValueError("all runs must predict the same stories")
    voted: list[Label] = []
    for i in range(n):
        counts: dict[Label, int] = {}
        for run in runs:
            label = run.labels[i]
            if label is not Label.ERROR:
                counts[label] = counts.get(label, 0) + 1
        if not counts:
            voted.append(Label.ERROR)
            continue
        best = max(counts.values())
        winner = next(lab for lab in _TIE_ORDER if counts.get(lab) == best)
        voted.append(winner)
    return RunPredictions(run_index=0, labels=tuple(voted))


BUCKETS = (("small", 1, 2), ("medium", 3, 5), ("large", 6, None))


def bucket_name(premise_count: int) -> str:
    for name, low, high in BUCKETS:
        if premise_count >= low and (high is None or premise_count <= high):
            return name
    return "small"


def bucket_by_length(
    premise_counts: Sequence[int],
    golds: Sequence[Label],
    runs: Sequence[RunPredictions],
) -> dict[str, MetricsReport]:
    """Score each context-length bucket: small (1-2 premises), medium (3-5), large (>5)."""
    if len(premise_counts) != len(golds):
        raise ValueError("premise_counts must align with golds")
    indices: dict[str, list[int]] = {name: [] for name, _, _ in BUCKETS}
    for i, count in enumerate(premise_counts):
        indices[bucket_name(count)].append(i)
    out: dict[str, MetricsReport] = {}
    for name, _, _ in BUCKETS:
        idx = indices[name]
        if not idx:
            continue
        sub_golds = [golds[i] for i in idx]
        sub_runs = [
            RunPredictions(run.run_index, tuple(run.labels[i] for i in idx)) for run in runs
        ]
        out[name] = score(sub_golds, sub_runs)
    return out


def score_with_buckets(
    golds: Sequence[Label],
    runs: Sequence[RunPredictions],
    premise_counts: Sequence[int] | None = None,
) -> MetricsReport:
    report = score(golds, runs)
    if premise_counts is not None:
        report.buckets = bucket_by_length(premise_counts, golds, runs)
    return report


# ---------------------------------------------------------------------------
# Report formatting
# ---------------------------------------------------------------------------

_HEADER_NOTE = (
    "Error counts as a predicted-only class with zero gold support in the F1 scores."
)


def _row(label: str, rep: MetricsReport) -> str:
    return (
        f"{label:<12} {rep.correct_pct:>9.2f} {rep.incorrect_pct:>10.2f} "
        f"{rep.error_pct:>8.2f} {rep.weighted_f1 * 100:>12.2f} {rep.true_f1 * 100:>9.2f} "
        f"{rep.n_stories:>8}"
    )


def format_report(report: MetricsReport, title: str = "overall") -> str:
    """Render a report (and its buckets) as the standard results table."""
    lines = [
        f"# {_HEADER_NOTE}",
        f"# averaged over k={report.k} run(s)",
        f"{'':<12} {'Correct↑':>9} {'Incorrect':>10} {'Error↓':>8} {'Overall F1↑':>12} "
        f"{'True F1↑':>9} {'stories':>8}",
        _row(title, report),
    ]
    for name, _, _ in BUCKETS:
        if name in report.buckets:
            lines.append(_row(f"  {name}", report.buckets[name]))
    return "\n".join(lines)
