import random
from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from folkit.metrics import (
    MetricsReport,
    RunPredictions,
    bucket_by_length,
    bucket_name,
    format_report,
    majority_vote,
    score,
    score_with_buckets,
)
from folkit.story import Label

T, F, U, E = Label.TRUE, Label.FALSE, Label.UNCERTAIN, Label.ERROR

GOLD = st.sampled_from([T, F, U])
PRED = st.sampled_from([T, F, U, E])


def run(labels, index=0):
    return RunPredictions(index, tuple(labels))


def test_perfect_run():
    golds = [T, F, U, T]
    report = score(golds, [run(golds)])
    assert report.correct_pct == 100.0
    assert report.incorrect_pct == 0.0
    assert report.error_pct == 0.0
    assert report.weighted_f1 == 1.0
    assert report.true_f1 == 1.0


def test_hand_derived_weighted_f1():
    # Per-class F1 against golds [T,T,F,U] and preds [T,F,F,U]:
    # True 2/3, False 2/3, Uncertain 1; support-weighted mean = 0.75.
    report = score([T, T, F, U], [run([T, F, F, U])])
    assert abs(report.weighted_f1 - 0.75) < 1e-9
    assert abs(report.true_f1 - 2 / 3) < 1e-9
    assert report.correct_pct == 75.0


def test_error_prediction_costs_recall_not_support():
    report = score([T, T], [run([T, E])])
    assert report.error_pct == 50.0
    assert report.incorrect_pct == 0.0
    # True: tp=1, fn=1 -> F1 = 2/3; weighted by full support.
    assert abs(report.weighted_f1 - 2 / 3) < 1e-9


def test_misaligned_lengths_rejected():
    with pytest.raises(ValueError):
        score([T, F], [run([T])])
    with pytest.raises(ValueError):
        score([T], [])
    with pytest.raises(ValueError):
        score([], [run([])])


def test_gold_error_rejected():
    with pytest.raises(ValueError):
        score([E], [run([T])])


@settings(max_examples=1000, deadline=None)
@given(st.data())
def test_rate_sum_identity(data):
    n = data.draw(st.integers(min_value=1, max_value=12))
    k = data.draw(st.integers(min_value=1, max_value=4))
    golds = data.draw(st.lists(GOLD, min_size=n, max_size=n))
    runs = [
        run(data.draw(st.lists(PRED, min_size=n, max_size=n)), index=i) for i in range(k)
    ]
    report = score(golds, runs)
    assert abs(report.correct_pct + report.incorrect_pct + report.error_pct - 100.0) < 0.01
    assert 0.0 <= report.weighted_f1 <= 1.0
    assert 0.0 <= report.true_f1 <= 1.0


def test_permutation_invariance():
    rng = random.Random(5)
    golds = [rng.choice([T, F, U]) for _ in range(30)]
    runs = [run([rng.choice([T, F, U, E]) for _ in golds], i) for i in range(3)]
    base = score(golds, runs)
    order = list(range(len(golds)))
    rng.shuffle(order)
    permuted_golds = [golds[i] for i in order]
    permuted_runs = [run([r.labels[i] for i in order], r.run_index) for r in runs]
    permuted = score(permuted_golds, permuted_runs)
    assert permuted.correct_pct == base.correct_pct
    assert permuted.weighted_f1 == pytest.approx(base.weighted_f1)
    assert permuted.true_f1 == pytest.approx(base.true_f1)


def test_majority_vote_strict_majority():
    voted = majority_vote([run([T]), run([T], 1), run([F], 2)])
    assert voted.labels == (T,)


def test_majority_vote_tie_order():
    assert majority_vote([run([T]), run([F], 1)]).labels == (F,)
    assert majority_vote([run([T]), run([F], 1), run([U], 2), run([U], 3),
                          run([T], 4), run([F], 5)]).labels == (U,)


def test_majority_vote_all_error():
    assert majority_vote([run([E]), run([E], 1)]).labels == (E,)


def test_majority_vote_ignores_error_minority():
    voted = majority_vote([run([E]), run([T], 1)])
    assert voted.labels == (T,)


def test_majority_vote_k1_identity():
    labels = (T, F, U, E)
    assert majority_vote([run(labels)]).labels == labels


def test_bucket_boundaries():
    assert bucket_name(1) == "small"
    assert bucket_name(2) == "small"
    assert bucket_name(3) == "medium"
    assert bucket_name(5) == "medium"
    assert bucket_name(6) == "large"
    assert bucket_name(40) == "large"


def test_bucket_by_length_scores_each_bucket():
    golds = [T, F, U, T, F, U]
    counts = [1, 2, 3, 5, 6, 9]
    runs = [run([T, F, U, F, F, U])]
    buckets = bucket_by_length(counts, golds, runs)
    assert set(buckets) == {"small", "medium", "large"}
    assert buckets["small"].n_stories == 2
    assert buckets["small"].correct_pct == 100.0
    assert buckets["medium"].n_stories == 2
    assert buckets["medium"].correct_pct == 50.0


def test_bucket_recombination_matches_global():
    rng = random.Random(11)
    golds = [rng.choice([T, F, U]) for _ in range(60)]
    counts = [rng.randint(1, 9) for _ in golds]
    runs = [run([rng.choice([T, F, U, E]) for _ in golds], i) for i in range(4)]
    report = score_with_buckets(golds, runs, counts)
    for rate in ("correct_pct", "incorrect_pct", "error_pct"):
        combined = sum(
            getattr(r, rate) * r.n_stories for r in report.buckets.values()
        ) / sum(r.n_stories for r in report.buckets.values())
        assert abs(combined - getattr(report, rate)) < 0.01, rate


def test_format_report_row_sums_to_100():
    report = MetricsReport(
        correct_pct=64.01, incorrect_pct=23.08, error_pct=12.91,
        weighted_f1=0.5989, true_f1=0.67, k=10, n_stories=204,
    )
    table = format_report(report)
    row = next(l for l in table.splitlines() if l.lstrip().startswith("overall"))
    cells = row.split()
    correct, incorrect, error = (Decimal(c) for c in cells[1:4])
    assert correct + incorrect + error == Decimal("100.00")
    assert cells[4] == "59.89"
    assert "predicted-only" in table


def test_report_to_dict_round_trip():
    golds = [T, F, U]
    report = score_with_buckets(golds, [run([T, F, E])], [1, 4, 7])
    payload = report.to_dict()
    assert payload["k"] == 1
    assert set(payload["buckets"]) == {"small", "medium", "large"}
