from __future__ import annotations

import json
import math
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import reference_match
from slidetrans.errors import SchemaError
from slidetrans.metrics import (
    EvalConfig,
    compute_metrics,
    evaluate_records,
    match_bidirectional,
    report_table,
)
from slidetrans.records import TransitionKind, TransitionRecord

FIXTURE = Path(__file__).parent / "data" / "results_table.json"


def rec(start: int, end: int) -> TransitionRecord:
    return TransitionRecord(TransitionKind.HARD, start, end)


# ---------------------------------------------------------------------------
# Matching


def test_identical_lists_match_completely() -> None:
    records = [rec(10, 11), rec(50, 55), rec(400, 401)]
    report = evaluate_records(records, list(records))
    assert (report.tp, report.fp, report.fn) == (3, 0, 0)
    assert report.precision == report.recall == report.f1 == 100.0


def test_empty_predictions() -> None:
    report = evaluate_records([], [rec(1, 2), rec(5, 6)])
    assert (report.tp, report.fp, report.fn) == (0, 0, 2)
    assert report.precision is None
    assert report.recall == 0.0
    assert report.f1 is None


def test_distance_example_within_radius() -> None:
    # dist((110,125), (100,120)) = sqrt(125) ~ 11.18 <= 20
    assert math.hypot(10, 5) == pytest.approx(math.sqrt(125))
    report = evaluate_records([rec(110, 125)], [rec(100, 120)])
    assert report.tp == 1


def test_radius_boundary_inclusive() -> None:
    pred, label = [rec(100, 120)], [rec(100, 100)]
    assert evaluate_records(pred, label, EvalConfig(20.0)).tp == 1
    assert evaluate_records(pred, label, EvalConfig(19.999)).tp == 0


def test_mutual_nearest_required() -> None:
    # Both predictions are nearest to the same label; only the mutual one
    # (the closer prediction) matches, the other counts as a false positive.
    preds = [rec(100, 100), rec(100, 104)]
    labels = [rec(100, 101)]
    result = match_bidirectional(preds, labels)
    assert result.pairs == ((0, 0),)


def test_tie_breaks_to_lower_index() -> None:
    preds = [rec(100, 100)]
    labels = [rec(98, 98), rec(102, 102)]  # equidistant from the prediction
    result = match_bidirectional(preds, labels)
    assert result.pairs == ((0, 0),)


def test_matching_is_injective() -> None:
    preds = [rec(100, 100), rec(100, 101), rec(100, 102)]
    labels = [rec(100, 100), rec(100, 103)]
    result = match_bidirectional(preds, labels)
    matched_preds = [i for i, _ in result.pairs]
    matched_labels = [j for _, j in result.pairs]
    assert len(matched_preds) == len(set(matched_preds))
    assert len(matched_labels) == len(set(matched_labels))


# Records require end >= start, so points are (start, start + length).
point = st.tuples(st.integers(0, 300), st.integers(0, 60)).map(
    lambda p: (p[0], p[0] + p[1])
)


@settings(max_examples=300, deadline=None)
@given(
    preds=st.lists(point, max_size=12),
    labels=st.lists(point, max_size=12),
    radius=st.sampled_from([0.0, 5.0, 20.0, 50.0]),
)
def test_matching_properties_vs_reference(preds, labels, radius) -> None:
    p_records = [rec(a, b) for a, b in preds]
    l_records = [rec(a, b) for a, b in labels]
    result = match_bidirectional(p_records, l_records, EvalConfig(radius))
    assert set(result.pairs) == reference_match(preds, labels, radius)
    assert result.tp <= min(len(preds), len(labels))
    # Permutation invariance.
    shuffled = list(reversed(p_records))
    again = match_bidirectional(shuffled, l_records, EvalConfig(radius))
    assert again.tp == result.tp
    # Radius monotonicity.
    wider = match_bidirectional(p_records, l_records, EvalConfig(radius + 10))
    assert wider.tp >= result.tp


# ---------------------------------------------------------------------------
# Metric arithmetic


def test_published_row_arithmetic() -> None:
    report = compute_metrics(tp=354, fp=54, fn=26)
    assert report.precision == pytest.approx(86.76, abs=0.01)
    assert report.recall == pytest.approx(93.16, abs=0.01)
    assert report.f1 == pytest.approx(89.85, abs=0.01)
    report = compute_metrics(tp=365, fp=627, fn=15)
    assert report.precision == pytest.approx(36.79, abs=0.01)
    assert report.recall == pytest.approx(96.05, abs=0.01)
    assert report.f1 == pytest.approx(53.21, abs=0.01)


def test_undefined_metrics_are_none_not_nan() -> None:
    report = compute_metrics(tp=0, fp=0, fn=5)
    assert report.precision is None
    assert report.recall == 0.0
    assert report.f1 is None
    both = compute_metrics(tp=0, fp=0, fn=0)
    assert both.precision is None and both.recall is None and both.f1 is None
    zero = compute_metrics(tp=0, fp=3, fn=3)
    assert zero.precision == 0.0 and zero.recall == 0.0 and zero.f1 is None


def test_negative_counts_rejected() -> None:
    with pytest.raises(SchemaError):
        compute_metrics(tp=-1, fp=0, fn=0)


def test_fixture_rows_reproduce_within_tolerance() -> None:
    table = json.loads(FIXTURE.read_text(encoding="utf-8"))
    assert len(table["rows"]) == 10
    for row in table["rows"]:
        report = compute_metrics(tp=row["tp"], fp=row["fp"], fn=row["fn"])
        assert report.precision == pytest.approx(row["precision"], abs=0.01), row["name"]
        assert report.recall == pytest.approx(row["recall"], abs=0.01), row["name"]
        assert report.f1 == pytest.approx(row["f1"], abs=0.01), row["name"]
        assert report.n_predicted == row["detected"]
        assert row["fn"] == table["labeled_total"] - row["tp"]


# ---------------------------------------------------------------------------
# Report table


def test_single_video_pooled_row_equals_it() -> None:
    report = compute_metrics(tp=3, fp=1, fn=2)
    text, summary = report_table([("vid_a", report)])
    assert summary["pooled"] == report.to_dict()
    assert "vid_a" in text and "pooled" in text


def test_micro_average_pools_counts() -> None:
    a = compute_metrics(tp=1, fp=0, fn=0)
    b = compute_metrics(tp=0, fp=1, fn=1)
    _, summary = report_table([("a", a), ("b", b)])
    pooled = summary["pooled"]
    assert (pooled["tp"], pooled["fp"], pooled["fn"]) == (1, 1, 1)
    assert pooled["precision"] == pytest.approx(50.0)
    assert pooled["recall"] == pytest.approx(50.0)
    assert pooled["f1"] == pytest.approx(50.0)


def test_undefined_shown_as_undef() -> None:
    text, _ = report_table([("empty", compute_metrics(tp=0, fp=0, fn=0))])
    assert "undef" in text
