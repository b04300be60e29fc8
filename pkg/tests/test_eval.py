import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpguard.core import InvalidArgument
from mpguard.eval import ConfusionMatrix, accuracy, build_report, f1, score_events, score_pointwise
from mpguard.ingest import LabelIntervals

PRED = [1, 1, 0, 0, 1, 0, 0, 0, 1, 1]
TRUTH = [1, 0, 0, 0, 1, 1, 0, 0, 1, 1]


def test_hand_counted_fixture():
    cm = score_pointwise(PRED, LabelIntervals.from_per_step(TRUTH))
    assert cm == ConfusionMatrix(tp=4, fp=1, tn=4, fn=1)
    assert accuracy(cm) == 0.8
    assert f1(cm) == 0.8


def test_perfect_and_missing_predictions():
    truth = [0, 1, 1, 0, 1]
    cm = score_pointwise(truth, truth)
    assert cm.fp == cm.fn == 0
    assert accuracy(cm) == 1.0 and f1(cm) == 1.0
    cm = score_pointwise([0] * 8, [1, 1, 1, 1, 1, 0, 0, 0])
    assert cm.fn == 5 and cm.tp == 0


def test_degenerate_cases():
    assert f1(ConfusionMatrix(0, 0, 7, 0)) == 1.0
    assert accuracy(ConfusionMatrix(0, 0, 0, 0)) == 1.0
    with pytest.raises(InvalidArgument):
        score_pointwise([0, 1], [0, 1, 1])


counts = st.integers(0, 10_000)


@given(counts, counts, counts, counts)
def test_metrics_match_direct_formulas(tp, fp, tn, fn):
    cm = ConfusionMatrix(tp, fp, tn, fn)
    total = tp + fp + tn + fn
    assert accuracy(cm) == ((tp + tn) / total if total else 1.0)
    denom = 2 * tp + fp + fn
    assert f1(cm) == (2 * tp / denom if denom else 1.0)
    assert 0.0 <= accuracy(cm) <= 1.0 and 0.0 <= f1(cm) <= 1.0
    if fp == fn:
        assert f1(ConfusionMatrix(tp, fn, tn, fp)) == f1(cm)


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), max_size=300))
def test_pointwise_matches_streaming_recount(pairs):
    pred = [p for p, _ in pairs]
    truth = [t for _, t in pairs]
    tally = {"tp": 0, "fp": 0, "tn": 0, "fn": 0}
    for p, t in pairs:
        tally[("t" if p == t else "f") + ("p" if p else "n")] += 1
    cm = score_pointwise(pred, truth)
    assert (cm.tp, cm.fp, cm.tn, cm.fn) == (tally["tp"], tally["fp"], tally["tn"], tally["fn"])
    assert cm.total == len(pairs)


def test_events_examples():
    ivs = [(3, 9), (20, 25)]
    assert score_events(ivs, ivs)[:2] == (2, 2)
    assert score_events([(150, 160)], [(100, 200)])[:2] == (1, 1)
    total, hit, per_event = score_events([(210, 290)], [(100, 200), (300, 400)])
    assert (total, hit) == (2, 0)
    assert per_event == [((100, 200), False), ((300, 400), False)]
    assert score_events([(200, 200)], [(100, 200)])[1] == 1
    assert score_events([(10, 99), (201, 250)], [(100, 200)])[1] == 0


@given(st.lists(st.integers(0, 1), min_size=1, max_size=200), st.lists(st.integers(0, 1), min_size=1, max_size=200))
def test_event_hits_match_brute_force(a, b):
    n = min(len(a), len(b))
    pred, truth = np.array(a[:n]), LabelIntervals.from_per_step(b[:n])
    report = build_report(pred, truth)
    for (s, e), hit in report.per_event:
        assert hit == bool(pred[s:e + 1].any())
    assert report.events_hit <= report.events_total


def test_report_json_keys():
    report = build_report(PRED, LabelIntervals.from_per_step(TRUTH))
    data = json.loads(json.dumps(report.to_json()))
    assert set(data) == {"tp", "fp", "tn", "fn", "accuracy", "f1", "events_total", "events_hit", "per_event"}
    assert data["per_event"][0] == {"start": 0, "end": 0, "hit": True}
    assert data["events_total"] == 3 and data["events_hit"] == 3
