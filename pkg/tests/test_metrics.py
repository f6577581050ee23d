import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from valleyforge.errors import LengthMismatch, SingleClass
from valleyforge.metrics import (
    ConfusionCounts,
    auc,
    classification_scores,
    confusion,
    evaluate_heads,
    format_report,
    roc_points,
    roc_table,
    write_roc_csv,
)


def pairwise_auc(scores, labels):
    """Brute-force P(score_pos > score_neg) + 0.5 P(tie)."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def test_confusion_counts():
    assert confusion([0.9, 0.1], [1, 0]) == ConfusionCounts(tp=1, fp=0, tn=1, fn=0)
    assert confusion([0.5], [1]).tp == 1
    assert confusion([0.9] * 4, [0] * 4).fp == 4
    with pytest.raises(LengthMismatch):
        confusion([0.1, 0.2], [1])


def test_classification_scores_arithmetic():
    m = classification_scores(ConfusionCounts(tp=2, fp=1, tn=6, fn=1))
    assert m["precision"] == pytest.approx(2 / 3, abs=1e-15)
    assert m["recall"] == pytest.approx(2 / 3, abs=1e-15)
    assert m["f1"] == pytest.approx(2 / 3, abs=1e-15)
    assert m["accuracy"] == pytest.approx(0.8, abs=1e-15)
    perfect = classification_scores(ConfusionCounts(tp=3, fp=0, tn=2, fn=0))
    assert all(v == 1.0 for v in perfect.values())
    none = classification_scores(ConfusionCounts(tp=0, fp=0, tn=3, fn=2))
    assert none["precision"] == 0.0 and none["recall"] == 0.0 and none["f1"] == 0.0


def test_auc_fixed_instance():
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_auc_perfect_and_single_class():
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    with pytest.raises(SingleClass):
        auc([0.1, 0.2], [1, 1])


def test_auc_random_scores_near_half():
    rng = np.random.default_rng(3)
    assert abs(auc(rng.random(1000), rng.integers(0, 2, 1000)) - 0.5) < 0.05


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_auc_equals_pairwise_oracle(data):
    n = data.draw(st.integers(2, 50))
    labels = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    if len(set(labels)) < 2:
        labels[0], labels[-1] = 0, 1
    # small integer grid forces frequent ties
    scores = data.draw(st.lists(st.integers(0, 6), min_size=n, max_size=n))
    scores = [s / 6 for s in scores]
    assert abs(auc(scores, labels) - pairwise_auc(scores, labels)) <= 1e-12


def test_roc_points_shapes():
    assert roc_points([0.5, 0.5, 0.5], [0, 1, 1]) == [(0.0, 0.0), (1.0, 1.0)]
    pts = roc_points([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
    assert (0.0, 1.0) in pts


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=2, max_size=40))
def test_roc_monotone_and_bounded(pairs):
    scores, labels = zip(*pairs)
    if len(set(labels)) < 2:
        return
    pts = np.array(roc_points(scores, labels))
    assert np.all((pts >= 0) & (pts <= 1))
    assert np.all(np.diff(pts[:, 0]) >= 0) and np.all(np.diff(pts[:, 1]) >= 0)
    assert tuple(pts[0]) == (0.0, 0.0) and tuple(pts[-1]) == (1.0, 1.0)
    thr = [r[0] for r in roc_table(scores, labels)]
    assert all(a > b for a, b in zip(thr, thr[1:]))


def test_evaluate_heads_report(tmp_path):
    P = np.array([[0.9, 0.2], [0.1, 0.7], [0.6, 0.4], [0.3, 0.8]])
    Y = np.array([[1, 1], [0, 1], [1, 1], [0, 1]])
    rep = evaluate_heads(P, Y, ["a", "b"])
    for head in rep["heads"].values():
        assert {"accuracy", "precision", "recall", "f1", "auc"} <= set(head)
    assert rep["heads"]["a"]["auc"] == 1.0
    assert rep["heads"]["b"]["auc"] is None  # single-class head
    assert rep["macro"]["auc"] == 1.0
    assert rep["n"] == 4
    text = format_report(rep)
    assert "macro" in text and "n/a" in text.splitlines()[2]
    write_roc_csv(tmp_path / "roc.csv", P[:, 0], Y[:, 0])
    lines = (tmp_path / "roc.csv").read_text().splitlines()
    assert lines[0] == "threshold,fpr,tpr" and lines[1] == "inf,0.0,0.0"
