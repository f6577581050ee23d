"""Binary classification metrics: confusion counts, F1 family, ROC and AUC."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import LengthMismatch, SingleClass

__all__ = [
    "ConfusionCounts",
    "confusion",
    "classification_scores",
    "roc_points",
    "roc_table",
    "auc",
    "evaluate_heads",
    "write_roc_csv",
    "format_report",
    "to_json",
]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _pair(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise LengthMismatch(f"{s.size} scores vs {y.size} labels")
    return s, y.astype(bool)


def confusion(scores, labels, threshold: float = 0.5) -> ConfusionCounts:
    """Counts with a sample called positive iff ``score >= threshold``."""
    s, y = _pair(scores, labels)
    pred = s >= threshold
    return ConfusionCounts(
        tp=int(np.sum(pred & y)),
        fp=int(np.sum(pred & ~y)),
        tn=int(np.sum(~pred & ~y)),
        fn=int(np.sum(~pred & y)),
    )


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def classification_scores(c: ConfusionCounts) -> dict[str, float]:
    """Accuracy, precision, recall and F1; any 0/0 evaluates to 0."""
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    return {
        "accuracy": _ratio(c.tp + c.tn, c.n),
        "precision": precision,
        "recall": recall,
        "f1": _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn),
    }


def _roc_counts(scores, labels):
    s, y = _pair(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs at least one positive and one negative label")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[ends]
    fp = (ends + 1) - tp
    return s[ends], tp, fp, n_pos, n_neg


def roc_table(scores, labels) -> list[tuple[float, float, float]]:
    """``(threshold, fpr, tpr)`` rows: a leading ``(inf, 0, 0)`` then one row per distinct score, descending."""
    thr, tp, fp, n_pos, n_neg = _roc_counts(scores, labels)
    rows = [(float("inf"), 0.0, 0.0)]
    rows += [(float(t), f / n_neg, p / n_pos) for t, f, p in zip(thr, fp, tp)]
    return rows


def roc_points(scores, labels) -> list[tuple[float, float]]:
    """ROC curve from (0, 0) to (1, 1) with fpr nondecreasing.

    The lowest threshold admits every sample, so the final point is always
    (1, 1).
    """
    return [r[1:] for r in roc_table(scores, labels)]


def auc(scores, labels) -> float:
    """Trapezoidal area under the ROC curve.

    Accumulated in integer counts, so the result equals the Mann-Whitney
    probability with half credit for ties up to one final division.
    """
    _, tp, fp, n_pos, n_neg = _roc_counts(scores, labels)
    tp = np.r_[0, tp].astype(np.int64)
    fp = np.r_[0, fp].astype(np.int64)
    twice_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    return twice_area / (2 * n_pos * n_neg)


def evaluate_heads(probs, labels, label_names, threshold: float = 0.5) -> dict:
    """Per-head metrics plus the unweighted macro average over heads."""
    P = np.asarray(probs, dtype=np.float64)
    Y = np.asarray(labels)
    if P.ndim == 1:
        P = P[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if P.shape != Y.shape:
        raise LengthMismatch(f"probabilities {P.shape} vs labels {Y.shape}")
    heads = {}
    for k, name in enumerate(label_names):
        c = confusion(P[:, k], Y[:, k], threshold)
        m = classification_scores(c)
        try:
            m["auc"] = auc(P[:, k], Y[:, k])
        except SingleClass:
            m["auc"] = None
        m["confusion"] = asdict(c)
        heads[name] = m
    macro = {}
    for key in ("accuracy", "precision", "recall", "f1", "auc"):
        vals = [h[key] for h in heads.values() if h[key] is not None]
        macro[key] = float(np.mean(vals)) if vals else None
    return {"heads": heads, "macro": macro, "n": int(P.shape[0])}


def write_roc_csv(path, scores, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "fpr", "tpr"])
        for t, f, p in roc_table(scores, labels):
            w.writerow([repr(t), repr(f), repr(p)])


def format_report(report: dict) -> str:
    """Aligned plain-text table of a report from :func:`evaluate_heads`."""
    cols = ("accuracy", "precision", "recall", "f1", "auc")
    rows = list(report["heads"].items()) + [("macro", report["macro"])]
    width = max(len(name) for name, _ in rows)
    lines = [f"{'head':<{width}}  " + "  ".join(f"{c:>9}" for c in cols)]
    for name, m in rows:
        cells = ["      n/a" if m[c] is None else f"{m[c]:9.4f}" for c in cols]
        lines.append(f"{name:<{width}}  " + "  ".join(cells))
    return "\n".join(lines)


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
