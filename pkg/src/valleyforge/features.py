"""Per-feature relevance scores, their convex blending, and top-k selection."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import BadK, DimensionMismatch, TooFewRows, WeightOutOfRange
from .network import NetConfig, input_gradient, train

__all__ = [
    "FeatureScores",
    "FeatureMask",
    "BlendConfig",
    "rescale",
    "statistical_scores",
    "deep_scores",
    "blend_scores",
    "select_top",
    "write_score_report",
]

SOURCES = ("statistical", "deep", "optimal", "blended_wf", "blended_owf")


@dataclass(frozen=True, eq=False)
class FeatureScores:
    """Relevance weight in [0, 1] for each feature column.

    ``mean`` and ``std`` are filled in only for statistical scores.
    """

    s: np.ndarray
    source: str
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def __post_init__(self):
        s = np.array(self.s, dtype=np.float64)
        if s.ndim != 1:
            raise DimensionMismatch("scores must be 1-D")
        if np.any(s < 0) or np.any(s > 1) or not np.all(np.isfinite(s)):
            raise ValueError("scores must lie in [0, 1]")
        if self.source not in SOURCES:
            raise ValueError(f"unknown score source {self.source!r}")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    def __len__(self):
        return self.s.size


@dataclass(frozen=True, eq=False)
class FeatureMask:
    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=bool).ravel()
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @property
    def cardinality(self) -> int:
        return int(self.m.sum())

    @property
    def indices(self) -> list[int]:
        return np.flatnonzero(self.m).tolist()

    def __len__(self):
        return self.m.size

    def __eq__(self, other):
        return isinstance(other, FeatureMask) and np.array_equal(self.m, other.m)

    def __hash__(self):
        return hash(self.m.tobytes())


@dataclass
class BlendConfig:
    wt_1: float = 0.5
    wt_2: float = 0.5

    def __post_init__(self):
        for name in ("wt_1", "wt_2"):
            w = getattr(self, name)
            if not 0.0 <= w <= 1.0:
                raise WeightOutOfRange(f"{name}={w} outside [0, 1]")


def rescale(raw) -> np.ndarray:
    """Divide by the maximum; an all-zero vector stays all zero."""
    raw = np.asarray(raw, dtype=np.float64)
    top = raw.max() if raw.size else 0.0
    return raw / top if top > 0 else np.zeros_like(raw)


def abs_correlation(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """|Pearson r| of every column with ``y``; 0 where either side is constant."""
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt(np.sum(Xc * Xc, axis=0))
    sy = np.sqrt(np.sum(yc * yc))
    den = sx * sy
    out = np.zeros(X.shape[1])
    ok = den > 0
    out[ok] = np.abs(Xc[:, ok].T @ yc) / den[ok]
    return np.minimum(out, 1.0)


def statistical_scores(table) -> FeatureScores:
    """|correlation| with the first label, rescaled so the best feature is 1."""
    if table.n_rows < 3:
        raise TooFewRows(f"need at least 3 rows, got {table.n_rows}")
    X = table.features
    raw = abs_correlation(X, table.labels[:, 0])
    return FeatureScores(rescale(raw), "statistical", mean=X.mean(axis=0), std=X.std(axis=0))


def saliency(table, params, config: NetConfig) -> np.ndarray:
    """Mean over rows and heads of |d yhat_k / d x_d|."""
    grads = input_gradient(table.features, params, config)
    return np.abs(grads).mean(axis=(0, 1))


def deep_scores(table, probe_config: NetConfig, return_model: bool = False):
    """Input-gradient saliency of a briefly trained probe network."""
    params, curve = train(table, probe_config)
    scores = FeatureScores(rescale(saliency(table, params, probe_config)), "deep")
    if return_model:
        return scores, params, curve
    return scores


def blend_scores(a: FeatureScores, b: FeatureScores, w: float, source: str = "blended_wf") -> FeatureScores:
    """Elementwise convex combination ``w * a + (1 - w) * b``."""
    if len(a) != len(b):
        raise DimensionMismatch(f"score vectors of length {len(a)} and {len(b)}")
    if not 0.0 <= w <= 1.0:
        raise WeightOutOfRange(f"blend weight {w} outside [0, 1]")
    if w == 1.0:
        out = a.s
    elif w == 0.0:
        out = b.s
    else:
        out = np.clip(w * a.s + (1.0 - w) * b.s, np.minimum(a.s, b.s), np.maximum(a.s, b.s))
    return FeatureScores(out, source)


def select_top(scores, k: int) -> FeatureMask:
    """Mask of the k highest scores; ties go to the lower index."""
    s = np.asarray(getattr(scores, "s", scores), dtype=np.float64)
    if not 1 <= k <= s.size:
        raise BadK(f"k={k} outside [1, {s.size}]")
    order = np.lexsort((np.arange(s.size), -s))
    m = np.zeros(s.size, dtype=bool)
    m[order[:k]] = True
    return FeatureMask(m)


def write_score_report(path, feature_names, stat: FeatureScores, deep: FeatureScores,
                       optimal: FeatureScores, wf: FeatureScores, owf: FeatureScores,
                       mask: FeatureMask) -> None:
    cols = ("feature_name", "mean", "std", "stat_score", "deep_score",
            "optimal_score", "wf", "owf", "selected")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for d, name in enumerate(feature_names):
            w.writerow([
                name,
                repr(float(stat.mean[d])) if stat.mean is not None else "",
                repr(float(stat.std[d])) if stat.std is not None else "",
                repr(float(stat.s[d])),
                repr(float(deep.s[d])),
                repr(float(optimal.s[d])),
                repr(float(wf.s[d])),
                repr(float(owf.s[d])),
                int(mask.m[d]),
            ])
