"""Tabular health-record ingestion, normalization, splitting and synthetic data.

Two fixed schemas are understood (``covid`` and ``stroke``) plus a
``generic`` schema where label columns are marked with a ``label:`` header
prefix. Categorical strings are mapped through the fixed dictionaries in
:data:`CATEGORY_CODES` so that encodings are reproducible.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    AllRowsDropped,
    BadShape,
    DegenerateSplit,
    DimensionMismatch,
    EmptyFile,
    MissingColumn,
    UnmappableCategory,
)

logger = logging.getLogger(__name__)

__all__ = [
    "RecordTable",
    "NormalizationStats",
    "SCHEMAS",
    "CATEGORY_CODES",
    "load_table",
    "write_table",
    "fit_normalizer",
    "apply_normalizer",
    "stratified_split",
    "synth_generate",
]

_BINARY = {"yes": 1, "no": 0, "true": 1, "false": 0, "positive": 1, "negative": 0}
_SEX = {"male": 1, "female": 0, "other": 2, "m": 1, "f": 0}

# Lookup is case-insensitive; keys are lower case.
CATEGORY_CODES: dict[str, dict[str, int]] = {
    "sex": _SEX,
    "gender": _SEX,
    "fever": _BINARY,
    "headache": _BINARY,
    "cough": _BINARY,
    "covid": _BINARY,
    "ever_married": _BINARY,
    "work_type": {
        "children": 0,
        "govt_job": 1,
        "never_worked": 2,
        "private": 3,
        "self-employed": 4,
    },
    "residence_type": {"rural": 0, "urban": 1},
    "smoking_status": {
        "never smoked": 0,
        "formerly smoked": 1,
        "smokes": 2,
        "unknown": 3,
    },
    "stroke": _BINARY,
    "hypertension": _BINARY,
    "heart_disease": _BINARY,
}

SCHEMAS: dict[str, dict[str, list[str]]] = {
    "covid": {
        "features": ["age", "sex", "fever", "headache", "cough"],
        "labels": ["covid"],
    },
    "stroke": {
        "features": [
            "gender",
            "age",
            "hypertension",
            "heart_disease",
            "ever_married",
            "work_type",
            "Residence_type",
            "avg_glucose_level",
            "bmi",
            "smoking_status",
        ],
        "labels": ["stroke"],
    },
}

_NA_TOKENS = ["", "N/A", "NA", "n/a", "na", "NaN", "nan", "?", "null", "NULL", "None"]
LABEL_PREFIX = "label:"


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RecordTable:
    """N records with D numeric features and K binary disease labels."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    label_names: tuple[str, ...]
    schema_id: str = "generic"
    n_dropped: int = 0

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        Y = np.asarray(self.labels, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim != 2 or Y.ndim != 2:
            raise BadShape("features and labels must be 2-D")
        if X.shape[0] != Y.shape[0]:
            raise BadShape(f"{X.shape[0]} feature rows vs {Y.shape[0]} label rows")
        if X.shape[0] < 1 or X.shape[1] < 1 or Y.shape[1] < 1:
            raise BadShape(f"empty table: features {X.shape}, labels {Y.shape}")
        if not np.all(np.isfinite(X)):
            raise BadShape("features contain non-finite values")
        if not np.all((Y == 0) | (Y == 1)):
            raise BadShape("labels must be exactly 0 or 1")
        if len(self.feature_names) != X.shape[1] or len(self.label_names) != Y.shape[1]:
            raise BadShape("column name counts do not match the matrices")
        object.__setattr__(self, "features", _freeze(X))
        object.__setattr__(self, "labels", _freeze(Y))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "label_names", tuple(self.label_names))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_labels(self) -> int:
        return self.labels.shape[1]

    def take(self, rows) -> "RecordTable":
        rows = np.asarray(rows)
        return RecordTable(
            self.features[rows],
            self.labels[rows],
            self.feature_names,
            self.label_names,
            self.schema_id,
        )

    def with_features(self, features, feature_names=None) -> "RecordTable":
        return RecordTable(
            features,
            self.labels,
            self.feature_names if feature_names is None else feature_names,
            self.label_names,
            self.schema_id,
        )

    def select(self, mask) -> "RecordTable":
        """Keep only the feature columns where ``mask`` is true."""
        m = np.asarray(getattr(mask, "m", mask), dtype=bool)
        if m.shape != (self.n_features,):
            raise DimensionMismatch(f"mask of length {m.size} for {self.n_features} features")
        names = tuple(n for n, keep in zip(self.feature_names, m) if keep)
        return self.with_features(self.features[:, m], names)


@dataclass(frozen=True, eq=False)
class NormalizationStats:
    mu: np.ndarray
    sigma: np.ndarray
    constant_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        mu = _freeze(self.mu)
        sigma = _freeze(self.sigma)
        if mu.shape != sigma.shape or mu.ndim != 1:
            raise BadShape("mu and sigma must be 1-D of equal length")
        if np.any(sigma < 0):
            raise BadShape("sigma must be non-negative")
        const = sigma == 0
        const.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "constant_mask", const)


def _parse_float(v) -> float:
    # Python's float() rounds correctly; pandas' fast parser can be off by an ulp
    try:
        return float(v)
    except (TypeError, ValueError):
        return np.nan


def _code_column(name: str, col: pd.Series) -> np.ndarray:
    """Convert one raw column to floats, NaN where missing."""
    numeric = col.map(_parse_float, na_action="ignore").astype(np.float64)
    bad = numeric.isna() & col.notna()
    if not bad.any():
        return numeric.to_numpy(dtype=np.float64)
    codes = CATEGORY_CODES.get(name.lower())
    out = numeric.to_numpy(dtype=np.float64).copy()
    for idx in np.flatnonzero(bad.to_numpy()):
        raw = str(col.iloc[idx]).strip()
        key = raw.lower()
        if codes is None or key not in codes:
            raise UnmappableCategory(f"column {name!r}: value {raw!r} has no code")
        out[idx] = codes[key]
    return out


def load_table(path, schema_id: str = "generic", require_labels: bool = True) -> RecordTable:
    """Read a CSV file into a :class:`RecordTable`.

    Missing feature cells are imputed with the column median; rows with a
    missing label are dropped and counted in ``n_dropped``.

    With ``require_labels=False`` a file lacking every label column still
    loads (for scoring new records); its labels are all zero.
    """
    path = Path(path)
    if schema_id not in ("covid", "stroke", "generic"):
        raise ValueError(f"unknown schema_id {schema_id!r}")
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        df = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            na_values=_NA_TOKENS,
            skipinitialspace=True,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError as exc:
        raise EmptyFile(f"{path} is empty") from exc
    if df.shape[0] == 0:
        raise EmptyFile(f"{path} has a header but no rows")
    df.columns = [c.strip() for c in df.columns]

    if schema_id == "generic":
        label_cols = [c for c in df.columns if c.startswith(LABEL_PREFIX)]
        if not label_cols and require_labels:
            raise MissingColumn(f"{path}: no column named '{LABEL_PREFIX}<name>'")
        feature_cols = [c for c in df.columns if c not in label_cols]
        label_names = [c[len(LABEL_PREFIX):] for c in label_cols] or ["unlabeled"]
    else:
        schema = SCHEMAS[schema_id]
        feature_cols, label_cols = schema["features"], schema["labels"]
        lower = {c.lower(): c for c in df.columns}
        if not require_labels and not any(c.lower() in lower for c in label_cols):
            label_names, label_cols = list(label_cols), []
        resolved = []
        for c in feature_cols + label_cols:
            if c in df.columns:
                resolved.append(c)
            elif c.lower() in lower:
                resolved.append(lower[c.lower()])
            else:
                raise MissingColumn(f"{path}: schema {schema_id!r} needs column {c!r}")
        df = df[resolved].set_axis(feature_cols + label_cols, axis=1)
        label_names = list(label_cols) or label_names
    if not feature_cols:
        raise MissingColumn(f"{path}: no feature columns")

    if label_cols:
        Y = np.column_stack([_code_column(c.split(":")[-1], df[c]) for c in label_cols])
    else:
        Y = np.zeros((len(df), len(label_names)))
    keep = ~np.isnan(Y).any(axis=1)
    n_dropped = int((~keep).sum())
    if not keep.any():
        raise AllRowsDropped(f"{path}: every row is missing a label")
    if n_dropped:
        logger.warning("%s: dropped %d rows with missing labels", path, n_dropped)
    Y = Y[keep]
    X = np.column_stack([_code_column(c, df[c])[keep] for c in feature_cols])
    for j in range(X.shape[1]):
        missing = np.isnan(X[:, j])
        if missing.all():
            raise AllRowsDropped(f"{path}: column {feature_cols[j]!r} has no values")
        if missing.any():
            X[missing, j] = np.median(X[~missing, j])
    return RecordTable(X, Y, feature_cols, label_names, schema_id, n_dropped)


def write_table(table: RecordTable, path) -> None:
    """Write a table as a generic-schema CSV (labels prefixed ``label:``)."""
    cols = {n: table.features[:, j] for j, n in enumerate(table.feature_names)}
    for j, n in enumerate(table.label_names):
        cols[LABEL_PREFIX + n] = table.labels[:, j].astype(int)
    pd.DataFrame(cols).to_csv(path, index=False, float_format="%.17g")


def fit_normalizer(table: RecordTable) -> NormalizationStats:
    X = table.features
    return NormalizationStats(X.mean(axis=0), X.std(axis=0))


def apply_normalizer(table: RecordTable, stats: NormalizationStats) -> RecordTable:
    """Standardize columns; constant columns become all zeros."""
    if stats.mu.shape[0] != table.n_features:
        raise DimensionMismatch(
            f"stats for {stats.mu.shape[0]} features, table has {table.n_features}"
        )
    safe = np.where(stats.constant_mask, 1.0, stats.sigma)
    Z = (table.features - stats.mu) / safe
    Z[:, stats.constant_mask] = 0.0
    return table.with_features(Z)


def stratified_split(
    table: RecordTable, test_fraction: float, seed: int
) -> tuple[RecordTable, RecordTable]:
    """Split rows stratified on the first label column.

    Each class sends ``round(count * test_fraction)`` rows (halves round up)
    to the test side. A class with a single member stays in train.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    if table.n_rows < 2:
        raise DegenerateSplit("need at least two rows to split")
    rng = np.random.default_rng(seed)
    y = table.labels[:, 0]
    test_rows = []
    for cls in (0.0, 1.0):
        idx = np.flatnonzero(y == cls)
        if idx.size == 0:
            continue
        if idx.size == 1:
            warnings.warn(
                f"class {int(cls)} has a single member; it is kept in the train split",
                stacklevel=2,
            )
            continue
        n_test = int(math.floor(idx.size * test_fraction + 0.5))
        test_rows.append(rng.permutation(idx)[:n_test])
    test_idx = np.sort(np.concatenate(test_rows)) if test_rows else np.array([], dtype=int)
    in_test = np.zeros(table.n_rows, dtype=bool)
    in_test[test_idx] = True
    if in_test.all() or not in_test.any():
        raise DegenerateSplit(
            f"split of {table.n_rows} rows at fraction {test_fraction} leaves one side empty"
        )
    return table.take(np.flatnonzero(~in_test)), table.take(np.flatnonzero(in_test))


def synth_generate(
    n: int, d_informative: int, d_noise: int, delta: float, seed: int
) -> RecordTable:
    """Balanced two-class Gaussian data with known signal.

    Informative columns come first and are shifted by ``+delta/2`` for
    positives and ``-delta/2`` for negatives; noise columns are standard
    normal. With a single informative column the Bayes-optimal accuracy is
    ``Phi(delta / 2)``.
    """
    if n < 4 or n % 2 or d_informative < 1 or d_noise < 0 or not delta > 0:
        raise BadShape(
            f"need even n >= 4, d_informative >= 1, d_noise >= 0, delta > 0; "
            f"got n={n}, d_informative={d_informative}, d_noise={d_noise}, delta={delta}"
        )
    rng = np.random.default_rng(seed)
    y = np.repeat([1.0, 0.0], n // 2)
    y = y[rng.permutation(n)]
    sign = 2.0 * y - 1.0
    X = rng.standard_normal((n, d_informative + d_noise))
    X[:, :d_informative] += (delta / 2.0) * sign[:, None]
    names = [f"inf_{j}" for j in range(d_informative)] + [f"noise_{j}" for j in range(d_noise)]
    return RecordTable(X, y[:, None], names, ["disease"], "generic")
