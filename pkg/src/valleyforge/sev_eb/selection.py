"""Wrapper feature selection: continuous positions to masks, masks to fitness."""

from __future__ import annotations

import threading

import numpy as np
from scipy.special import expit

from ..errors import DimensionMismatch
from ..features import FeatureMask
from ..metrics import classification_scores, confusion
from ..network import NetParams, loss, sgd_step
from .core import OptResult, SearchSpace, SevEbConfig, optimize

EMPTY_MASK_FITNESS = 2.0


def binarize(x) -> FeatureMask:
    """Feature ``d`` is selected iff ``x_d > 0``."""
    return FeatureMask(np.asarray(x, dtype=np.float64) > 0.0)


def train_surrogate(X, Y, epochs: int, seed: int, lr: float = 0.5):
    """Logistic regression (one dense layer + sigmoid) by full-batch descent.

    Uses the same mean cross-entropy and SGD update as the main network.
    Returns ``(params, loss_curve)``.
    """
    rng = np.random.default_rng(seed)
    K = Y.shape[1]
    params = NetParams({
        "W": rng.uniform(-0.01, 0.01, size=(K, X.shape[1])),
        "b": np.zeros(K),
    })
    curve = []
    for _ in range(epochs):
        P = expit(X @ params["W"].T + params["b"])
        curve.append(loss(P, Y))
        d_logits = (P - Y) / Y.size
        grads = NetParams({"W": d_logits.T @ X, "b": d_logits.sum(axis=0)})
        params = sgd_step(params, grads, lr)
    return params, curve


def surrogate_proba(params: NetParams, X) -> np.ndarray:
    return expit(X @ params["W"].T + params["b"])


def fs_fitness(mask: FeatureMask, train, val, lam: float, surrogate_epochs: int,
               seed: int) -> float:
    """``(1 - F1_val) + lam * |mask| / D`` for a linear surrogate on the masked columns.

    F1 is macro-averaged over label heads. The empty mask scores 2.0
    without training.
    """
    m = np.asarray(getattr(mask, "m", mask), dtype=bool)
    D = train.n_features
    if m.size != D or val.n_features != D:
        raise DimensionMismatch(f"mask of length {m.size} for tables of width {D}/{val.n_features}")
    card = int(m.sum())
    if card == 0:
        return EMPTY_MASK_FITNESS
    params, _ = train_surrogate(train.features[:, m], train.labels, surrogate_epochs, seed)
    P = surrogate_proba(params, val.features[:, m])
    f1 = np.mean([
        classification_scores(confusion(P[:, k], val.labels[:, k]))["f1"]
        for k in range(val.n_labels)
    ])
    return (1.0 - f1) + lam * card / D


class MaskObjective:
    """Callable ``x -> fs_fitness(binarize(x), ...)`` with a per-mask cache.

    Safe to call from several threads; a cache race only repeats a
    deterministic computation.
    """

    def __init__(self, train, val, lam: float, surrogate_epochs: int, seed: int):
        self.train = train
        self.val = val
        self.lam = lam
        self.surrogate_epochs = surrogate_epochs
        self.seed = seed
        self.cache: dict[bytes, float] = {}
        self._lock = threading.Lock()

    def __call__(self, x) -> float:
        mask = binarize(x)
        key = mask.m.tobytes()
        with self._lock:
            hit = self.cache.get(key)
        if hit is not None:
            return hit
        value = fs_fitness(mask, self.train, self.val, self.lam, self.surrogate_epochs, self.seed)
        with self._lock:
            self.cache[key] = value
        return value


def select_features(train, val, cfg: SevEbConfig) -> tuple[FeatureMask, np.ndarray, OptResult]:
    """Run the optimizer over ``[-1, 1]^D``.

    Returns the best mask, the per-feature selection frequency in the final
    population, and the raw optimizer result.
    """
    D = train.n_features
    objective = MaskObjective(train, val, cfg.lam, cfg.surrogate_epochs, cfg.seed)
    result = optimize(objective, SearchSpace.box(-1.0, 1.0, D), cfg)
    frequency = (result.population.positions > 0.0).mean(axis=0)
    return binarize(result.x_best), frequency, result
