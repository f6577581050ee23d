"""Stabilized Energy Valley Optimization with Enhanced Bounds.

Minimizes a black-box function over a box. Each iteration

1. reads best and worst population fitness,
2. computes every particle's stability bound and stability level,
3. proposes a trial for each particle: unstable particles decay by alpha
   decay (copy coordinates of the best solution) or gamma decay (step
   along the difference of two peers); stable particles drift toward the
   best solution plus a peer difference,
4. clamps trials into a trust region that shrinks linearly around the
   best-so-far solution,
5. evaluates the trials, keeps each one that is no worse than its parent
   (or whose parent left the trust region), and updates the archive.

All randomness of particle ``i`` at iteration ``t`` is fixed by
``(seed, t, i)`` before any fitness call, so evaluation order and thread
scheduling cannot change any output.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteFitness, NonFiniteInput, PopulationTooSmall

__all__ = [
    "SearchSpace",
    "Population",
    "IterationState",
    "SevEbConfig",
    "OptResult",
    "init_population",
    "evaluate",
    "stability_bound",
    "stability_level",
    "update_positions",
    "select_survivors",
    "shrink_bounds",
    "optimize",
    "random_search",
]


@dataclass(frozen=True, eq=False)
class SearchSpace:
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        lb = np.array(self.lb, dtype=np.float64).ravel()
        ub = np.array(self.ub, dtype=np.float64).ravel()
        if lb.shape != ub.shape or lb.size == 0:
            raise ValueError("lb and ub must be non-empty and of equal length")
        if not np.all(lb < ub):
            raise ValueError("every lower bound must be strictly below its upper bound")
        lb.setflags(write=False)
        ub.setflags(write=False)
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)

    @classmethod
    def box(cls, low: float, high: float, dim: int) -> "SearchSpace":
        return cls(np.full(dim, float(low)), np.full(dim, float(high)))

    @property
    def dim(self) -> int:
        return self.lb.size

    @property
    def width(self) -> np.ndarray:
        return self.ub - self.lb

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lb - tol) and np.all(x <= self.ub + tol))


@dataclass(eq=False)
class Population:
    positions: np.ndarray
    fitness: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.positions.shape[0]


@dataclass(eq=False)
class IterationState:
    t: int
    i_remaining: int
    bst_fit: float
    wst_fit: float
    bounds_t: SearchSpace
    x_best: np.ndarray
    f_best: float


@dataclass
class SevEbConfig:
    pop_size: int = 30
    max_iters: int = 60
    seed: int = 0
    eps: float = 1e-12
    rho0: float = 1.0
    alpha_prob: float = 0.5
    alpha_frac: float = 0.3
    min_width: float = 1e-9
    stable_cr: float = 0.9
    lam: float = 0.1
    surrogate_epochs: int = 50
    n_workers: int = 1

    def __post_init__(self):
        if self.pop_size < 4:
            raise PopulationTooSmall(f"pop_size={self.pop_size}; need at least 4")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not 0.0 < self.rho0 <= 1.0:
            raise ValueError("rho0 must lie in (0, 1]")
        for name in ("alpha_prob", "alpha_frac", "stable_cr"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.eps <= 0 or self.min_width <= 0 or self.lam < 0:
            raise ValueError("eps and min_width must be > 0 and lam >= 0")
        if self.surrogate_epochs < 0 or self.n_workers < 1:
            raise ValueError("surrogate_epochs must be >= 0 and n_workers >= 1")


@dataclass(eq=False)
class OptResult:
    x_best: np.ndarray
    f_best: float
    history: list[float]
    population: Population | None = None
    n_evals: int = 0


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def init_population(space: SearchSpace, P: int, seed: int) -> Population:
    """Uniform positions inside the box; fitness left unset."""
    if P < 4:
        raise PopulationTooSmall(f"population of {P}; need at least 4")
    rng = np.random.default_rng(seed)
    return Population(rng.uniform(space.lb, space.ub, size=(P, space.dim)))


def evaluate(fitness_fn, positions: np.ndarray, executor=None) -> np.ndarray:
    rows = [positions[i].copy() for i in range(positions.shape[0])]
    if executor is None:
        values = [fitness_fn(x) for x in rows]
    else:
        values = list(executor.map(fitness_fn, rows))
    f = np.array([float(v) for v in values])
    if not np.all(np.isfinite(f)):
        bad = int(np.flatnonzero(~np.isfinite(f))[0])
        raise NonFiniteFitness(f"fitness of particle {bad} is {f[bad]}")
    return f


def stability_bound(bst_fit, cu_fit, wst_fit, eps: float = 1e-12):
    """Stability bound ``(bst * cu) / (wst * cu)`` on shift-normalized fitness.

    Fitness is first shifted so the best value becomes 1, which keeps the
    ratio defined for zero or negative raw fitness. ``cu_fit`` cancels, so
    the result is ``1 / (wst - bst + 1)`` up to the ``eps`` guard. Expects
    ``bst_fit <= cu_fit <= wst_fit``; works elementwise on arrays.
    """
    b, c, w = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in (bst_fit, cu_fit, wst_fit)))
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c)) and np.all(np.isfinite(w))):
        raise NonFiniteInput(f"non-finite fitness in {(bst_fit, cu_fit, wst_fit)}")
    shifted_c = c - b + 1.0
    shifted_w = w - b + 1.0
    sb = (1.0 * shifted_c) / (shifted_w * shifted_c + eps)
    sb = np.where(w == b, 1.0, sb)
    return float(sb) if sb.ndim == 0 else sb


def stability_level(f_i, bst_fit, wst_fit, eps: float = 1e-12):
    """Normalized fitness rank in [0, 1]; 0 for the best particle."""
    return (f_i - bst_fit) / (wst_fit - bst_fit + eps)


def _peers(uj, uk, P: int, i):
    """Map two uniforms to peer indices distinct from each other and from ``i``."""
    j = np.floor(uj * (P - 1)).astype(int)
    k = np.floor(uk * (P - 2)).astype(int)
    j += j >= i
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    k += k >= lo
    k += k >= hi
    return j, k


def update_positions(pop: Population, state: IterationState, cfg: SevEbConfig) -> Population:
    """Propose one trial position per particle.

    Unstable particles (stability level above their stability bound) decay:
    alpha decay copies each coordinate of ``x_best`` with probability
    ``alpha_frac``; gamma decay steps along the difference of two random
    peers. Stable particles drift toward ``x_best`` plus a peer difference,
    applied per coordinate with probability ``stable_cr`` (one coordinate
    always moves). Trials are clamped into ``state.bounds_t``; the caller
    decides which survive.

    Row ``i`` of the per-iteration uniform block keyed by ``(seed, t)`` is
    particle ``i``'s private randomness.
    """
    X = pop.positions
    f = np.asarray(pop.fitness, dtype=np.float64)
    P, D = X.shape
    U = _stream(cfg.seed, state.t).random((P, 6 + D))
    coin, pull, r, coords = U[:, 0], U[:, 1], U[:, 2], U[:, 6:]
    idx = np.arange(P)
    j, k = _peers(U[:, 3], U[:, 4], P, idx)
    forced = np.floor(U[:, 5] * D).astype(int)

    sb = stability_bound(state.bst_fit, f, state.wst_fit, cfg.eps)
    sl = stability_level(f, state.bst_fit, state.wst_fit, cfg.eps)
    unstable = sl > sb
    alpha = unstable & (coin < cfg.alpha_prob)
    gamma = unstable & ~alpha
    stable = ~unstable

    copy = alpha[:, None] & (coords < cfg.alpha_frac)
    cross = coords < cfg.stable_cr
    cross[idx, forced] = True
    move = (gamma[:, None]) | (stable[:, None] & cross)
    pull = np.where(stable, pull, 0.0)
    step = pull[:, None] * (state.x_best - X) + r[:, None] * (X[j] - X[k])
    trial = np.where(move, X + step, X)
    trial = np.where(copy, state.x_best, trial)
    return Population(np.clip(trial, state.bounds_t.lb, state.bounds_t.ub))


def select_survivors(pop: Population, trial: Population, bounds: SearchSpace) -> Population:
    """Per particle keep the trial if it is no worse, or if the old
    position has fallen outside the current bounds."""
    outside = ~np.all((pop.positions >= bounds.lb) & (pop.positions <= bounds.ub), axis=1)
    take = (trial.fitness <= pop.fitness) | outside
    return Population(
        np.where(take[:, None], trial.positions, pop.positions),
        np.where(take, trial.fitness, pop.fitness),
    )


def shrink_bounds(space: SearchSpace, x_best, t: int, T: int, rho0: float,
                  min_width: float) -> SearchSpace:
    """Trust region of half-width ``rho_t * (ub - lb)`` around ``x_best``.

    ``rho_t`` falls linearly from ``rho0`` at ``t = 0`` to 0 at ``t = T``;
    dimensions narrower than ``min_width`` are re-widened symmetrically.
    """
    x_best = np.asarray(x_best, dtype=np.float64)
    rho = rho0 * (1.0 - t / max(T, 1))
    span = space.width
    lb = np.maximum(space.lb, x_best - rho * span)
    ub = np.minimum(space.ub, x_best + rho * span)
    narrow = (ub - lb) < min_width
    if np.any(narrow):
        half = min_width / 2.0
        lb = np.where(narrow, np.maximum(space.lb, x_best - half), lb)
        ub = np.where(narrow, np.minimum(space.ub, x_best + half), ub)
    return SearchSpace(lb, ub)


def optimize(fitness_fn, space: SearchSpace, cfg: SevEbConfig) -> OptResult:
    """Minimize ``fitness_fn`` over ``space``.

    ``history[0]`` is the best initial fitness and ``history[t]`` the
    archive after iteration ``t``, so it has ``max_iters + 1`` entries.
    With ``cfg.n_workers > 1`` the fitness calls of one iteration run on a
    thread pool; ``fitness_fn`` must then be reentrant.
    """
    T = cfg.max_iters
    executor = ThreadPoolExecutor(cfg.n_workers) if cfg.n_workers > 1 else None
    try:
        pop = init_population(space, cfg.pop_size, cfg.seed)
        pop.fitness = evaluate(fitness_fn, pop.positions, executor)
        n_evals = pop.size
        i0 = int(np.argmin(pop.fitness))
        x_best, f_best = pop.positions[i0].copy(), float(pop.fitness[i0])
        history = [f_best]
        for t in range(1, T + 1):
            # remaining-budget counter; the loop runs while it is >= 0
            i_remaining = T - t
            bounds_t = shrink_bounds(space, x_best, t, T, cfg.rho0, cfg.min_width)
            state = IterationState(
                t=t,
                i_remaining=i_remaining,
                bst_fit=float(pop.fitness.min()),
                wst_fit=float(pop.fitness.max()),
                bounds_t=bounds_t,
                x_best=x_best,
                f_best=f_best,
            )
            trial = update_positions(pop, state, cfg)
            trial.fitness = evaluate(fitness_fn, trial.positions, executor)
            n_evals += trial.size
            pop = select_survivors(pop, trial, bounds_t)
            i = int(np.argmin(pop.fitness))
            if pop.fitness[i] < f_best:
                x_best, f_best = pop.positions[i].copy(), float(pop.fitness[i])
            history.append(f_best)
    finally:
        if executor is not None:
            executor.shutdown()
    return OptResult(x_best, f_best, history, pop, n_evals)


def random_search(fitness_fn, space: SearchSpace, n_evals: int, seed: int,
                  batch: int = 64) -> OptResult:
    """Uniform sampling baseline; ``history`` holds the best value per batch."""
    rng = np.random.default_rng(seed)
    x_best, f_best = None, math.inf
    history = []
    done = 0
    while done < n_evals:
        m = min(batch, n_evals - done)
        X = rng.uniform(space.lb, space.ub, size=(m, space.dim))
        f = evaluate(fitness_fn, X)
        i = int(np.argmin(f))
        if f[i] < f_best:
            x_best, f_best = X[i].copy(), float(f[i])
        history.append(f_best)
        done += m
    return OptResult(x_best, f_best, history, None, done)
