import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from valleyforge.dataio import stratified_split, synth_generate
from valleyforge.errors import NonFiniteFitness, NonFiniteInput, PopulationTooSmall, UnknownFunction
from valleyforge.sev_eb import (
    EMPTY_MASK_FITNESS,
    IterationState,
    MaskObjective,
    Population,
    SearchSpace,
    SevEbConfig,
    bench_fn,
    binarize,
    evaluate,
    fs_fitness,
    init_population,
    optimize,
    random_search,
    select_features,
    shrink_bounds,
    sphere,
    stability_bound,
    stability_level,
    update_positions,
)
from valleyforge.features import FeatureMask

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_bench_functions_at_optimum():
    assert bench_fn("sphere", np.zeros(4)) == 0.0
    assert bench_fn("rastrigin", np.zeros(4)) == 0.0
    assert bench_fn("rosenbrock", np.ones(4)) == 0.0
    with pytest.raises(UnknownFunction):
        bench_fn("ackley", np.zeros(2))


def test_init_population():
    space = SearchSpace.box(-2.0, 3.0, 4)
    a = init_population(space, 10, 7)
    assert np.all((a.positions >= -2) & (a.positions <= 3))
    assert np.array_equal(a.positions, init_population(space, 10, 7).positions)
    with pytest.raises(PopulationTooSmall):
        init_population(space, 3, 0)
    with pytest.raises(PopulationTooSmall):
        SevEbConfig(pop_size=3)


def test_stability_bound_examples():
    assert stability_bound(2.0, 5.0, 10.0) == pytest.approx(4 / 36, abs=1e-12)
    assert stability_bound(3.0, 3.0, 3.0) == 1.0
    with pytest.raises(NonFiniteInput):
        stability_bound(0.0, math.nan, 1.0)


@settings(max_examples=100, deadline=None)
@given(finite, st.floats(0, 1), st.floats(0, 1e6))
def test_stability_bound_ignores_current(bst, frac, span):
    wst = bst + span
    cu = bst + frac * span
    assert abs(stability_bound(bst, cu, wst) - stability_bound(bst, bst, wst)) <= 1e-12


def test_stability_level():
    assert stability_level(1.0, 1.0, 5.0) == 0.0
    assert 1 - stability_level(5.0, 1.0, 5.0) < 1e-9
    assert abs(stability_level(3.0, 1.0, 5.0) - 0.5) < 1e-9


def _state(pop, t=1, space=None):
    i = int(np.argmin(pop.fitness))
    space = space or SearchSpace.box(-5, 5, pop.positions.shape[1])
    return IterationState(t, 0, float(pop.fitness.min()), float(pop.fitness.max()),
                          space, pop.positions[i].copy(), float(pop.fitness[i]))


def test_converged_population_is_fixed_point():
    pop = Population(np.tile([0.3, -1.2, 2.0], (6, 1)), np.full(6, 4.0))
    out = update_positions(pop, _state(pop), SevEbConfig(pop_size=6))
    assert np.array_equal(out.positions, pop.positions)


def test_update_is_deterministic_and_bounded():
    space = SearchSpace.box(-1, 1, 5)
    pop = init_population(space, 12, 3)
    pop.fitness = np.array([sphere(x) for x in pop.positions])
    cfg = SevEbConfig(pop_size=12, seed=3)
    inner = SearchSpace(np.full(5, -0.5), np.full(5, 0.5))
    a = update_positions(pop, _state(pop, 4, inner), cfg)
    b = update_positions(pop, _state(pop, 4, inner), cfg)
    assert np.array_equal(a.positions, b.positions)
    assert all(inner.contains(x) for x in a.positions)


def test_shrink_bounds_schedule():
    space = SearchSpace.box(-4, 4, 3)
    xb = np.array([3.9, 0.0, -1.0])
    s0 = shrink_bounds(space, xb, 0, 10, 1.0, 1e-9)
    assert np.array_equal(s0.lb, space.lb) and np.array_equal(s0.ub, space.ub)
    sT = shrink_bounds(space, xb, 10, 10, 1.0, 1e-3)
    np.testing.assert_allclose(sT.width[1:], 1e-3, rtol=1e-9)
    assert sT.lb[0] <= 3.9 <= sT.ub[0]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 50), st.floats(0.01, 1.0), st.lists(st.floats(-1, 1), min_size=2, max_size=2))
def test_shrink_bounds_nested(t, rho0, xb):
    space = SearchSpace([-1.0, -2.0], [1.0, 3.0])
    s = shrink_bounds(space, xb, t, 50, rho0, 1e-6)
    assert np.all(s.lb >= space.lb) and np.all(s.ub <= space.ub) and np.all(s.lb <= s.ub)
    assert np.all((s.lb <= xb) & (np.array(xb) <= s.ub))


def test_optimize_constant_and_zero_iters():
    space = SearchSpace.box(-1, 1, 3)
    res = optimize(lambda x: 7.0, space, SevEbConfig(pop_size=8, max_iters=5))
    assert res.f_best == 7.0 and res.history == [7.0] * 6
    cfg = SevEbConfig(pop_size=8, max_iters=0, seed=2)
    res0 = optimize(sphere, space, cfg)
    init = init_population(space, 8, 2).positions
    assert res0.f_best == min(sphere(x) for x in init) and len(res0.history) == 1


def test_optimize_history_monotone_and_parallel_identical():
    space = SearchSpace.box(-5.12, 5.12, 4)
    a = optimize(sphere, space, SevEbConfig(pop_size=10, max_iters=40, seed=5))
    b = optimize(sphere, space, SevEbConfig(pop_size=10, max_iters=40, seed=5, n_workers=4))
    assert all(x >= y for x, y in zip(a.history, a.history[1:]))
    assert np.array_equal(a.x_best, b.x_best) and a.history == b.history
    assert a.n_evals == 10 * 41


def test_nonfinite_fitness_rejected():
    with pytest.raises(NonFiniteFitness):
        evaluate(lambda x: math.nan, np.zeros((2, 2)))


def test_sphere_small_budget_converges():
    space = SearchSpace.box(-5.12, 5.12, 5)
    finals = [optimize(sphere, space, SevEbConfig(pop_size=20, max_iters=200, seed=s)).f_best
              for s in range(10)]
    assert np.median(finals) < 1e-4


def test_random_search_budget():
    res = random_search(sphere, SearchSpace.box(-1, 1, 2), 150, 0)
    assert res.n_evals == 150 and len(res.history) == 3


def test_binarize():
    assert binarize([0.3, -0.2, 0.0]).m.tolist() == [True, False, False]
    assert binarize([0.1, 2.0]).cardinality == 2


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=10))
def test_binarize_sign_flip(x):
    x = np.array(x)
    a, b = binarize(x).m, binarize(-x).m
    nz = x != 0
    assert np.array_equal(a[nz], ~b[nz]) and not a[~nz].any() and not b[~nz].any()


@pytest.fixture(scope="module")
def fs_split():
    t = synth_generate(600, 3, 3, 3.0, 0)
    return stratified_split(t, 0.3, 0)


def test_fs_fitness_empty_mask(fs_split):
    tr, va = fs_split
    assert fs_fitness(FeatureMask(np.zeros(6)), tr, va, 0.1, 10, 0) == EMPTY_MASK_FITNESS


def test_fs_fitness_prefers_informative():
    wins = 0
    for seed in range(10):
        tr, va = stratified_split(synth_generate(600, 3, 3, 3.0, seed), 0.3, seed)
        good = fs_fitness(FeatureMask([1, 1, 1, 0, 0, 0]), tr, va, 0.1, 50, seed)
        bad = fs_fitness(FeatureMask([0, 0, 0, 1, 1, 1]), tr, va, 0.1, 50, seed)
        wins += good < bad
    assert wins >= 9


def test_fs_fitness_separable_lambda_zero(fs_split):
    tr, va = stratified_split(synth_generate(400, 1, 1, 12.0, 1), 0.3, 1)
    assert fs_fitness(FeatureMask([1, 0]), tr, va, 0.0, 200, 0) < 0.05


def test_mask_objective_cache_threadsafe(fs_split):
    tr, va = fs_split
    obj = MaskObjective(tr, va, 0.1, 10, 0)
    x = np.array([0.5, -0.5, 0.2, -0.1, 0.9, -0.3])
    out = []
    threads = [threading.Thread(target=lambda: out.append(obj(x))) for _ in range(8)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert len(set(out)) == 1 and len(obj.cache) == 1


def test_select_features_outputs(fs_split):
    tr, va = fs_split
    mask, freq, res = select_features(tr, va, SevEbConfig(pop_size=8, max_iters=10, seed=1))
    assert len(mask) == 6 and freq.shape == (6,)
    assert np.all((freq >= 0) & (freq <= 1))
    assert mask == binarize(res.x_best)
