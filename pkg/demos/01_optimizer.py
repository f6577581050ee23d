"""Watch the population optimizer on three classic test functions.

Run:  python demos/01_optimizer.py
"""
import time

import numpy as np

from valleyforge.sev_eb import (
    DOMAINS,
    SearchSpace,
    SevEbConfig,
    optimize,
    random_search,
    rastrigin,
    rosenbrock,
    sphere,
    stability_bound,
)

# The stability bound depends only on the best and worst fitness of the
# current population; the particle's own fitness cancels out.
print("SB for cu in 3..9 with bst=2, wst=10:",
      [round(stability_bound(2.0, cu, 10.0), 4) for cu in range(3, 10)])

# Sphere in 10 dimensions. history[t] is the best value after iteration t.
space = SearchSpace.box(*DOMAINS["sphere"], 10)
res = optimize(sphere, space, SevEbConfig(pop_size=30, max_iters=500, seed=0))
for t in (0, 50, 100, 200, 300, 400, 500):
    print(f"  iter {t:>3}  best {res.history[t]:.3e}")

# Same number of evaluations spent on uniform sampling.
rnd = random_search(sphere, space, res.n_evals, seed=1)
print(f"sphere d=10: optimizer {res.f_best:.2e}  random {rnd.f_best:.2e}  ({res.n_evals} evals)")

# Rastrigin is multimodal; Rosenbrock has a curved valley.
for name, fn, dim in (("rastrigin", rastrigin, 5), ("rosenbrock", rosenbrock, 5)):
    space = SearchSpace.box(*DOMAINS[name], dim)
    finals, baseline = [], []
    t0 = time.perf_counter()
    for seed in range(5):
        r = optimize(fn, space, SevEbConfig(pop_size=30, max_iters=500, seed=seed))
        finals.append(r.f_best)
        baseline.append(random_search(fn, space, r.n_evals, seed + 100).f_best)
    print(f"{name} d={dim}: median {np.median(finals):.3g} vs random {np.median(baseline):.3g} "
          f"({time.perf_counter() - t0:.1f} s for 5 seeds)")

# Parallel fitness evaluation does not change the answer.
space = SearchSpace.box(-5.12, 5.12, 4)
a = optimize(sphere, space, SevEbConfig(pop_size=12, max_iters=50, seed=3))
b = optimize(sphere, space, SevEbConfig(pop_size=12, max_iters=50, seed=3, n_workers=4))
print("serial == 4 threads:", np.array_equal(a.x_best, b.x_best))
