from .bench import BENCHMARKS, DOMAINS, bench_fn, rastrigin, rosenbrock, sphere
from .core import (
    IterationState,
    OptResult,
    Population,
    SearchSpace,
    SevEbConfig,
    evaluate,
    init_population,
    optimize,
    random_search,
    shrink_bounds,
    stability_bound,
    stability_level,
    select_survivors,
    update_positions,
)
from .selection import (
    EMPTY_MASK_FITNESS,
    MaskObjective,
    binarize,
    fs_fitness,
    select_features,
    train_surrogate,
)
