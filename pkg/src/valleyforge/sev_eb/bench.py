"""Standard test functions for checking the optimizer."""

import numpy as np

from ..errors import UnknownFunction


def sphere(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum(x * x))


def rastrigin(x):
    x = np.asarray(x, dtype=np.float64)
    return float(10.0 * x.size + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)))


def rosenbrock(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


BENCHMARKS = {"sphere": sphere, "rastrigin": rastrigin, "rosenbrock": rosenbrock}

# conventional search domains
DOMAINS = {"sphere": (-5.12, 5.12), "rastrigin": (-5.12, 5.12), "rosenbrock": (-5.0, 10.0)}


def bench_fn(name: str, x) -> float:
    try:
        fn = BENCHMARKS[name]
    except KeyError:
        raise UnknownFunction(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None
    return fn(x)
