"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from mvbayes import _core, _fallback
from mvbayes.validation import BinomialInstance, _branch_tables


def _cases(rng):
    T, B = 26, 1000
    mean = rng.normal(0.0, 0.01, (B, T))
    second = mean**2 + rng.uniform(5e-4, 2e-3, (B, T))
    probs = np.r_[np.full(T - 1, 0.001), 1 - 0.001 * (T - 1)]
    r0 = np.full(T, 1.0057)
    eps = rng.normal(0.0, 0.03, 100_000)
    phi = np.array([0.2, -0.1])
    lags = np.zeros(2)
    inst = BinomialInstance()
    grid = np.linspace(-10, 10, 201)
    Eu, E2u = _branch_tables(inst, grid, inst.up)
    Ed, E2d = _branch_tables(inst, grid, inst.down)
    return {
        "dp_backward (1000 x 26)": lambda m: m.dp_backward(mean, second, r0, probs),
        "ar_recursion (1e5 steps, p=2)": lambda m: m.ar_recursion(0.001, phi, eps, lags),
        "grid search (201^3)": lambda m: m.max_two_state_objective(Eu, E2u, Ed, E2d, 1.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _core.BACKEND != "cython":
        print("compiled extension not available; only the fallback can be timed")
    compiled = _core._impl, _core._grid
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'compiled [ms]':>14s} {'numpy [ms]':>12s} {'speed-up':>9s}")
    for name, fn in _cases(rng).items():
        mod = compiled[1] if name.startswith("grid") else compiled[0]
        t_c = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) * 1e3
        t_p = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:32s} {t_c:14.3f} {t_p:12.3f} {t_p / t_c:9.1f}x")


if __name__ == "__main__":
    main()
