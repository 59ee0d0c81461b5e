"""Time the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Both implementations are imported directly, so the comparison does not
depend on ``RELPOV_PURE_PYTHON``. Each kernel is checked for agreement
before it is timed.
"""
import argparse
import timeit

import numpy as np

from relpov import _kernels_py as py
from relpov import dists

try:
    from relpov import _ckernels as cy
except ImportError:
    cy = None


def cases():
    s = dists.sample(dists.Lognormal(0.0, 1.0), 1000, 1).values
    rng = np.random.default_rng(2)
    idx = rng.integers(0, s.size, size=(200, s.size), dtype=np.int64)
    u = np.arange(1, 10) / 10.0
    x = np.ascontiguousarray(dists.GLD(0.0, 1.0, 0.2, 0.4).quantile(u))
    grid = np.linspace(0.001, 0.999, 2000)
    return [
        ("qdensity n=1000", lambda k: k.qdensity(s, 0.5, 0.1)),
        ("bootstrap 200x1000", lambda k: k.bootstrap_headcounts(s, idx, 0.5)),
        ("gld_quantile 2000", lambda k: k.gld_quantile(grid, 0.0, 1.0, 0.2, 0.4)),
        ("gld_cdf 200", lambda k: k.gld_cdf(x[:1].repeat(200), 0.0, 1.0, 0.2, 0.4)),
        ("gld_nelder_mead deciles", lambda k: k.gld_nelder_mead(u, x, 0.5, 0.5)),
    ]


def best_time(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled kernels not built; timing the pure-Python fallback only")
    print(f"{'kernel':<26}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for name, call in cases():
        t_py = best_time(lambda: call(py), args.repeat)
        if cy is None:
            print(f"{name:<26}{t_py * 1e3:>10.3f}ms")
            continue
        np.testing.assert_allclose(np.asarray(call(cy), dtype=float),
                                   np.asarray(call(py), dtype=float), rtol=1e-8, atol=1e-12)
        t_cy = best_time(lambda: call(cy), args.repeat)
        print(f"{name:<26}{t_py * 1e3:>10.3f}ms{t_cy * 1e3:>10.3f}ms{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
