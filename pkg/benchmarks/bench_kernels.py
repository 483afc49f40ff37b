"""Timing comparison of the compiled and pure-numpy distance kernels.

Run:  python3 benchmarks/bench_kernels.py [n] [p]

The compiled path is whatever `graphssl._kernels` selected at import
(numba unless GRAPHSSL_NUMBA=0); the numpy fallback is always timed from
its direct reference.  Also times a quantizer stream replay, the main
consumer of the cross-distance kernel.
"""

import sys
import time

import numpy as np

from graphssl import QuantizerState
from graphssl import _kernels


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    p = int(sys.argv[2]) if len(sys.argv) > 2 else 8
    rng = np.random.default_rng(0)
    x = rng.normal(size=(n, p))
    psi = rng.random(p)

    print(f"active path: {'numba' if _kernels.USING_NUMBA else 'numpy'}  (n={n}, p={p})")
    _kernels.pairwise_sq_dists(x, psi)  # warm up any jit compilation

    t_active = timeit(_kernels.pairwise_sq_dists, x, psi)
    t_numpy = timeit(_kernels._pairwise_sq_dists_numpy, x, psi)
    print(f"pairwise_sq_dists  active {t_active * 1e3:8.2f} ms   numpy {t_numpy * 1e3:8.2f} ms")

    a, b = x[: n // 2], x[n // 2:]
    _kernels.cross_sq_dists(a, b, psi)
    t_active = timeit(_kernels.cross_sq_dists, a, b, psi)
    t_numpy = timeit(_kernels._cross_sq_dists_numpy, a, b, psi)
    print(f"cross_sq_dists     active {t_active * 1e3:8.2f} ms   numpy {t_numpy * 1e3:8.2f} ms")

    stream = rng.random((20_000, p))

    def replay():
        state = QuantizerState(64, 1.5)
        for row in stream:
            state.observe(row)

    replay()
    print(f"quantizer replay (20k points, k=64): {timeit(replay, repeat=3):8.3f} s")


if __name__ == "__main__":
    main()
