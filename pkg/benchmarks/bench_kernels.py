"""Compare the compiled and pure-Python Metropolis kernels.

Both backends consume the same pre-drawn random streams, so the script also
checks that they produce identical chains before reporting timings.

    python benchmarks/bench_kernels.py [--steps 200000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from nttcompress import kernels
from nttcompress.models import make_model, mcmc_sample


def time_backend(spec, backend, n, thinning, repeat, seed):
    best = float("inf")
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = mcmc_sample(spec, n, burn_in=0, thinning=thinning, rng=np.random.default_rng(seed),
                          backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000, help="Metropolis steps per run")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if kernels.BACKEND != "cython":
        print("compiled kernel not available; only the Python backend can run")
        return 1
    thinning = 10
    n = args.steps // thinning
    print(f"{'model':<10} {'python s':>10} {'cython s':>10} {'speedup':>8}  identical")
    for name in ("gl", "gibbs", "heavytail", "ising"):
        spec = make_model(name, d=30, n=50)
        t_py, a = time_backend(spec, "python", n, thinning, args.repeat, args.seed)
        t_cy, b = time_backend(spec, "cython", n, thinning, args.repeat, args.seed)
        print(f"{name:<10} {t_py:>10.3f} {t_cy:>10.3f} {t_py / t_cy:>7.1f}x  {np.array_equal(a, b)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
