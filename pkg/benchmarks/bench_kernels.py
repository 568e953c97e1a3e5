"""Compare the compiled and pure-numpy flip-flop kernels.

Times single fits over a range of group counts and dimensions, then a short
Monte Carlo level study under each backend (selected through the
``PROPCOV_PURE_PYTHON`` environment variable in a subprocess).

    python3 benchmarks/bench_kernels.py [--repeat 200] [--reps 500]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from propcov import _fallback

try:
    from propcov import _kernels
except ImportError:
    _kernels = None

SHAPES = [(2, 1), (3, 2), (3, 5), (6, 5), (4, 10), (8, 20)]

STUDY = """
import time, numpy as np, propcov
from propcov.montecarlo import SimConfig, run_level_study
cfg = SimConfig([1.0, 1.0, 1.0], np.array([[1.0, 0.3], [0.3, 2.0]]), [500], reps={reps}, seed=0)
t0 = time.perf_counter(); run_level_study(cfg)
print(propcov.BACKEND, time.perf_counter() - t0)
"""


def make_data(rng, K, p, n=200):
    S = []
    for k in range(K):
        X = rng.standard_normal((n + 1, p)) * np.sqrt(1.0 + k)
        S.append(np.cov(X, rowvar=False).reshape(p, p))
    return np.ascontiguousarray(S), np.full(K, float(n))


def per_call(fn, S, n, repeat):
    return min(timeit.repeat(lambda: fn(S, n), number=repeat, repeat=3)) / repeat


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200, help="fits per timing run")
    ap.add_argument("--reps", type=int, default=500, help="replications in the study comparison")
    args = ap.parse_args()
    if _kernels is None:
        sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation` first")

    rng = np.random.default_rng(0)
    print(f"{'K':>3} {'p':>3} {'sweeps':>6} {'cython us':>10} {'numpy us':>10} {'speedup':>8}")
    for K, p in SHAPES:
        S, n = make_data(rng, K, p)
        sweeps = _kernels.flipflop(S, n)[2]
        tc = per_call(_kernels.flipflop, S, n, args.repeat)
        tp = per_call(_fallback.flipflop, S, n, args.repeat)
        print(f"{K:>3} {p:>3} {sweeps:>6} {tc * 1e6:>10.1f} {tp * 1e6:>10.1f} {tp / tc:>7.1f}x")

    print(f"\nlevel study, K=3 p=2 N=500, {args.reps} replications:")
    for pure in ("0", "1"):
        out = subprocess.run([sys.executable, "-c", STUDY.format(reps=args.reps)],
                             env={**os.environ, "PROPCOV_PURE_PYTHON": pure},
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:<7} {float(out[1]):.2f} s")


if __name__ == "__main__":
    main()
