"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--L 600 20000 65536] [--repeat 200]

Also times one full ROBB solve per backend. Prints one row per
(kernel, L) with the per-call time of each backend and the speedup.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from rbdeconv import _purecore

try:
    from rbdeconv import _fastcore
except ImportError:
    _fastcore = None


def kernel_rows(sizes, repeat):
    rows = []
    rng = np.random.default_rng(0)
    for L in sizes:
        bh, cm, y = (rng.standard_normal(L) + 1j * rng.standard_normal(L) for _ in range(3))
        cases = {
            "residual": lambda m: m.residual(bh, cm, y),
            "penalty_terms": lambda m: m.penalty_terms(bh, 0.3),
            "clip_magnitudes": lambda m: m.clip_magnitudes(bh, 1.0),
        }
        for name, call in cases.items():
            pure = min(timeit.repeat(lambda: call(_purecore), number=repeat, repeat=3)) / repeat
            fast = min(timeit.repeat(lambda: call(_fastcore), number=repeat, repeat=3)) / repeat if _fastcore else float("nan")
            rows.append((name, L, pure, fast))
    return rows


SOLVE = """
import time
from rbdeconv import BACKEND
from rbdeconv.experiments.runners import initialize, solve, synthetic_trial
from rbdeconv.solvers import SolverConfig
t = synthetic_trial(600, 100, 100, seed=0)
x0, d = initialize(t.op, t.y, seed=0)
t0 = time.perf_counter()
for _ in range(5):
    solve("ROBB", t, x0, d, SolverConfig())
print(BACKEND, (time.perf_counter() - t0) / 5)
"""


def solve_time(pure):
    env = dict(os.environ)
    if pure:
        env["RBDECONV_PURE"] = "1"
    else:
        env.pop("RBDECONV_PURE", None)
    out = subprocess.run([sys.executable, "-c", SOLVE], capture_output=True, text=True, env=env, check=True)
    backend, seconds = out.stdout.split()
    return backend, float(seconds)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--L", type=int, nargs="+", default=[600, 20000, 65536])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)
    if _fastcore is None:
        print("compiled extension not built; only the fallback is timed")
    print(f"{'kernel':<16} {'L':>7} {'python us':>10} {'cython us':>10} {'speedup':>8}")
    for name, L, pure, fast in kernel_rows(args.L, args.repeat):
        print(f"{name:<16} {L:>7} {pure * 1e6:>10.1f} {fast * 1e6:>10.1f} {pure / fast:>8.2f}")
    for pure in (True, False):
        backend, seconds = solve_time(pure)
        print(f"ROBB solve, K=N=100, L=600, backend {backend}: {seconds * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
