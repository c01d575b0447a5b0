"""Compare the compiled kernels with the pure-Python fallback.

Times the Perron eigenpair and the simplex on problem sizes the solvers
actually see, then one end-to-end solve per backend (each in a fresh
interpreter so the import-time backend choice applies).

    python benchmarks/bench_kernels.py --repeat 200
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from gsinrfb import _kernels_py

try:
    from gsinrfb import _kernels
except ImportError:  # extension not built
    _kernels = None

SOLVE_SNIPPET = """
import time
from gsinrfb import BACKEND, SystemConfig, generate_channel, solve_pr
cfg = SystemConfig(K=4, M=8, N=2, p_max=10.0**1.4)
t0 = time.perf_counter()
for seed in range({trials}):
    solve_pr(cfg, generate_channel(cfg, seed), "{method}")
print(BACKEND, time.perf_counter() - t0)
"""


def coupling_matrix(rng, K):
    dpsi = rng.random((K, K)) * 0.2
    np.fill_diagonal(dpsi, 0.0)
    ds = rng.random(K) + 0.1
    P = 100.0
    top = np.hstack([dpsi, ds[:, None]])
    bottom = np.append(dpsi.sum(axis=0), ds.sum()) / P
    return np.vstack([top, bottom])


def lp_instance(rng, K, per_user):
    n = K * per_user
    g = rng.random((K, n))
    A = -g
    for k in range(K):
        sl = slice(k * per_user, (k + 1) * per_user)
        A[k, sl] = g[k, sl] * 4.0
    return A, np.full(K, float(per_user))


def time_kernels(repeat):
    rng = np.random.default_rng(0)
    cases = [
        ("perron K=4", "perron_pair", (coupling_matrix(rng, 4), 1e-10, 10_000)),
        ("perron K=16", "perron_pair", (coupling_matrix(rng, 16), 1e-10, 10_000)),
        ("simplex K=2 L=8", "simplex_min_sum", (*lp_instance(rng, 2, 4), 1e-11, 1e-9, 10_000)),
        ("simplex K=4 L=16", "simplex_min_sum", (*lp_instance(rng, 4, 4), 1e-11, 1e-9, 10_000)),
    ]
    mods = [("python", _kernels_py)] + ([("compiled", _kernels)] if _kernels else [])
    print(f"{'kernel':<20}" + "".join(f"{name:>14}" for name, _ in mods) + f"{'speedup':>10}")
    for label, fn, args in cases:
        us = []
        for _, mod in mods:
            f = getattr(mod, fn)
            us.append(min(timeit.repeat(lambda: f(*args), number=repeat, repeat=3)) / repeat * 1e6)
        speed = f"{us[0] / us[1]:>9.1f}x" if len(us) > 1 else ""
        print(f"{label:<20}" + "".join(f"{u:>11.1f} us" for u in us) + speed)


def time_solves(trials, method):
    for pure in ("1", "0"):
        env = dict(os.environ, GSINRFB_PURE_PYTHON=pure)
        code = SOLVE_SNIPPET.format(trials=trials, method=method)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"solve_pr {method} x{trials} [{backend}]: {float(secs):.2f} s")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200, help="calls per kernel timing")
    ap.add_argument("--trials", type=int, default=20, help="channel draws for the end-to-end timing")
    ap.add_argument("--method", default="group")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not importable; timing the fallback only")
    time_kernels(args.repeat)
    time_solves(args.trials, args.method)


if __name__ == "__main__":
    main()
