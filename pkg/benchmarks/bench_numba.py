"""Wall-clock comparison of the numba and numpy backends.

Usage: python benchmarks/bench_numba.py [--repeat 3] [--n-uniform 2000] [--modes 64]

Each backend runs in a fresh interpreter (the backend is fixed at import
time by FRACSPEC_DISABLE_NUMBA). JIT compilation is excluded by a warm-up.
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from fracspec._accel import backend
from fracspec.mittag_leffler import ml
from fracspec.problem_model import load_problem
from fracspec.spectral_basis import Coefficients, Interval, build_basis
from fracspec.weak_solver import TimeGrid, solve_modes

repeat, n_uniform, modes = map(int, sys.argv[1:4])
z = -np.geomspace(1e-6, 1e3, 200_000)
p = load_problem("[problem]\nalpha = 0.5\nchi = 0\nT = 1\n[data]\nf = sin(t), 0\nu0 = 0\n")
basis = build_basis(Interval(), Coefficients(), 0, modes, max(800, 10 * modes))
grid = TimeGrid.build(1.0, n_uniform, h_min=1e-8)

def best(fn):
    fn()  # warm-up / JIT
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

out = {
    "backend": backend(),
    "ml_200k": best(lambda: ml(0.5, 1.0, z)),
    "solve_modes": best(lambda: solve_modes(p, basis, grid)),
}
print(json.dumps(out))
"""


def run(disable, args):
    env = dict(os.environ, FRACSPEC_DISABLE_NUMBA=disable, FRACSPEC_THREADS="1")
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, str(args.repeat), str(args.n_uniform), str(args.modes)],
        capture_output=True, text=True, env=env, check=True,
    )
    return json.loads(proc.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n-uniform", type=int, default=2000)
    ap.add_argument("--modes", type=int, default=64)
    args = ap.parse_args()
    fast, slow = run("0", args), run("1", args)
    print(f"{'case':<14}{fast['backend'] + ' [s]':>14}{slow['backend'] + ' [s]':>14}{'speedup':>10}")
    for key in ("ml_200k", "solve_modes"):
        print(f"{key:<14}{fast[key]:>14.4f}{slow[key]:>14.4f}{slow[key] / fast[key]:>10.2f}")


if __name__ == "__main__":
    main()
