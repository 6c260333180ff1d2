"""Compiled vs pure-numpy kernel timings.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Kernel rows time each backend function directly. End-to-end rows run a
short Algorithm-level workload in a subprocess per backend, selected with
the GQCOPT_PURE_PYTHON environment variable.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from gqcopt import _kernels_py

try:
    from gqcopt import _kernels as _compiled
except ImportError:
    _compiled = None

END_TO_END = {
    "run_min mdp(8,4) T=2000": (
        "from gqcopt.mdp import random_mdp, npg_internal_function\n"
        "from gqcopt.omd_min import run_min\n"
        "run_min(npg_internal_function(random_mdp(8, 4, 0.9, 0)), T=2000, eta=0.5)"),
    "run_minimax game(5,3,3) T=2000": (
        "from gqcopt.markov_game import game_internal_operator, game_schedule, p_tensor, random_game\n"
        "from gqcopt.omd_minimax import run_minimax\n"
        "g = random_game(5, 3, 3, 0.5, 0)\n"
        "run_minimax(game_internal_operator(g), p_tensor(g), game_schedule(g, 2000), checkpoints=[])"),
    "shapley game(5,3,3) tol=1e-6": (
        "from gqcopt.markov_game import random_game, shapley_fixed_point\n"
        "shapley_fixed_point(random_game(5, 3, 3, 0.8, 0))"),
}


def kernel_cases():
    rng = np.random.default_rng(0)
    offsets = np.arange(0, 33, 4, dtype=np.int64)
    log_g = np.log(rng.dirichlet(np.ones(32)))
    f = rng.normal(size=32)
    A = rng.uniform(size=(3, 3))
    Q = rng.uniform(size=(5, 3, 3))
    x = rng.dirichlet(np.ones(3), size=5)
    y = rng.dirichlet(np.ones(3), size=5)
    P = rng.dirichlet(np.ones(5), size=(5, 3, 3))
    return {
        "tilted_softmax 8x4": lambda k: k.tilted_softmax(log_g, f, offsets, 0.7, 0.3),
        "omwu_solve 3x3 tol=1e-9": lambda k: k.omwu_solve(A, 1.0, 1e-9, 10 ** 6, 10, np.zeros(3), np.zeros(3)),
        "game_operator 5x3x3": lambda k: k.game_operator(Q, x, y),
        "game_p_map 5x3x3": lambda k: k.game_p_map(Q, P, Q, x, y, 0.8),
    }


def best_of(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def end_to_end(code, pure, repeat):
    env = dict(os.environ)
    env.pop("GQCOPT_PURE_PYTHON", None)
    if pure:
        env["GQCOPT_PURE_PYTHON"] = "1"
    stmt = f"import timeit\nprint(min(timeit.repeat({code!r}, number=1, repeat={repeat})))"
    out = subprocess.run([sys.executable, "-c", stmt], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _compiled is None:
        print("compiled extension not built; only the python backend is available")
    print(f"{'workload':36s} {'python':>12s} {'compiled':>12s} {'speedup':>8s}")
    for name, fn in kernel_cases().items():
        t_py = best_of(lambda: fn(_kernels_py), args.repeat)
        t_c = best_of(lambda: fn(_compiled), args.repeat) if _compiled else float("nan")
        print(f"{name:36s} {t_py * 1e6:10.1f}us {t_c * 1e6:10.1f}us {t_py / t_c:7.1f}x")
    for name, code in END_TO_END.items():
        t_py = end_to_end(code, True, args.repeat)
        t_c = end_to_end(code, False, args.repeat) if _compiled else float("nan")
        print(f"{name:36s} {t_py:11.3f}s {t_c:11.3f}s {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
