"""Benchmark the value-iteration sweep: numba kernel vs Python fallback.

Builds a random layered MDP (seeded, so both builds see identical work),
runs max-reachability to convergence with each kernel and reports wall
times.  Run:

    python3 bench/bench_value_iteration.py [--states 20000] [--branch 4]
"""

import argparse
import time

import numpy as np

from tickgraph.kernels import as_arrays, backend, python_sweep, sweep


def random_mdp(n_states: int, branch: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    choices = []
    for s in range(n_states):
        cs = []
        for _ in range(int(rng.integers(1, 3))):
            k = int(rng.integers(1, branch + 1))
            targets = rng.integers(0, n_states, size=k)
            weights = rng.random(k) + 0.01
            weights /= weights.sum()
            cs.append(("a", list(zip(targets.tolist(), weights.tolist()))))
        choices.append(cs)
    return choices


def converge(kernel, values, fixed, arrays, tol=1e-9, cap=100_000):
    sweeps = 0
    while True:
        delta = kernel(values, fixed, False, *arrays)
        sweeps += 1
        if delta < tol or sweeps >= cap:
            return sweeps


def run(kernel, name: str, arrays, n: int, target_mask):
    values = np.zeros(n)
    values[target_mask] = 1.0
    fixed = np.zeros(n, dtype=bool)
    fixed[target_mask] = True
    t0 = time.perf_counter()
    sweeps = converge(kernel, values, fixed, arrays)
    dt = time.perf_counter() - t0
    print(f"{name:>8}: {dt:8.3f}s  ({sweeps} sweeps, value[0] = {values[0]:.6f})")
    return dt, values


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--states", type=int, default=20_000)
    ap.add_argument("--branch", type=int, default=4)
    args = ap.parse_args()

    print(f"building a random MDP with {args.states} states ...")
    choices = random_mdp(args.states, args.branch)
    arrays = as_arrays(choices)
    target_mask = np.zeros(args.states, dtype=bool)
    target_mask[:: args.states // 100 or 1] = True

    py = python_sweep()
    t_py, v_py = run(py, "python", arrays, args.states, target_mask)

    if backend() != "numba":
        print("numba unavailable or disabled (TICKGRAPH_NUMBA=0); nothing to compare")
        return
    # warm up the JIT outside the timed region
    warm = np.zeros(args.states)
    warm_fixed = np.ones(args.states, dtype=bool)
    sweep(warm, warm_fixed, False, *arrays)
    t_nb, v_nb = run(sweep, "numba", arrays, args.states, target_mask)

    same = np.array_equal(v_py, v_nb)
    print(f"results bitwise identical: {same}")
    print(f"speedup: {t_py / t_nb:.1f}x")


if __name__ == "__main__":
    main()
