"""Compiled vs pure-Python kernel timings.

    python benchmarks/bench_kernels.py [--repeat 5]

Each workload runs through both backends on identical inputs; outputs are
compared before any timing is reported.
"""

import argparse
import time

import numpy as np

from safecap import _kernels_py, kernels
from safecap.cmdp import Policy
from safecap.envs import GridworldSpec, _cdf, generate_gridworld
from safecap.planner import solve_cmdp


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def with_backend(mod, fn):
    saved = kernels.simplex_iterate, kernels.pivot
    kernels.simplex_iterate, kernels.pivot = mod.simplex_iterate, mod.pivot
    try:
        return fn()
    finally:
        kernels.simplex_iterate, kernels.pivot = saved


def workloads():
    grid = generate_gridworld(GridworldSpec(seed=0))

    def simplex(mod):
        return lambda: with_backend(mod, lambda: solve_cmdp(grid).rho.rho)

    rng = np.random.default_rng(0)
    weights = rng.normal(scale=0.05, size=(5, 2, 4))
    start = np.zeros(2)
    seqs = rng.uniform(-1, 1, size=(500, 30, 1))
    members = np.arange(5, dtype=np.int64)

    def rollout(mod):
        return lambda: mod.ensemble_rollout(weights, start, seqs, members)[0]

    pol = _cdf(Policy.uniform(64, 4).probs)
    T = _cdf(grid.transition)
    mu = _cdf(grid.initial_dist)
    u = rng.random((100_000, 5))

    def tabular(mod):
        return lambda: mod.tabular_rollout(pol, T, grid.reward, grid.cost, mu, u, 100)[0]

    return {"simplex (8x8 gridworld LP)": simplex, "ensemble rollout (500x30, 5 particles)": rollout,
            "tabular rollout (100k steps)": tabular}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    found = kernels.backends()
    if "cython" not in found:
        raise SystemExit("compiled backend not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'workload':40s} {'cython':>10s} {'python':>10s} {'speedup':>8s}")
    for name, make in workloads().items():
        t_c, out_c = best_of(make(found["cython"]), args.repeat)
        t_p, out_p = best_of(make(_kernels_py), args.repeat)
        if not np.allclose(out_c, out_p, rtol=1e-12, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:40s} {t_c * 1e3:8.2f}ms {t_p * 1e3:8.2f}ms {t_p / t_c:7.1f}x")


if __name__ == "__main__":
    main()
