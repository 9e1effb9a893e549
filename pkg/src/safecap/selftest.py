"""Quick built-in property checks behind ``cap selftest``.

Each check is small enough that the whole set runs in a few seconds; the
full suites live in the test directory.
"""

from __future__ import annotations

import time

import numpy as np

from . import controller, kernels
from .ccem import CcemConfig, plan
from .cmdp import Policy, evaluate_policy, random_cmdp, simulation_gap_check, tv_table
from .ensemble import EnsembleModel, CostModel
from .harness import RunConfig, records_csv, run_gridworld_seed
from .planner import InfeasibleError, PenaltyWeighting, solve_cmdp, solve_conservative


def _value_iteration(cmdp, tol=1e-12):
    v = np.zeros(cmdp.n_states)
    while True:
        q = cmdp.reward + cmdp.discount * cmdp.transition @ v
        v2 = q.max(axis=1)
        if np.abs(v2 - v).max() < tol:
            return float(cmdp.initial_dist @ v2)
        v = v2


def check_simulation_bound(n=50, seed=0) -> bool:
    rng = np.random.default_rng(seed)
    for _ in range(n):
        S, A = rng.integers(2, 7), rng.integers(1, 4)
        true = random_cmdp(rng, S, A)
        hat = true.replace(transition=rng.dirichlet(np.ones(S), size=(S, A)))
        pi = Policy(rng.dirichlet(np.ones(A), size=S))
        gap = simulation_gap_check(true, hat, pi)
        if gap.lhs > gap.rhs + 1e-9:
            return False
    return True


def check_unconstrained_lp(n=10, seed=1) -> bool:
    rng = np.random.default_rng(seed)
    for _ in range(n):
        m = random_cmdp(rng, 4, 3, cost_limit=1e6)
        if abs(solve_cmdp(m).model_ret - _value_iteration(m)) > 1e-6:
            return False
    return True


def check_feasibility_transfer(n=20, seed=2) -> bool:
    rng = np.random.default_rng(seed)
    solved = 0
    for _ in range(n):
        S, A = 4, 2
        true = random_cmdp(rng, S, A, discount=0.8)
        noise = rng.dirichlet(np.ones(S), size=(S, A))
        hat_T = 0.95 * true.transition + 0.05 * noise
        u = tv_table(hat_T, true.transition)
        limit = float(evaluate_policy(true, Policy.uniform(S, A)).cost) * rng.uniform(0.8, 1.3)
        hat = true.replace(transition=hat_T, cost_limit=limit)
        try:
            res = solve_conservative(hat, PenaltyWeighting.certified(u, beta=1.0 / (1.0 - hat.discount)))
        except InfeasibleError:
            continue
        solved += 1
        if evaluate_policy(true, res.policy).cost > limit + 1e-6:
            return False
    return solved >= n // 2


def check_lp_backends(seed=3) -> bool:
    rng = np.random.default_rng(seed)
    mods = kernels.backends()
    if len(mods) < 2:
        return True
    for _ in range(5):
        A = rng.normal(size=(6, 10))
        b = np.abs(rng.normal(size=6)) + 1
        c = rng.normal(size=10)
        outs = []
        for mod in mods.values():
            T = np.zeros((7, 17))
            T[:6, :10] = A
            T[:6, 10:16] = np.eye(6)
            T[:6, 16] = b
            T[6, :10] = c
            basis = np.arange(10, 16, dtype=np.int64)
            allowed = np.ones(16, dtype=np.uint8)
            mod.simplex_iterate(T, basis, allowed, 1e-10, 1e-9, 50, 1000)
            outs.append(T.copy())
        if not np.array_equal(outs[0], outs[1]):
            return False
    return True


def check_controller_replay() -> bool:
    costs = np.random.default_rng(4).uniform(0, 0.2, size=30)
    state = controller.ControllerState(0.5, 0.1)
    for c in costs:
        controller.update(state, c, 0.1)
    return [k for _, k in state.history] == controller.replay(0.5, 0.1, costs, 0.1)


def check_ccem_quadratic() -> bool:
    # one-step identity model whose next state is the action
    model = EnsembleModel(np.tile(np.array([[[-1.0, 1.0, 0.0]]]), (2, 1, 1)), np.full((2, 1), 1e-8))
    cost = CostModel(np.zeros(3), 0.0)
    cfg = CcemConfig(horizon=1, particles=2)
    seq = plan(model, cost, np.zeros(1), np.inf, 0.0, cfg, 0, lambda s, a, s2: -(s2[..., 0] - 0.3) ** 2)
    return abs(seq[0, 0] - 0.3) < 1e-2


def check_determinism() -> bool:
    cfg = RunConfig(episodes=3)
    return records_csv(run_gridworld_seed(cfg, 0)) == records_csv(run_gridworld_seed(cfg, 0))


CHECKS = [
    ("simulation bound on random CMDP pairs", check_simulation_bound),
    ("unconstrained LP equals value iteration", check_unconstrained_lp),
    ("oracle-penalty feasibility transfer", check_feasibility_transfer),
    ("compiled and pure simplex agree", check_lp_backends),
    ("kappa trace replays exactly", check_controller_replay),
    ("CCEM recovers a quadratic optimum", check_ccem_quadratic),
    ("gridworld run is deterministic", check_determinism),
]


def run_all(verbose: bool = False) -> bool:
    ok = True
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        passed = bool(fn())
        ok &= passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'} {name} ({time.perf_counter() - t0:.2f}s)")
    if verbose:
        print(f"backend: {kernels.BACKEND}")
    return ok
