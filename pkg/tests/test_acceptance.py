"""Acceptance criteria, one test each.

Every test records a ``criterion N: PASS|FAIL ...`` line which pytest echoes
in its terminal summary. Running this file directly prints the same lines.
"""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import grid_search_2x2, value_iteration
from safecap.ccem import CcemConfig, plan
from safecap.cmdp import Policy, evaluate_policy, random_cmdp, simulation_gap_check, tv_table
from safecap.ensemble import CostModel, EnsembleModel
from safecap.envs import PointMassSpec
from safecap.harness import RunConfig, pointmass_limits, run
from safecap.planner import InfeasibleError, PenaltyWeighting, min_cost_fallback, solve_cmdp, solve_conservative
from safecap.tabular import CountTable, certified_penalty, fit_transitions

TESTS = Path(__file__).parent

# point-mass budget that fits the 20 minute limit on one core; see the project notes
POINTMASS = dict(episodes=30, eval_episodes=1, population=100, elites=10, iterations=3, replan_every=5)


def line(n, ok, detail, seconds):
    return f"criterion {n}: {'PASS' if ok else 'FAIL'} ({seconds:.1f}s) {detail}"


def binding_limit(m, frac):
    floor = min_cost_fallback(m, PenaltyWeighting.none()).model_cost
    top = evaluate_policy(m, solve_cmdp(m.replace(cost_limit=1e9)).policy).cost
    return floor + frac * (top - floor) + 1e-9


def criterion_1():
    rng = np.random.default_rng(1)
    held = 0
    for _ in range(200):
        S, A = int(rng.integers(2, 7)), int(rng.integers(1, 4))
        true = random_cmdp(rng, S, A)
        hat = true.replace(transition=rng.dirichlet(np.ones(S), size=(S, A)))
        pi = Policy(rng.dirichlet(np.ones(A), size=S))
        gap = simulation_gap_check(true, hat, pi, beta=1.0 / (1.0 - true.discount))
        held += gap.lhs <= gap.rhs + 1e-9
    return held == 200, f"bound held in {held}/200 pairs", 10


def criterion_2():
    rng = np.random.default_rng(2)
    solved = ok = 0
    for _ in range(100):
        true = random_cmdp(rng, 4, 2, discount=0.8)
        hat_T = 0.95 * true.transition + 0.05 * rng.dirichlet(np.ones(4), size=(4, 2))
        true = true.replace(cost_limit=binding_limit(true, rng.uniform(0.3, 1.0)))
        hat = true.replace(transition=hat_T)
        w = PenaltyWeighting.certified(tv_table(hat_T, true.transition), beta=1.0 / (1.0 - true.discount))
        try:
            res = solve_conservative(hat, w)
        except InfeasibleError:
            continue
        solved += 1
        ok += evaluate_policy(true, res.policy).cost <= true.cost_limit + 1e-6
    # a vacuous pass (nothing feasible) is not a pass
    return ok == solved and solved >= 50, f"{ok}/{solved} feasible conservative policies truly feasible", 30


def criterion_3():
    rng = np.random.default_rng(3)
    S, A, n, delta, trials = 4, 2, 200, 0.1, 500
    held = binding = 0
    for _ in range(trials):
        true = random_cmdp(rng, S, A, discount=0.8)
        n_sas = np.array([[rng.multinomial(n, true.transition[s, a]) for a in range(A)] for s in range(S)])
        counts = CountTable(n_sas)
        hat = true.replace(transition=fit_transitions(counts))
        w = PenaltyWeighting.certified(certified_penalty(counts, delta).u, beta=1.0 / (1.0 - true.discount))
        floor = min_cost_fallback(hat, w).model_cost
        top = solve_conservative(hat.replace(cost_limit=1e9), w).model_cost
        limit = floor + 0.5 * (top - floor) + 1e-9
        res = solve_conservative(hat.replace(cost_limit=limit), w)
        binding += res.model_cost >= limit - 1e-6
        held += evaluate_policy(true, res.policy).cost <= limit + 1e-9
    p = 1 - delta
    need = p - 3 * np.sqrt(p * (1 - p) / trials)
    freq = held / trials
    return freq >= need, f"true feasibility {freq:.3f} >= {need:.3f} ({binding} constraints binding)", 300


def criterion_4():
    rng = np.random.default_rng(4)
    gaps_raw, gaps_step, one_sided = [], [], True
    for _ in range(20):
        m = random_cmdp(rng, 2, 2)
        m = m.replace(cost_limit=binding_limit(m, 0.5))
        lp_value, grid = solve_cmdp(m).model_ret, grid_search_2x2(m)
        one_sided &= lp_value >= grid - 1e-9
        gaps_raw.append(lp_value - grid)
        gaps_step.append((1 - m.discount) * (lp_value - grid))
    vi = 0.0
    for _ in range(20):
        m = random_cmdp(rng, 5, 3)
        m = m.replace(cost_limit=1.0 / (1.0 - m.discount))
        vi = max(vi, abs(solve_cmdp(m).model_ret - value_iteration(m)))
    ok = one_sided and max(gaps_raw) <= 2e-3 and vi <= 1e-6
    return ok, (f"grid gap max {max(gaps_raw):.2e} (per step {max(gaps_step):.2e}), "
                f"LP never below grid: {one_sided}; VI gap {vi:.1e}"), 60


def _grid_stats(mode, seeds=100):
    runs = run(RunConfig(mode=mode, seeds=seeds))
    final = [recs[-1] for recs in runs.values()]
    return (np.mean([r.true_cost for r in final]), np.mean([r.cum_violations for r in final]),
            np.mean([r.true_ret for r in final]))


_GRID_CACHE = {}


def grid_stats(mode):
    if mode not in _GRID_CACHE:
        _GRID_CACHE[mode] = _grid_stats(mode)
    return _GRID_CACHE[mode]


def criterion_5():
    cost, viol, ret = grid_stats("adaptive")
    _, _, oracle_ret = grid_stats("oracle")
    _, viol0, _ = grid_stats("fixed:0")
    parts = {
        "cost<=0.105": cost <= 0.105,
        "violations<=1": viol <= 1.0,
        "return>=0.85*oracle": ret >= 0.85 * oracle_ret,
        "fixed0 violations>=3 and >=3x adaptive": viol0 >= 3.0 and viol0 >= 3 * viol,
    }
    detail = (f"adaptive cost {cost:.4f}, violations {viol:.2f}, return {ret:.4f} vs oracle {oracle_ret:.4f}; "
              f"fixed(0) violations {viol0:.2f}; failed: {[k for k, v in parts.items() if not v] or 'none'}")
    return all(parts.values()), detail, 15 * 60


def criterion_6():
    kappas = ("0", "0.01", "0.05", "0.1")
    viols = [float(grid_stats(f"fixed:{k}")[1]) for k in kappas]
    inversions = sum(b > a for a, b in zip(viols, viols[1:]))
    return inversions <= 1, f"violations {[round(v, 2) for v in viols]} with {inversions} inversions", 15 * 60


def criterion_7():
    model = EnsembleModel(np.zeros((1, 1, 3)), np.full((1, 1), 1e-8))
    cfg = CcemConfig(population=500, elites=50, iterations=5, horizon=1)
    free = CostModel(np.zeros(3), 0.0)
    a1 = plan(model, free, [0.0], np.inf, 0.0, cfg, 0, lambda s, a, s2: -(a[..., 0] - 0.3) ** 2)[0, 0]
    linear = CostModel(np.array([0.0, 1.0, 0.0]), 0.0)
    a2 = plan(model, linear, [0.0], 0.0, 0.0, cfg, 0, lambda s, a, s2: a[..., 0])[0, 0]
    ok = abs(a1 - 0.3) <= 1e-2 and a2 <= 1e-2
    return ok, f"unconstrained action {a1:.4f} (target 0.3), constrained action {a2:.4f} (bound 0.01)", 20


def criterion_8():
    limit = pointmass_limits(PointMassSpec(), RunConfig().horizon)[0]
    out = {}
    for mode in ("fixed:0", "fixed:10", "adaptive"):
        runs = run(RunConfig(experiment="pointmass", mode=mode, seeds=10, **POINTMASS))
        out[mode] = dict(
            cost=np.array([np.mean([r.true_cost for r in recs[-10:]]) for recs in runs.values()]),
            ret=np.array([np.mean([r.ret for r in recs[-10:]]) for recs in runs.values()]),
            viol=np.array([recs[-1].cum_violations for recs in runs.values()]),
        )
    ad, f10, f0 = out["adaptive"], out["fixed:10"], out["fixed:0"]
    parts = {
        "adaptive cost<=1.05C": ad["cost"].mean() <= 1.05 * limit,
        "adaptive return>fixed(10)": ad["ret"].mean() > f10["ret"].mean(),
        "fixed(0) exceeds C in >=7/10": (f0["cost"] > limit).sum() >= 7,
        "adaptive violations<fixed(0) in >=8/10": (ad["viol"] < f0["viol"]).sum() >= 8,
    }
    detail = (f"C={limit:.2f}; cost/C adaptive {ad['cost'].mean() / limit:.3f}, fixed(0) {f0['cost'].mean() / limit:.3f}, "
              f"fixed(10) {f10['cost'].mean() / limit:.3f}; return adaptive {ad['ret'].mean():.2f} vs fixed(10) "
              f"{f10['ret'].mean():.2f}; fixed(0) over C in {(f0['cost'] > limit).sum()}/10; "
              f"failed: {[k for k, v in parts.items() if not v] or 'none'}")
    return all(parts.values()), detail, 20 * 60


def criterion_9():
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           str(TESTS / "test_controller.py")], capture_output=True, text=True, cwd=TESTS.parent)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()
    return proc.returncode == 0, f"controller suite: {tail}", 60


def criterion_10(tmp):
    outputs = []
    for name in ("a", "b"):
        out = Path(tmp) / name
        proc = subprocess.run([sys.executable, "-m", "safecap.cli", "gridworld", "--seeds", "5", "--mode", "adaptive",
                               "--out", str(out)], capture_output=True, text=True)
        if proc.returncode != 0:
            return False, f"run failed: {proc.stderr.strip()}", 60
        outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    same = outputs[0] == outputs[1] and len(outputs[0]) == 5
    return same, f"{len(outputs[0])} CSVs byte-identical: {same}", 60


def _check(n, fn, report, *args):
    t0 = time.perf_counter()
    ok, detail, budget = fn(*args)
    seconds = time.perf_counter() - t0
    in_time = seconds <= budget
    if not in_time:
        detail += f"; over the {budget}s budget"
    report(line(n, ok and in_time, detail, seconds))
    assert ok and in_time, detail


def test_criterion_1(acceptance_report):
    _check(1, criterion_1, acceptance_report)


def test_criterion_2(acceptance_report):
    _check(2, criterion_2, acceptance_report)


def test_criterion_3(acceptance_report):
    _check(3, criterion_3, acceptance_report)


def test_criterion_4(acceptance_report):
    _check(4, criterion_4, acceptance_report)


def test_criterion_5(acceptance_report):
    _check(5, criterion_5, acceptance_report)


def test_criterion_6(acceptance_report):
    _check(6, criterion_6, acceptance_report)


def test_criterion_7(acceptance_report):
    _check(7, criterion_7, acceptance_report)


@pytest.mark.slow
def test_criterion_8(acceptance_report):
    _check(8, criterion_8, acceptance_report)


def test_criterion_9(acceptance_report):
    _check(9, criterion_9, acceptance_report)


def test_criterion_10(acceptance_report, tmp_path):
    _check(10, criterion_10, acceptance_report, tmp_path)


if __name__ == "__main__":
    import tempfile

    sys.path.insert(0, str(TESTS))
    with tempfile.TemporaryDirectory() as tmp:
        for n in range(1, 11):
            fn = globals()[f"criterion_{n}"]
            try:
                _check(n, fn, print, *([tmp] if n == 10 else []))
            except AssertionError:
                pass
