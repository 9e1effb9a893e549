import numpy as np
import pytest

from oracles import grid_search_2x2, value_iteration
from safecap.cmdp import Cmdp, Policy, evaluate_policy, random_cmdp, tv_table
from safecap.planner import (InfeasibleError, PenaltyWeighting, min_cost_fallback, solve_cmdp, solve_conservative)


def binding_limit(m, frac=0.5):
    """Limit halfway between the cheapest achievable cost and the unconstrained optimum's cost."""
    floor = min_cost_fallback(m, PenaltyWeighting.none()).model_cost
    top = evaluate_policy(m, solve_cmdp(m.replace(cost_limit=1e9)).policy).cost
    # small headroom keeps the cheapest policy strictly feasible despite rounding
    return floor + frac * (top - floor) + 1e-9


def test_single_state_mix():
    m = Cmdp(np.ones((1, 2, 1)), [[1.0, 0.0]], [[1.0, 0.0]], 0.5, [1.0], 1.0)
    res = solve_cmdp(m)
    assert res.policy.probs[0] == pytest.approx([0.5, 0.5], abs=1e-9)
    assert res.model_ret == pytest.approx(1.0, abs=1e-9)
    assert res.model_cost == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_unconstrained_matches_value_iteration(seed):
    m = random_cmdp(np.random.default_rng(seed), 5, 3)
    m = m.replace(cost_limit=1.0 / (1.0 - m.discount))
    assert solve_cmdp(m).model_ret == pytest.approx(value_iteration(m), abs=1e-6)


def test_infeasible_constant_cost():
    m = random_cmdp(np.random.default_rng(0), 3, 2)
    m = m.replace(cost=np.ones((3, 2)), cost_limit=0.1)
    with pytest.raises(InfeasibleError):
        solve_cmdp(m)


@pytest.mark.parametrize("seed", range(10))
def test_grid_search_oracle(seed):
    m = random_cmdp(np.random.default_rng(200 + seed), 2, 2)
    m = m.replace(cost_limit=binding_limit(m))
    lp_value = solve_cmdp(m).model_ret
    grid = grid_search_2x2(m)
    # the LP optimum can never lose to a grid policy; resolution error compared per step
    assert lp_value >= grid - 1e-9
    assert (1.0 - m.discount) * (lp_value - grid) <= 2e-3


@pytest.mark.parametrize("seed", range(5))
def test_zero_penalty_identity(seed):
    m = random_cmdp(np.random.default_rng(seed), 4, 2)
    m = m.replace(cost_limit=binding_limit(m))
    base = solve_cmdp(m)
    for w in (PenaltyWeighting.none(), PenaltyWeighting.adaptive(np.zeros((4, 2)), 3.0),
              PenaltyWeighting.certified(np.zeros((4, 2)), beta=5.0)):
        res = solve_conservative(m, w)
        assert np.array_equal(res.rho.rho, base.rho.rho)
        assert res.model_ret == base.model_ret


def test_feasibility_transfer_with_oracle_penalty():
    rng = np.random.default_rng(42)
    solved = 0
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
        assert evaluate_policy(true, res.policy).cost <= true.cost_limit + 1e-6
    assert solved >= 50


@pytest.mark.parametrize("seed", range(10))
def test_kappa_monotone(seed):
    rng = np.random.default_rng(300 + seed)
    m = random_cmdp(rng, 4, 3)
    m = m.replace(cost_limit=binding_limit(m, 0.8))
    u = rng.uniform(0, 0.2, size=(4, 3))
    rets = []
    for k in (0.0, 0.1, 1.0, 10.0):
        try:
            rets.append(solve_conservative(m, PenaltyWeighting.adaptive(u, k)).model_ret)
        except InfeasibleError:
            rets.append(-np.inf)
    assert all(a >= b - 1e-9 for a, b in zip(rets, rets[1:]))


@pytest.mark.parametrize("seed", range(5))
def test_constraint_respected(seed):
    rng = np.random.default_rng(400 + seed)
    m = random_cmdp(rng, 5, 2)
    m = m.replace(cost_limit=binding_limit(m))
    res = solve_conservative(m, PenaltyWeighting.adaptive(rng.uniform(0, 0.1, size=(5, 2)), 0.5))
    assert m.cost_limit - res.model_cost >= -1e-6
    assert res.rho.flow_residual(m) <= 1e-6


def test_fallback_constant_cost():
    m = random_cmdp(np.random.default_rng(1), 3, 2)
    m = m.replace(cost=np.ones((3, 2)), cost_limit=0.1)
    res = min_cost_fallback(m, PenaltyWeighting.none())
    assert res.model_cost == pytest.approx(1.0 / (1.0 - m.discount), abs=1e-9)
    assert not res.feasible


def test_fallback_finds_free_absorbing_action():
    # states 0 -> 1 -> 2 under either action; in state 2, action 1 self-loops at zero cost
    T = np.zeros((3, 2, 3))
    T[0, :, 1] = 1.0
    T[1, :, 2] = 1.0
    T[2, 0, 0] = 1.0
    T[2, 1, 2] = 1.0
    c = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 0.0]])
    m = Cmdp(T, np.zeros((3, 2)), c, 0.9, [1.0, 0.0, 0.0], 0.0)
    res = min_cost_fallback(m, PenaltyWeighting.none())
    assert res.policy.probs[2, 1] == pytest.approx(1.0)
    exact = evaluate_policy(m, res.policy).cost
    assert exact == pytest.approx(1.0 + 0.9, abs=1e-9)
    assert res.model_cost == pytest.approx(exact, abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_fallback_on_feasible_instance(seed):
    m = random_cmdp(np.random.default_rng(500 + seed), 4, 2)
    m = m.replace(cost_limit=binding_limit(m))
    res = min_cost_fallback(m, PenaltyWeighting.none())
    assert res.feasible and res.model_cost <= m.cost_limit + 1e-9


def test_weighting_validation():
    with pytest.raises(ValueError):
        PenaltyWeighting.adaptive(-np.ones((2, 2)), 1.0)
    with pytest.raises(ValueError):
        PenaltyWeighting.adaptive(np.ones((2, 2)), -1.0)
    with pytest.raises(ValueError):
        PenaltyWeighting("other")
    assert PenaltyWeighting.certified(np.ones((1, 1)), beta=10.0).weight(0.9) == pytest.approx(9.0)


def test_policy_is_used_consistently():
    m = random_cmdp(np.random.default_rng(7), 4, 2)
    m = m.replace(cost_limit=binding_limit(m))
    res = solve_cmdp(m)
    ev = evaluate_policy(m, res.policy)
    assert ev.ret == pytest.approx(res.model_ret, abs=1e-6)
    assert ev.cost == pytest.approx(res.model_cost, abs=1e-6)
    assert isinstance(res.policy, Policy)
