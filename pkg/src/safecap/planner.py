"""Occupancy-measure LPs for constrained and conservatively penalized planning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp
from .cmdp import Cmdp, OccupancyMeasure, Policy, policy_of_occupancy


class InfeasibleError(Exception):
    """No occupancy measure satisfies the (penalized) cost constraint."""


@dataclass(frozen=True)
class PenaltyWeighting:
    """How the per-pair penalty table enters the cost constraint.

    ``mode`` is ``"none"``, ``"certified"`` (weight ``discount * beta``) or
    ``"adaptive"`` (weight ``kappa``).
    """

    mode: str = "none"
    u: np.ndarray | None = None
    beta: float | None = None
    kappa: float | None = None

    def __post_init__(self):
        if self.mode not in ("none", "certified", "adaptive"):
            raise ValueError(f"unknown penalty mode {self.mode!r}")
        if self.u is not None:
            u = np.array(self.u, dtype=np.float64)
            if np.any(u < 0) or not np.all(np.isfinite(u)):
                raise ValueError("penalty table must be finite and non-negative")
            u.setflags(write=False)
            object.__setattr__(self, "u", u)
        if self.mode == "certified" and (self.beta is None or self.beta < 0):
            raise ValueError("certified weighting needs beta >= 0")
        if self.mode == "adaptive" and (self.kappa is None or self.kappa < 0):
            raise ValueError("adaptive weighting needs kappa >= 0")

    @classmethod
    def none(cls) -> "PenaltyWeighting":
        return cls("none")

    @classmethod
    def certified(cls, u, beta: float) -> "PenaltyWeighting":
        return cls("certified", u=u, beta=beta)

    @classmethod
    def adaptive(cls, u, kappa: float) -> "PenaltyWeighting":
        return cls("adaptive", u=u, kappa=kappa)

    def weight(self, discount: float) -> float:
        if self.mode == "certified":
            return discount * self.beta
        if self.mode == "adaptive":
            return float(self.kappa)
        return 0.0

    def penalized_cost(self, cmdp: Cmdp) -> np.ndarray:
        w = self.weight(cmdp.discount)
        if w == 0.0 or self.u is None:
            return cmdp.cost.copy()
        if self.u.shape != cmdp.cost.shape:
            raise ValueError(f"penalty table shape {self.u.shape} != {cmdp.cost.shape}")
        return cmdp.cost + w * self.u


@dataclass(frozen=True, eq=False)
class PlanResult:
    policy: Policy
    rho: OccupancyMeasure
    model_ret: float
    model_cost: float
    feasible: bool = True
    lp_iterations: int = 0


def flow_constraints(cmdp: Cmdp) -> tuple[np.ndarray, np.ndarray]:
    """Equality rows ``sum_a rho(s, a) - g sum T(s | s2, a2) rho(s2, a2) = (1 - g) mu0(s)``."""
    S, A = cmdp.n_states, cmdp.n_actions
    g = cmdp.discount
    E = np.repeat(np.eye(S), A, axis=1)
    E -= g * cmdp.transition.reshape(S * A, S).T
    return E, (1 - g) * cmdp.initial_dist


def _result(cmdp: Cmdp, out: lp.LpOutcome, cost: np.ndarray, feasible: bool) -> PlanResult:
    S, A = cmdp.n_states, cmdp.n_actions
    rho = OccupancyMeasure(out.x.reshape(S, A))
    scale = 1.0 / (1.0 - cmdp.discount)
    return PlanResult(
        policy=policy_of_occupancy(rho),
        rho=rho,
        model_ret=float(scale * (rho.rho * cmdp.reward).sum()),
        model_cost=float(scale * (rho.rho * cost).sum()),
        feasible=feasible,
        lp_iterations=out.iterations,
    )


def _solve_with_cost(cmdp: Cmdp, cost: np.ndarray) -> PlanResult:
    scale = 1.0 / (1.0 - cmdp.discount)
    E, b = flow_constraints(cmdp)
    prog = lp.LinearProgram(
        objective=-scale * cmdp.reward.ravel(),
        eq_lhs=E,
        eq_rhs=b,
        ub_lhs=scale * cost.ravel()[None, :],
        ub_rhs=[cmdp.cost_limit],
    )
    out = lp.solve(prog)
    if out.status is lp.LpStatus.INFEASIBLE:
        raise InfeasibleError("cost constraint cannot be met under this model")
    if out.status is not lp.LpStatus.OPTIMAL:
        # the flow polytope is bounded, so this signals numerical trouble
        raise RuntimeError(f"unexpected LP status {out.status}")
    return _result(cmdp, out, cost, True)


def solve_cmdp(cmdp: Cmdp) -> PlanResult:
    """Reward-maximizing occupancy subject to the discounted cost limit."""
    return _solve_with_cost(cmdp, cmdp.cost)


def solve_conservative(cmdp_hat: Cmdp, weighting: PenaltyWeighting) -> PlanResult:
    """As :func:`solve_cmdp` with the cost inflated by the weighted penalty.

    ``model_cost`` reports the penalized value.
    """
    return _solve_with_cost(cmdp_hat, weighting.penalized_cost(cmdp_hat))


def min_cost_fallback(cmdp_hat: Cmdp, weighting: PenaltyWeighting) -> PlanResult:
    """Occupancy minimizing the penalized cost over the flow polytope alone."""
    cost = weighting.penalized_cost(cmdp_hat)
    scale = 1.0 / (1.0 - cmdp_hat.discount)
    E, b = flow_constraints(cmdp_hat)
    out = lp.solve(lp.LinearProgram(objective=scale * cost.ravel(), eq_lhs=E, eq_rhs=b))
    if out.status is not lp.LpStatus.OPTIMAL:
        raise RuntimeError(f"flow LP returned {out.status}")
    res = _result(cmdp_hat, out, cost, False)
    feasible = res.model_cost <= cmdp_hat.cost_limit + lp.RESIDUAL_TOL
    return PlanResult(res.policy, res.rho, res.model_ret, res.model_cost, feasible, res.lp_iterations)
