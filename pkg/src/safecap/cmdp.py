"""Tabular constrained MDPs: representation, exact evaluation and occupancy algebra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Structural tolerance (occupancy mass, flow residual) and probabilistic
# tolerance (row sums of stochastic objects).
STRUCT_TOL = 1e-6
PROB_TOL = 1e-9


class ValidationError(ValueError):
    pass


def _check_stochastic(arr: np.ndarray, name: str, axis: int = -1) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise ValidationError(f"{name} has negative entries")
    if np.any(np.abs(arr.sum(axis=axis) - 1.0) > PROB_TOL):
        raise ValidationError(f"{name} rows do not sum to 1")


def _frozen(arr, dtype=np.float64) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Cmdp:
    """Infinite-horizon discounted CMDP with costs in discounted units.

    ``transition[s, a, s2]`` is the probability of moving to ``s2``;
    reward and cost are expected per-step values in ``[0, 1]``.
    """

    transition: np.ndarray
    reward: np.ndarray
    cost: np.ndarray
    discount: float
    initial_dist: np.ndarray
    cost_limit: float

    def __post_init__(self):
        T = _frozen(self.transition)
        r = _frozen(self.reward)
        c = _frozen(self.cost)
        mu0 = _frozen(self.initial_dist)
        if T.ndim != 3 or T.shape[0] != T.shape[2] or T.shape[0] < 1 or T.shape[1] < 1:
            raise ValidationError(f"transition must be (S, A, S), got {T.shape}")
        S, A, _ = T.shape
        if r.shape != (S, A) or c.shape != (S, A):
            raise ValidationError("reward and cost must be shaped (S, A)")
        if mu0.shape != (S,):
            raise ValidationError("initial_dist must be shaped (S,)")
        _check_stochastic(T, "transition")
        _check_stochastic(mu0, "initial_dist")
        for name, arr in (("reward", r), ("cost", c)):
            if not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 1:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.discount < 1.0:
            raise ValidationError("discount must lie strictly inside (0, 1)")
        if not self.cost_limit >= 0:
            raise ValidationError("cost_limit must be >= 0")
        object.__setattr__(self, "transition", T)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "cost", c)
        object.__setattr__(self, "initial_dist", mu0)
        object.__setattr__(self, "discount", float(self.discount))
        object.__setattr__(self, "cost_limit", float(self.cost_limit))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def replace(self, **changes) -> "Cmdp":
        fields = dict(
            transition=self.transition,
            reward=self.reward,
            cost=self.cost,
            discount=self.discount,
            initial_dist=self.initial_dist,
            cost_limit=self.cost_limit,
        )
        fields.update(changes)
        return Cmdp(**fields)


@dataclass(frozen=True, eq=False)
class Policy:
    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 2:
            raise ValidationError("policy must be shaped (S, A)")
        _check_stochastic(p, "policy")
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "Policy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))


@dataclass(frozen=True, eq=False)
class OccupancyMeasure:
    """Normalized discounted state-action occupancy (sums to one)."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=np.float64)
        if rho.ndim != 2:
            raise ValidationError("occupancy must be shaped (S, A)")
        if np.any(rho < -PROB_TOL):
            raise ValidationError("occupancy has negative entries")
        rho = np.clip(rho, 0.0, None)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def flow_residual(self, cmdp: Cmdp) -> float:
        g = cmdp.discount
        inflow = np.einsum("sap,sa->p", cmdp.transition, self.rho)
        lhs = self.rho.sum(axis=1)
        return float(np.abs(lhs - (1 - g) * cmdp.initial_dist - g * inflow).max())


@dataclass(frozen=True)
class EvalResult:
    ret: float
    cost: float


@dataclass(frozen=True)
class GapCheck:
    lhs: float
    rhs: float
    beta: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + PROB_TOL


def _policy_matrices(cmdp: Cmdp, policy: Policy):
    if policy.probs.shape != (cmdp.n_states, cmdp.n_actions):
        raise ValidationError("policy shape does not match the CMDP")
    pi = policy.probs
    P = np.einsum("sa,sap->sp", pi, cmdp.transition)
    return pi, P


def state_values(cmdp: Cmdp, policy: Policy) -> tuple[np.ndarray, np.ndarray]:
    """Exact discounted reward and cost value vectors of ``policy``."""
    pi, P = _policy_matrices(cmdp, policy)
    M = np.eye(cmdp.n_states) - cmdp.discount * P
    rhs = np.stack([(pi * cmdp.reward).sum(axis=1), (pi * cmdp.cost).sum(axis=1)], axis=1)
    v = np.linalg.solve(M, rhs)
    return v[:, 0], v[:, 1]


def evaluate_policy(cmdp: Cmdp, policy: Policy) -> EvalResult:
    """Discounted return and cost of ``policy`` from the initial distribution."""
    v, vc = state_values(cmdp, policy)
    mu0 = cmdp.initial_dist
    return EvalResult(ret=float(mu0 @ v), cost=float(mu0 @ vc))


def occupancy_of_policy(cmdp: Cmdp, policy: Policy) -> OccupancyMeasure:
    """Solve ``d = (1-g) mu0 + g P_pi^T d`` and spread ``d`` over actions."""
    pi, P = _policy_matrices(cmdp, policy)
    g = cmdp.discount
    M = np.eye(cmdp.n_states) - g * P.T
    d = np.linalg.solve(M, (1 - g) * cmdp.initial_dist)
    return OccupancyMeasure(np.clip(d, 0.0, None)[:, None] * pi)


def policy_of_occupancy(rho: OccupancyMeasure | np.ndarray) -> Policy:
    """Normalize occupancy rows into a policy; empty rows become uniform."""
    r = rho.rho if isinstance(rho, OccupancyMeasure) else np.clip(np.asarray(rho, dtype=float), 0.0, None)
    mass = r.sum(axis=1, keepdims=True)
    n_actions = r.shape[1]
    probs = np.where(mass >= 1e-12, r / np.where(mass > 0, mass, 1.0), 1.0 / n_actions)
    # renormalize against rounding
    probs = probs / probs.sum(axis=1, keepdims=True)
    return Policy(probs)


def tv_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return float(0.5 * np.abs(p - q).sum())


def tv_table(T_hat: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Per-(s, a) total-variation distance between two transition tensors."""
    return 0.5 * np.abs(np.asarray(T_hat) - np.asarray(T)).sum(axis=-1)


def simulation_gap_check(cmdp_true: Cmdp, cmdp_hat: Cmdp, policy: Policy, beta: float | None = None) -> GapCheck:
    """Both sides of the cost simulation bound for ``policy``.

    ``lhs`` is the occupancy-weighted cost gap between true and model
    dynamics; ``rhs`` is ``discount * beta`` times the model-occupancy
    expectation of the per-pair TV error. ``beta`` defaults to
    ``max cost / (1 - discount)`` with the cost ceiling taken as 1.
    """
    if cmdp_true.transition.shape != cmdp_hat.transition.shape:
        raise ValidationError("CMDP shapes differ")
    g = cmdp_true.discount
    if beta is None:
        beta = 1.0 / (1.0 - g)
    rho_true = occupancy_of_policy(cmdp_true, policy).rho
    rho_hat = occupancy_of_policy(cmdp_hat, policy).rho
    lhs = float(((rho_true - rho_hat) * cmdp_true.cost).sum())
    tv = tv_table(cmdp_hat.transition, cmdp_true.transition)
    rhs = float(g * beta * (rho_hat * tv).sum())
    return GapCheck(lhs=lhs, rhs=rhs, beta=float(beta))


def random_cmdp(rng: np.random.Generator, n_states: int, n_actions: int, discount: float | None = None,
                cost_limit: float = 0.0, concentration: float = 1.0) -> Cmdp:
    """Dirichlet transitions, uniform rewards and costs; handy for tests."""
    T = rng.dirichlet(np.full(n_states, concentration), size=(n_states, n_actions))
    r = rng.random((n_states, n_actions))
    c = rng.random((n_states, n_actions))
    mu0 = rng.dirichlet(np.ones(n_states))
    g = rng.uniform(0.5, 0.95) if discount is None else discount
    return Cmdp(T, r, c, g, mu0, cost_limit)
