"""Seeded environments: random slippery gridworld and a 1-D point mass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .cmdp import Cmdp, Policy

UP, DOWN, LEFT, RIGHT = range(4)
_MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}


def _generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class GridworldSpec:
    """Random gridworld task.

    ``cost_limit`` is in per-step (normalized) units, i.e. ``(1 - discount)``
    times the discounted limit stored on the generated :class:`Cmdp`.
    """

    side: int = 8
    slip: float = 0.2
    beta_a: float = 1.0
    beta_b: float = 3.0
    discount: float = 0.99
    cost_limit: float = 0.1
    seed: object = 0

    @property
    def n_states(self) -> int:
        return self.side * self.side


def gridworld_transitions(side: int, slip: float) -> np.ndarray:
    """Intended move w.p. ``1 - slip``; otherwise a uniformly random one of the four."""
    S = side * side
    T = np.zeros((S, 4, S))
    for row in range(side):
        for col in range(side):
            s = row * side + col
            dest = []
            for d in range(4):
                dr, dc = _MOVES[d]
                r2, c2 = row + dr, col + dc
                if not (0 <= r2 < side and 0 <= c2 < side):
                    r2, c2 = row, col
                dest.append(r2 * side + c2)
            for a in range(4):
                for d in range(4):
                    T[s, a, dest[d]] += slip / 4.0 + (1.0 - slip) * (d == a)
    return T


def generate_gridworld(spec: GridworldSpec) -> Cmdp:
    """True gridworld CMDP; reward and cost are Bernoulli means drawn per (s, a)."""
    rng = _generator(spec.seed)
    S = spec.n_states
    reward = rng.beta(spec.beta_a, spec.beta_b, size=(S, 4))
    cost = rng.beta(spec.beta_a, spec.beta_b, size=(S, 4))
    T = gridworld_transitions(spec.side, spec.slip)
    mu0 = np.full(S, 1.0 / S)
    return Cmdp(T, reward, cost, spec.discount, mu0, spec.cost_limit / (1.0 - spec.discount))


@dataclass(frozen=True, eq=False)
class TabularRollout:
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    rewards: np.ndarray
    costs: np.ndarray
    episode_len: int
    discount: float

    def _per_episode(self, values: np.ndarray) -> np.ndarray:
        n_ep = -(-values.shape[0] // self.episode_len)
        padded = np.zeros(n_ep * self.episode_len)
        padded[: values.shape[0]] = values
        w = self.discount ** np.arange(self.episode_len)
        return padded.reshape(n_ep, self.episode_len) @ w

    @property
    def episode_costs(self) -> np.ndarray:
        """Discounted cost sum of each episode."""
        return self._per_episode(self.costs)

    @property
    def episode_returns(self) -> np.ndarray:
        return self._per_episode(self.rewards)

    def normalized(self, per_episode: np.ndarray) -> np.ndarray:
        """Discounted sums rescaled to a weighted per-step average."""
        w = (1.0 - self.discount) / (1.0 - self.discount ** self.episode_len)
        return per_episode * w


def _cdf(p: np.ndarray) -> np.ndarray:
    c = np.cumsum(p, axis=-1)
    return np.ascontiguousarray(c / c[..., -1:])


def rollout(cmdp: Cmdp, policy: Policy, n_steps: int, episode_len: int, seed) -> TabularRollout:
    """Sample ``n_steps`` transitions in episodes restarted from the initial distribution.

    Rewards and costs are realized as Bernoulli draws with the CMDP's means.
    """
    rng = _generator(seed)
    uniforms = rng.random((n_steps, 5))
    s, a, s2, r, c = kernels.tabular_rollout(
        _cdf(policy.probs), _cdf(cmdp.transition), np.ascontiguousarray(cmdp.reward),
        np.ascontiguousarray(cmdp.cost), _cdf(cmdp.initial_dist), uniforms, int(episode_len),
    )
    return TabularRollout(s, a, s2, r, c, int(episode_len), cmdp.discount)


class GridworldEnv:
    """Learner-facing gridworld.

    The learner sees the reward/cost means, initial distribution, discount
    and limit, and may sample transitions. The true CMDP is reachable only
    through :attr:`metrics_cmdp`, which the harness reads for evaluation.
    """

    def __init__(self, spec: GridworldSpec):
        self.spec = spec
        self._cmdp = generate_gridworld(spec)
        self.reward = self._cmdp.reward
        self.cost = self._cmdp.cost
        self.initial_dist = self._cmdp.initial_dist
        self.discount = self._cmdp.discount
        self.cost_limit = self._cmdp.cost_limit
        self.n_states = self._cmdp.n_states
        self.n_actions = self._cmdp.n_actions

    def sample(self, policy: Policy, n_steps: int, episode_len: int, seed) -> TabularRollout:
        return rollout(self._cmdp, policy, n_steps, episode_len, seed)

    @property
    def metrics_cmdp(self) -> Cmdp:
        return self._cmdp

    def model(self, transition: np.ndarray) -> Cmdp:
        """CMDP with the known reward/cost tables and the given dynamics."""
        return Cmdp(transition, self.reward, self.cost, self.discount, self.initial_dist, self.cost_limit)


# ---------------------------------------------------------------- point mass


@dataclass(frozen=True)
class PointMassSpec:
    dt: float = 0.1
    v_max: float = 2.0
    noise_scale: float = 0.01
    action_cost: float = 0.1
    episode_len: int = 200
    discount: float = 0.99
    cost_discount: float = 0.99
    limit_fraction: float = 0.5

    @property
    def noise_std(self) -> float:
        return self.noise_scale * np.sqrt(self.dt)


def step_pointmass(state, action, rng=None, spec: PointMassSpec = PointMassSpec()):
    """One Euler step; ``rng=None`` disables process noise.

    Returns ``(next_state, reward, cost)`` with reward ``v' - 0.1 a^2`` and
    cost ``|v'|``.
    """
    x, v = float(state[0]), float(state[1])
    a = float(np.clip(np.asarray(action, dtype=float).ravel()[0], -1.0, 1.0))
    eta = 0.0 if rng is None else spec.noise_std * rng.standard_normal()
    v2 = min(max(v + a * spec.dt + eta, -spec.v_max), spec.v_max)
    x2 = x + v2 * spec.dt
    return np.array([x2, v2]), v2 - spec.action_cost * a * a, abs(v2)


def pointmass_reward(s, a, s_next, spec: PointMassSpec = PointMassSpec()):
    """Vectorized reward for planning (the reward function is known)."""
    return s_next[..., 1] - spec.action_cost * (a[..., 0] ** 2)


def pointmass_cost_features(states, actions, spec: PointMassSpec = PointMassSpec()):
    """Design for the cost regressor: ``(x, v, a, |v|, sign(v) a, 1)``.

    The absolute-value terms let a linear regressor represent ``|v'|``.
    """
    s = np.atleast_2d(states)
    a = np.asarray(actions, dtype=float).reshape(s.shape[0], -1)
    v = s[:, 1:2]
    return np.concatenate([s, a, np.abs(v), np.sign(v) * a[:, :1], np.ones((s.shape[0], 1))], axis=1)


def full_throttle_cost(spec: PointMassSpec = PointMassSpec()) -> float:
    """Discounted episode cost of the unconstrained optimum, noise off.

    Reward grows with velocity, so the optimum accelerates to ``v_max`` and
    holds it with zero action.
    """
    state = np.zeros(2)
    total = 0.0
    for t in range(spec.episode_len):
        a = np.clip((spec.v_max - state[1]) / spec.dt, -1.0, 1.0)
        state, _, c = step_pointmass(state, a, None, spec)
        total += spec.cost_discount ** t * c
    return total


class PointMassEnv:
    def __init__(self, spec: PointMassSpec = PointMassSpec(), seed=0):
        self.spec = spec
        self.rng = _generator(seed)
        self.state = np.zeros(2)
        self.t = 0

    def reset(self) -> np.ndarray:
        self.state = np.zeros(2)
        self.t = 0
        return self.state.copy()

    def step(self, action):
        self.state, r, c = step_pointmass(self.state, action, self.rng, self.spec)
        self.t += 1
        return self.state.copy(), r, c, self.t >= self.spec.episode_len
