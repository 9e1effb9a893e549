"""Constrained cross-entropy trajectory optimization over a learned ensemble."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .ensemble import CostModel, EnsembleModel, conservative_cost

VAR_FLOOR = 1e-6


@dataclass(frozen=True)
class CcemConfig:
    population: int = 500
    elites: int = 50
    iterations: int = 5
    horizon: int = 30
    action_low: tuple = (-1.0,)
    action_high: tuple = (1.0,)
    init_mean: np.ndarray | None = None
    init_var: np.ndarray | None = None
    particles: int = 5
    discount: float = 0.99
    cost_discount: float = 0.99
    estimator: str = "mean_disagreement"
    warm_start: bool = True

    def __post_init__(self):
        if not 1 <= self.elites <= self.population:
            raise ValueError("need 1 <= elites <= population")
        if self.elites < 2:
            raise ValueError("refitting needs at least two elites")
        if self.iterations < 1 or self.horizon < 1 or self.particles < 1:
            raise ValueError("iterations, horizon and particles must be >= 1")
        if len(self.action_low) != len(self.action_high):
            raise ValueError("action bounds differ in length")
        if self.init_var is not None and np.any(np.asarray(self.init_var) <= 0):
            raise ValueError("initial variance must be positive")

    @property
    def action_dim(self) -> int:
        return len(self.action_low)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.action_low, dtype=float), np.asarray(self.action_high, dtype=float)

    def initial_distribution(self) -> "SamplingDistribution":
        lo, hi = self.bounds()
        shape = (self.horizon, self.action_dim)
        mean = np.broadcast_to((lo + hi) / 2.0, shape) if self.init_mean is None else self.init_mean
        var = np.broadcast_to(((hi - lo) / 2.0) ** 2, shape) if self.init_var is None else self.init_var
        return SamplingDistribution(np.array(mean, dtype=float), np.array(var, dtype=float))


@dataclass(frozen=True, eq=False)
class SamplingDistribution:
    mean: np.ndarray  # (H, da)
    variance: np.ndarray  # (H, da)

    def __post_init__(self):
        object.__setattr__(self, "variance", np.maximum(np.asarray(self.variance, dtype=float), VAR_FLOOR))


@dataclass(frozen=True)
class SequenceEval:
    ret: float
    pen_cost: float
    feasible: bool


@dataclass(frozen=True, eq=False)
class SequenceEvals:
    """Column view of one population's evaluations."""

    ret: np.ndarray
    pen_cost: np.ndarray
    feasible: np.ndarray

    def __len__(self):
        return self.ret.shape[0]

    def __getitem__(self, i) -> SequenceEval:
        return SequenceEval(float(self.ret[i]), float(self.pen_cost[i]), bool(self.feasible[i]))


def evaluate_sequences(model: EnsembleModel, cost_model: CostModel, start_state, sequences, kappa: float,
                       config: CcemConfig, reward_fn: Callable, cost_limit: float = np.inf) -> SequenceEvals:
    """Discounted return and penalized cost of each action sequence.

    Each sequence is rolled out once per particle; particle ``p`` follows
    ensemble member ``p mod K`` using member means. ``reward_fn(s, a, s2)``
    is vectorized over leading axes. Sequences whose rollout goes
    non-finite get ``pen_cost = inf`` and ``ret = -inf``.
    """
    seqs = np.ascontiguousarray(sequences, dtype=np.float64)
    if seqs.ndim == 2:
        seqs = seqs[:, :, None]
    N, H, da = seqs.shape
    start = np.ascontiguousarray(np.atleast_1d(start_state), dtype=np.float64)
    members = np.arange(config.particles, dtype=np.int64) % model.size
    with np.errstate(all="ignore"):
        states, dis = kernels.ensemble_rollout(np.ascontiguousarray(model.weights), start, seqs, members)
        P = members.shape[0]
        s_t = states[:, :, :-1]
        s_next = states[:, :, 1:]
        a_t = np.broadcast_to(seqs[:, None], (N, P, H, da))
        rewards = np.asarray(reward_fn(s_t, a_t, s_next), dtype=float).reshape(N, P, H)
        flat_s = s_t.reshape(-1, s_t.shape[-1])
        flat_a = a_t.reshape(-1, da)
        c_hat = cost_model.predict(flat_s, flat_a).reshape(N, P, H)
        if config.estimator == "mean_disagreement":
            u = dis
        elif config.estimator == "max_std":
            u = np.full_like(dis, np.linalg.norm(np.sqrt(model.variances), axis=1).max())
        else:
            raise ValueError(f"unknown estimator {config.estimator!r}")
        pen = conservative_cost(c_hat, u, kappa, binary=cost_model.binary)
        g = config.discount ** np.arange(H)
        gc = config.cost_discount ** np.arange(H)
        ret = (rewards * g).sum(axis=-1).mean(axis=1)
        pen_cost = (pen * gc).sum(axis=-1).mean(axis=1)
    bad = ~(np.isfinite(ret) & np.isfinite(pen_cost))
    ret = np.where(bad, -np.inf, ret)
    pen_cost = np.where(bad, np.inf, pen_cost)
    return SequenceEvals(ret, pen_cost, (pen_cost <= cost_limit) & ~bad)


def select_elites(evals: SequenceEvals, n_elites: int) -> np.ndarray:
    """Top-``n_elites`` feasible by return, or lowest penalized cost if too few are feasible."""
    n = len(evals)
    if n < n_elites:
        raise ValueError("fewer evaluations than elites")
    idx = np.arange(n)
    feasible = idx[evals.feasible]
    if feasible.size >= n_elites:
        order = np.lexsort((feasible, -evals.ret[feasible]))
        return feasible[order[:n_elites]]
    order = np.lexsort((idx, evals.pen_cost))
    return order[:n_elites]


def refit(distribution: SamplingDistribution, elites) -> SamplingDistribution:
    """Maximum-likelihood diagonal Gaussian over the elite sequences."""
    elites = np.asarray(elites, dtype=float)
    if elites.shape[0] < 2:
        raise ValueError("refit needs at least two elites")
    elites = elites.reshape((elites.shape[0],) + distribution.mean.shape)
    return SamplingDistribution(elites.mean(axis=0), elites.var(axis=0))


def plan(model: EnsembleModel, cost_model: CostModel, start_state, cost_limit: float, kappa: float,
         config: CcemConfig, rng_seed, reward_fn: Callable, init: SamplingDistribution | None = None,
         trace: list | None = None) -> np.ndarray:
    """Run CCEM and return the final mean action sequence, shaped (H, da).

    ``rng_seed`` may be an int or a ``numpy.random.Generator``. When
    ``trace`` is a list, per-iteration ``(elite indices, evals)`` are appended.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    lo, hi = config.bounds()
    dist = init if init is not None else config.initial_distribution()
    shape = (config.population, config.horizon, config.action_dim)
    for _ in range(config.iterations):
        samples = dist.mean + np.sqrt(dist.variance) * rng.standard_normal(shape)
        samples = np.clip(samples, lo, hi)
        evals = evaluate_sequences(model, cost_model, start_state, samples, kappa, config, reward_fn, cost_limit)
        elite_idx = select_elites(evals, config.elites)
        if trace is not None:
            trace.append((elite_idx, evals))
        dist = refit(dist, samples[elite_idx])
    return np.clip(dist.mean, lo, hi)


@dataclass
class RecedingHorizonPlanner:
    """Replans every step, warm-starting from the previous plan shifted by one."""

    config: CcemConfig
    reward_fn: Callable
    _prev: np.ndarray | None = field(default=None, repr=False)

    def reset(self):
        self._prev = None

    def act(self, model, cost_model, state, cost_limit, kappa, rng) -> np.ndarray:
        init = None
        if self.config.warm_start and self._prev is not None:
            base = self.config.initial_distribution()
            mean = np.concatenate([self._prev[1:], base.mean[-1:]], axis=0)
            init = SamplingDistribution(mean, base.variance)
        seq = plan(model, cost_model, state, cost_limit, kappa, self.config, rng, self.reward_fn, init=init)
        self._prev = seq
        return seq[0]
