"""Bootstrap ensemble of linear-Gaussian dynamics regressors plus a cost regressor.

Each member fits ridge least squares from features ``(s, a, 1)`` to the
state change ``s' - s`` and keeps a homoscedastic per-dimension variance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

RIDGE = 1e-6
VAR_FLOOR = 1e-8


class InsufficientDataError(ValueError):
    pass


class NotFittedError(RuntimeError):
    pass


def features(states, actions) -> np.ndarray:
    s = np.atleast_2d(np.asarray(states, dtype=np.float64))
    a = np.asarray(actions, dtype=np.float64).reshape(s.shape[0], -1)
    return np.concatenate([s, a, np.ones((s.shape[0], 1))], axis=1)


def _ridge(X: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    G = X.T @ X + lam * np.eye(X.shape[1])
    return np.linalg.solve(G, X.T @ Y)


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    weights: np.ndarray  # (K, ds, nf): row d maps features to delta component d
    variances: np.ndarray  # (K, ds)
    ridge: float = RIDGE

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def state_dim(self) -> int:
        return self.weights.shape[1]

    def member_means(self, states, actions) -> np.ndarray:
        """Predicted deltas of every member, shaped (batch, K, ds)."""
        X = features(states, actions)
        return np.einsum("kdf,bf->bkd", self.weights, X)


@dataclass(frozen=True, eq=False)
class CostModel:
    weights: np.ndarray  # (nfc,)
    variance: float
    binary: bool = False
    feature_fn: Callable | None = None

    def design(self, states, actions) -> np.ndarray:
        if self.feature_fn is None:
            return features(states, actions)
        return self.feature_fn(np.atleast_2d(states), np.asarray(actions).reshape(len(np.atleast_2d(states)), -1))

    def predict(self, states, actions) -> np.ndarray:
        """Cost mean (continuous) or real-valued score (binary), one per row."""
        return self.design(states, actions) @ self.weights


def fit(states, actions, next_states, costs, K: int = 5, rng_seed: int = 0, *, bootstrap: bool = True,
        ridge: float = RIDGE, binary_cost: bool = False, cost_features: Callable | None = None):
    """Fit ``K`` bootstrap members and a cost regressor on the full buffer.

    ``cost_features`` optionally replaces the ``(s, a, 1)`` design used by the
    cost regressor. Binary costs are regressed on ``2c - 1`` so the sign of the
    score separates the classes.
    """
    if K < 2:
        raise ValueError("ensemble needs at least two members")
    S = np.atleast_2d(np.asarray(states, dtype=np.float64))
    S2 = np.atleast_2d(np.asarray(next_states, dtype=np.float64)).reshape(S.shape)
    X = features(S, actions)
    n, nf = X.shape
    if n < 2 * nf:
        raise InsufficientDataError(f"need at least {2 * nf} transitions, got {n}")
    Y = S2 - S
    rng = np.random.default_rng(rng_seed)
    # drawn up front so they depend on the seed and buffer size only
    idx = rng.integers(0, n, size=(K, n)) if bootstrap else np.tile(np.arange(n), (K, 1))

    W = np.empty((K, Y.shape[1], nf))
    V = np.empty((K, Y.shape[1]))
    for k in range(K):
        Xk, Yk = X[idx[k]], Y[idx[k]]
        w = _ridge(Xk, Yk, ridge)
        W[k] = w.T
        V[k] = np.maximum(((Yk - Xk @ w) ** 2).mean(axis=0), VAR_FLOOR)

    c = np.asarray(costs, dtype=np.float64).ravel()
    target = 2.0 * c - 1.0 if binary_cost else c
    cm = CostModel(np.zeros(0), 0.0, binary_cost, cost_features)
    Xc = cm.design(S, actions)
    wc = _ridge(Xc, target, ridge)
    cvar = float(max(((target - Xc @ wc) ** 2).mean(), VAR_FLOOR))
    return EnsembleModel(W, V, ridge), CostModel(wc, cvar, binary_cost, cost_features)


def predict(model: EnsembleModel, s, a, member: int, rng: np.random.Generator | None = None):
    """Member ``member``'s (mean delta, variance) at ``(s, a)``.

    With ``rng`` the returned mean has Gaussian noise of that variance added,
    giving a sampled delta for stochastic rollouts.
    """
    if model is None:
        raise NotFittedError("model has not been fitted")
    mean = model.member_means(np.atleast_1d(s)[None, :], np.atleast_1d(a)[None, :])[0, member]
    var = model.variances[member].copy()
    if rng is not None:
        mean = mean + rng.standard_normal(mean.shape) * np.sqrt(var)
    return mean, var


def uncertainty(model: EnsembleModel, s, a, estimator: str = "mean_disagreement"):
    """Epistemic penalty at ``(s, a)``; batched inputs give one value per row.

    ``max_std``: largest member standard-deviation norm.
    ``mean_disagreement``: norm of the across-member variance of the means.
    """
    if model is None:
        raise NotFittedError("model has not been fitted")
    s2 = np.atleast_2d(np.asarray(s, dtype=np.float64))
    batch = s2.shape[0]
    if estimator == "max_std":
        out = np.full(batch, np.linalg.norm(np.sqrt(model.variances), axis=1).max())
    elif estimator == "mean_disagreement":
        means = model.member_means(s2, np.asarray(a, dtype=np.float64).reshape(batch, -1))
        # shifting by one member keeps identical members at exactly zero
        out = np.linalg.norm((means - means[:, :1]).var(axis=1), axis=1)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return float(out[0]) if np.ndim(s) <= 1 else out


def conservative_cost(cost_pred, u, kappa: float = 1.0, binary: bool = False):
    """``c + kappa * u`` (continuous) or ``1[score + u > 0]`` (binary)."""
    cost_pred = np.asarray(cost_pred, dtype=np.float64)
    if binary:
        out = (cost_pred + np.asarray(u) > 0).astype(np.float64)
    else:
        out = cost_pred + kappa * np.asarray(u)
    return float(out) if out.ndim == 0 else out
