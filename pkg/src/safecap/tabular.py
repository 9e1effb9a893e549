"""Transition counts, maximum-likelihood dynamics and penalty tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class CountTable:
    n_sas: np.ndarray

    def __post_init__(self):
        n = np.array(self.n_sas, dtype=np.int64)
        if n.ndim != 3 or n.shape[0] != n.shape[2]:
            raise ValueError("counts must be shaped (S, A, S)")
        if np.any(n < 0):
            raise ValueError("counts must be non-negative")
        n.setflags(write=False)
        object.__setattr__(self, "n_sas", n)

    @classmethod
    def empty(cls, n_states: int, n_actions: int) -> "CountTable":
        return cls(np.zeros((n_states, n_actions, n_states), dtype=np.int64))

    @property
    def n_sa(self) -> np.ndarray:
        return self.n_sas.sum(axis=2)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_sas.shape[0], self.n_sas.shape[1]

    def record(self, states, actions=None, next_states=None) -> "CountTable":
        """Return a table with the given transitions added.

        Accepts either three index arrays or one sequence of ``(s, a, s2)``.
        """
        if actions is None and next_states is None:
            triples = np.asarray(list(states), dtype=np.int64).reshape(-1, 3)
            s, a, s2 = triples.T
        else:
            s = np.asarray(states, dtype=np.int64).ravel()
            a = np.asarray(actions, dtype=np.int64).ravel()
            s2 = np.asarray(next_states, dtype=np.int64).ravel()
            if not (s.shape == a.shape == s2.shape):
                raise ValueError("transition arrays differ in length")
        S, A = self.shape
        if s.size and (s.min() < 0 or s.max() >= S or s2.min() < 0 or s2.max() >= S
                       or a.min() < 0 or a.max() >= A):
            raise IndexError("transition index out of range")
        n = self.n_sas.copy()
        np.add.at(n, (s, a, s2), 1)
        return CountTable(n)


def record(counts: CountTable, transitions) -> CountTable:
    return counts.record(transitions)


def fit_transitions(counts: CountTable) -> np.ndarray:
    """MLE transition tensor; unvisited pairs get a uniform successor row."""
    n_sas = counts.n_sas.astype(np.float64)
    n_sa = n_sas.sum(axis=2, keepdims=True)
    S = n_sas.shape[0]
    return np.where(n_sa > 0, n_sas / np.where(n_sa > 0, n_sa, 1.0), 1.0 / S)


@dataclass(frozen=True, eq=False)
class PenaltyTable:
    u: np.ndarray
    kind: str
    delta: float | None = None
    horizon: int | None = None


def certified_radius(n, n_states: int, n_actions: int, delta: float, horizon: int | None = None):
    """Concentration radius ``sqrt(S / (8 n) * ln(4 [K] S A / delta))``, capped at 1.

    Pairs with ``n = 0`` get the cap.
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    if horizon is not None and horizon < 1:
        raise ValueError("horizon K must be >= 1")
    k = 1 if horizon is None else horizon
    n = np.asarray(n, dtype=np.float64)
    log_term = np.log(4.0 * k * n_states * n_actions / delta)
    with np.errstate(divide="ignore"):
        u = np.sqrt(n_states / (8.0 * n) * log_term)
    return np.where(n > 0, np.minimum(1.0, u), 1.0)


def certified_penalty(counts: CountTable, delta: float, horizon: int | None = None) -> PenaltyTable:
    S, A = counts.shape
    u = certified_radius(counts.n_sa, S, A, delta, horizon)
    kind = "certified" if horizon is None else "certified_training"
    return PenaltyTable(u=u, kind=kind, delta=delta, horizon=horizon)


def practical_penalty(counts: CountTable) -> PenaltyTable:
    """Base penalty ``1 / sqrt(n)`` (1 where unvisited); the scale is applied later."""
    n = counts.n_sa.astype(np.float64)
    u = 1.0 / np.sqrt(np.maximum(n, 1.0))
    return PenaltyTable(u=u, kind="practical")
