"""Feedback adaptation of the penalty scale kappa."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class ControllerState:
    kappa: float
    alpha: float = 0.1
    history: list = field(default_factory=list)

    def __post_init__(self):
        if not self.kappa >= 0:
            raise ValueError("kappa must be >= 0")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")


def update(state: ControllerState, observed_cost: float, limit: float) -> ControllerState:
    """Integral step ``kappa <- max(0, kappa + alpha (cost - limit))``, logged in place."""
    if not (math.isfinite(observed_cost) and math.isfinite(limit)):
        raise ValueError("observed cost and limit must be finite")
    state.kappa = max(0.0, state.kappa + state.alpha * (observed_cost - limit))
    state.history.append((float(observed_cost), state.kappa))
    return state


def replay(kappa0: float, alpha: float, costs, limit: float) -> list[float]:
    """Kappa trace produced by feeding ``costs`` through :func:`update`."""
    state = ControllerState(kappa0, alpha)
    for c in costs:
        update(state, c, limit)
    return [k for _, k in state.history]


@dataclass(frozen=True)
class FallbackSignal:
    """Exponential search exhausted; plan with the min-cost fallback instead."""

    halvings: int
    tried: tuple


def exponential_search_init(is_feasible, kappa_start: float = 10.0, floor: float = 1e-4):
    """First kappa in ``kappa_start, kappa_start/2, ...`` that ``is_feasible`` accepts.

    Returns a :class:`FallbackSignal` once kappa would drop below ``floor``.
    """
    kappa = kappa_start
    tried = []
    while kappa >= floor:
        tried.append(kappa)
        if is_feasible(kappa):
            return kappa
        kappa /= 2.0
    return FallbackSignal(halvings=len(tried), tried=tuple(tried))
