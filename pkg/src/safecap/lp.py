"""Dense two-phase primal simplex.

All variables are non-negative; the problem is a minimization with
equality rows and ``<=`` rows. Pivoting follows Dantzig's rule with
lowest-index tie-breaking and switches to Bland's rule once a run of
degenerate pivots reaches ``degenerate_limit``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels

PIVOT_TOL = 1e-9
RESIDUAL_TOL = 1e-7
COST_TOL = 1e-10
DEGENERATE_LIMIT = 50


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class IterationLimitError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LinearProgram:
    objective: np.ndarray
    eq_lhs: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None
    ub_lhs: np.ndarray | None = None
    ub_rhs: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.objective, dtype=np.float64))
        if c.ndim != 1:
            raise ValueError("objective must be a vector")
        n = c.shape[0]
        for lhs_name, rhs_name in (("eq_lhs", "eq_rhs"), ("ub_lhs", "ub_rhs")):
            A, b = getattr(self, lhs_name), getattr(self, rhs_name)
            if A is None and b is None:
                A, b = np.zeros((0, n)), np.zeros(0)
            elif A is None or b is None:
                raise ValueError(f"{lhs_name} and {rhs_name} must be given together")
            A = np.asarray(A, dtype=np.float64)
            b = np.atleast_1d(np.asarray(b, dtype=np.float64))
            if A.ndim == 1:
                A = A[None, :]
            if A.ndim != 2 or A.shape[1] != n:
                raise ValueError(f"{lhs_name} must have {n} columns, got shape {A.shape}")
            if b.shape != (A.shape[0],):
                raise ValueError(f"{rhs_name} must have {A.shape[0]} entries, got {b.shape}")
            if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
                raise ValueError(f"{lhs_name}/{rhs_name} contain non-finite values")
            object.__setattr__(self, lhs_name, A)
            object.__setattr__(self, rhs_name, b)
        if not np.all(np.isfinite(c)):
            raise ValueError("objective contains non-finite values")
        object.__setattr__(self, "objective", c)

    @property
    def n(self) -> int:
        return self.objective.shape[0]


@dataclass(frozen=True, eq=False)
class LpOutcome:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0
    bland_engaged: bool = False
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def residuals(lp: LinearProgram, x: np.ndarray) -> tuple[float, float, float]:
    """(max equality violation, max ``<=`` violation, max negativity)."""
    eq = float(np.abs(lp.eq_lhs @ x - lp.eq_rhs).max(initial=0.0))
    ub = float(np.max(lp.ub_lhs @ x - lp.ub_rhs, initial=0.0))
    neg = float(max(0.0, -x.min(initial=0.0)))
    return eq, max(ub, 0.0), neg


def solve(lp: LinearProgram, *, pivot_tol: float = PIVOT_TOL, residual_tol: float = RESIDUAL_TOL,
          degenerate_limit: int = DEGENERATE_LIMIT, max_iter: int | None = None) -> LpOutcome:
    n = lp.n
    A_eq, b_eq, A_ub, b_ub = lp.eq_lhs, lp.eq_rhs, lp.ub_lhs, lp.ub_rhs
    m_eq, m_ub = A_eq.shape[0], A_ub.shape[0]
    m = m_eq + m_ub
    if max_iter is None:
        max_iter = 50 * (n + m) + 1000

    # rows: equalities then inequalities with a slack each; flip rows with negative rhs
    A = np.zeros((m, n + m_ub))
    A[:m_eq, :n] = A_eq
    A[m_eq:, :n] = A_ub
    A[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([b_eq, b_ub])
    flip = b < 0
    A[flip] *= -1.0
    b = np.where(flip, -b, b)

    # ub rows with non-negative rhs start with their slack basic; all others get an artificial
    needs_art = np.ones(m, dtype=bool)
    needs_art[m_eq:] = flip[m_eq:]
    art_rows = np.flatnonzero(needs_art)
    n_art = art_rows.size
    n_cols = n + m_ub + n_art

    T = np.zeros((m + 1, n_cols + 1))
    T[:m, : n + m_ub] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=np.int64)
    for i in range(m_eq, m):
        basis[i] = n + (i - m_eq)
    for k, i in enumerate(art_rows):
        T[i, n + m_ub + k] = 1.0
        basis[i] = n + m_ub + k

    iterations = 0
    bland_any = False

    if n_art:
        T[m, : n + m_ub] = -T[art_rows, : n + m_ub].sum(axis=0)
        T[m, -1] = -T[art_rows, -1].sum()
        allowed = np.ones(n_cols, dtype=np.uint8)
        status, it, bland = kernels.simplex_iterate(T, basis, allowed, COST_TOL, pivot_tol, degenerate_limit, max_iter)
        iterations += it
        bland_any |= bool(bland)
        if status == kernels.STATUS_ITERATION_LIMIT:
            raise IterationLimitError(f"phase 1 did not terminate in {max_iter} pivots")
        phase1 = -T[m, -1]
        if phase1 > residual_tol:
            return LpOutcome(LpStatus.INFEASIBLE, iterations=iterations, bland_engaged=bland_any,
                             info={"phase1_objective": float(phase1)})
        # drive zero-level artificials out of the basis where possible
        for i in range(m):
            if basis[i] >= n + m_ub:
                row = np.abs(T[i, : n + m_ub])
                cand = np.flatnonzero(row > pivot_tol)
                if cand.size:
                    j = int(cand[0])
                    kernels.pivot(T, i, j)
                    basis[i] = j

    # phase 2 objective row in canonical form
    cost = np.zeros(n_cols)
    cost[:n] = lp.objective
    T[m, :] = 0.0
    T[m, :n] = lp.objective
    for i in range(m):
        cb = cost[basis[i]]
        if cb != 0.0:
            T[m] -= cb * T[i]
    allowed = np.zeros(n_cols, dtype=np.uint8)
    allowed[: n + m_ub] = 1
    status, it, bland = kernels.simplex_iterate(T, basis, allowed, COST_TOL, pivot_tol, degenerate_limit,
                                                max_iter - iterations)
    iterations += it
    bland_any |= bool(bland)
    if status == kernels.STATUS_ITERATION_LIMIT:
        raise IterationLimitError(f"phase 2 did not terminate in {max_iter} pivots")
    if status == kernels.STATUS_UNBOUNDED:
        return LpOutcome(LpStatus.UNBOUNDED, iterations=iterations, bland_engaged=bland_any)

    x = np.zeros(n_cols)
    x[basis] = T[:m, -1]
    x = np.clip(x[:n], 0.0, None)
    eq_res, ub_res, _ = residuals(lp, x)
    return LpOutcome(
        LpStatus.OPTIMAL,
        x=x,
        objective=float(lp.objective @ x),
        iterations=iterations,
        bland_engaged=bland_any,
        info={"eq_residual": eq_res, "ub_residual": ub_res},
    )
