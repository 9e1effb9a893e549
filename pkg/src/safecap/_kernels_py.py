"""NumPy implementations of the compiled kernels in ``_kernels.pyx``.

Signatures, tie-breaking and pivot arithmetic mirror the Cython module so
the two backends can be swapped without changing results beyond rounding
in the ensemble rollout (whose reductions are vectorized here).
"""

import numpy as np

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITERATION_LIMIT = 2


def pivot(T, r, j):
    """Single Gauss-Jordan pivot on ``T[r, j]``, in place."""
    T[r] = T[r] / T[r, j]
    T[r, j] = 1.0
    f = T[:, j].copy()
    f[r] = 0.0
    rows = np.flatnonzero(f)
    if rows.size:
        T[rows] = T[rows] - f[rows, None] * T[r]
    T[:, j] = 0.0
    T[r, j] = 1.0


def simplex_iterate(T, basis, allowed, cost_tol, pivot_tol, degenerate_limit, max_iter):
    m = T.shape[0] - 1
    nvar = T.shape[1] - 1
    allowed = np.asarray(allowed, dtype=bool)
    reduced = T[m, :nvar]
    degenerate_run = 0
    bland = False
    it = 0
    while it < max_iter:
        candidates = np.flatnonzero(allowed & (reduced < -cost_tol))
        if candidates.size == 0:
            return STATUS_OPTIMAL, it, bland
        if bland:
            enter = int(candidates[0])
        else:
            best = reduced[candidates].min()
            enter = int(candidates[reduced[candidates] <= best + 1e-12][0])

        col = T[:m, enter]
        rows = np.flatnonzero(col > pivot_tol)
        if rows.size == 0:
            return STATUS_UNBOUNDED, it, bland
        ratios = T[rows, nvar] / col[rows]
        best_ratio = ratios.min()
        ties = rows[ratios <= best_ratio + 1e-12]
        leave = int(ties[np.argmin(basis[ties])])

        if best_ratio <= 1e-12:
            degenerate_run += 1
            if degenerate_run >= degenerate_limit:
                bland = True
        else:
            degenerate_run = 0

        pivot(T, leave, enter)
        basis[leave] = enter
        it += 1
    return STATUS_ITERATION_LIMIT, it, bland


def ensemble_rollout(weights, start, actions, member_of_particle):
    K, ds, nf = weights.shape
    N, H, da = actions.shape
    P = member_of_particle.shape[0]
    if nf != ds + da + 1 or start.shape[0] != ds:
        raise ValueError("weights, start state and actions have inconsistent shapes")
    if P and (member_of_particle.min() < 0 or member_of_particle.max() >= K):
        raise ValueError("particle member index out of range")
    states = np.empty((N, P, H + 1, ds))
    dis = np.empty((N, P, H))
    states[:, :, 0] = start
    ones = np.ones((N, P, 1))
    chosen = weights[member_of_particle]  # (P, ds, nf)
    for t in range(H):
        feat = np.concatenate(
            [states[:, :, t], np.broadcast_to(actions[:, None, t], (N, P, da)), ones], axis=-1
        )
        pred = np.einsum("kdf,npf->npkd", weights, feat)
        var = pred.var(axis=2)
        dis[:, :, t] = np.sqrt((var * var).sum(axis=-1))
        step = np.einsum("pdf,npf->npd", chosen, feat)
        states[:, :, t + 1] = states[:, :, t] + step
    return states, dis


def tabular_rollout(policy_cdf, transition_cdf, reward_mean, cost_mean, init_cdf, uniforms, episode_len):
    L = uniforms.shape[0]
    S, A = policy_cdf.shape
    out_s = np.empty(L, dtype=np.int64)
    out_a = np.empty(L, dtype=np.int64)
    out_s2 = np.empty(L, dtype=np.int64)
    s = 0
    for t in range(L):
        u = uniforms[t]
        if t % episode_len == 0:
            s = _search(init_cdf, u[0])
        a = _search(policy_cdf[s], u[1])
        s2 = _search(transition_cdf[s, a], u[2])
        out_s[t] = s
        out_a[t] = a
        out_s2[t] = s2
        s = s2
    r = (uniforms[:, 3] < reward_mean[out_s, out_a]).astype(np.float64)
    c = (uniforms[:, 4] < cost_mean[out_s, out_a]).astype(np.float64)
    return out_s, out_a, out_s2, r, c


def _search(cdf, u):
    # first index with u < cdf[i]; the last entry absorbs rounding
    i = int(np.searchsorted(cdf[:-1], u, side="right"))
    return i
