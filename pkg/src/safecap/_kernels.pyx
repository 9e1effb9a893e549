# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Every function here has a twin with the same signature and the same
floating-point operation order in ``_kernels_py``; ``safecap.kernels``
picks one at import time.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

cdef enum:
    STATUS_OPTIMAL = 0
    STATUS_UNBOUNDED = 1
    STATUS_ITERATION_LIMIT = 2


cdef void _pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef Py_ssize_t nrow = T.shape[0]
    cdef Py_ssize_t ncol = T.shape[1]
    cdef double p = T[r, j]
    cdef double f
    for k in range(ncol):
        T[r, k] = T[r, k] / p
    T[r, j] = 1.0
    for i in range(nrow):
        if i == r:
            continue
        f = T[i, j]
        if f != 0.0:
            for k in range(ncol):
                T[i, k] = T[i, k] - f * T[r, k]
        T[i, j] = 0.0


def simplex_iterate(double[:, ::1] T, cnp.int64_t[::1] basis,
                    const cnp.uint8_t[::1] allowed, double cost_tol,
                    double pivot_tol, long degenerate_limit, long max_iter):
    """Primal simplex pivots on a canonical tableau, in place.

    Rows ``0..m-1`` hold constraints with the right-hand side in the last
    column; row ``m`` holds reduced costs and minus the objective.
    Returns ``(status, iterations, bland_engaged)``.
    """
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t nvar = T.shape[1] - 1
    cdef Py_ssize_t i, j, enter, leave
    cdef double best, ratio, best_ratio, a
    cdef int status = STATUS_ITERATION_LIMIT
    cdef long it = 0
    cdef long degenerate_run = 0
    cdef bint bland = False
    cdef cnp.int64_t leave_var

    with nogil:
        while it < max_iter:
            enter = -1
            if bland:
                for j in range(nvar):
                    if allowed[j] and T[m, j] < -cost_tol:
                        enter = j
                        break
            else:
                best = -cost_tol
                for j in range(nvar):
                    if allowed[j] and T[m, j] < best:
                        best = T[m, j]
                if best < -cost_tol:
                    for j in range(nvar):
                        if allowed[j] and T[m, j] <= best + 1e-12:
                            enter = j
                            break
            if enter < 0:
                status = STATUS_OPTIMAL
                break

            leave = -1
            best_ratio = 0.0
            for i in range(m):
                a = T[i, enter]
                if a > pivot_tol:
                    ratio = T[i, nvar] / a
                    if leave < 0 or ratio < best_ratio:
                        leave = i
                        best_ratio = ratio
            if leave >= 0:
                leave_var = basis[leave]
                for i in range(m):
                    a = T[i, enter]
                    if a > pivot_tol and basis[i] < leave_var:
                        if T[i, nvar] / a <= best_ratio + 1e-12:
                            leave = i
                            leave_var = basis[i]
            if leave < 0:
                status = STATUS_UNBOUNDED
                break

            if best_ratio <= 1e-12:
                degenerate_run += 1
                if degenerate_run >= degenerate_limit:
                    bland = True
            else:
                degenerate_run = 0

            _pivot(T, leave, enter)
            basis[leave] = enter
            it += 1

    return status, it, bland


def pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t j):
    """Single Gauss-Jordan pivot on ``T[r, j]``, in place."""
    _pivot(T, r, j)


def ensemble_rollout(double[:, :, ::1] weights, const double[::1] start,
                     const double[:, :, ::1] actions,
                     const cnp.int64_t[::1] member_of_particle):
    """Propagate member-mean trajectories of a linear ensemble.

    ``weights[k]`` maps features ``(s, a, 1)`` to a state delta. Every
    sequence ``actions[n]`` is simulated once per particle, particle ``p``
    following member ``member_of_particle[p]``. Returns ``(states,
    disagreement)`` shaped ``(N, P, H + 1, ds)`` and ``(N, P, H)``, the
    second being the norm of the across-member variance of the predicted
    delta at each visited ``(s_t, a_t)``.
    """
    cdef Py_ssize_t K = weights.shape[0]
    cdef Py_ssize_t ds = weights.shape[1]
    cdef Py_ssize_t nf = weights.shape[2]
    cdef Py_ssize_t N = actions.shape[0]
    cdef Py_ssize_t H = actions.shape[1]
    cdef Py_ssize_t da = actions.shape[2]
    cdef Py_ssize_t P = member_of_particle.shape[0]
    cdef Py_ssize_t n, p, t, k, d, f
    cdef double acc, mean, var, tot

    if nf != ds + da + 1 or start.shape[0] != ds:
        raise ValueError("weights, start state and actions have inconsistent shapes")
    if P and (np.min(member_of_particle) < 0 or np.max(member_of_particle) >= K):
        raise ValueError("particle member index out of range")

    states_arr = np.empty((N, P, H + 1, ds), dtype=np.float64)
    dis_arr = np.empty((N, P, H), dtype=np.float64)
    pred_arr = np.empty((K, ds), dtype=np.float64)
    feat_arr = np.empty(nf, dtype=np.float64)
    cdef double[:, :, :, ::1] states = states_arr
    cdef double[:, :, ::1] dis = dis_arr
    cdef double[:, ::1] pred = pred_arr
    cdef double[::1] feat = feat_arr

    with nogil:
        for n in range(N):
            for p in range(P):
                for d in range(ds):
                    states[n, p, 0, d] = start[d]
                for t in range(H):
                    for d in range(ds):
                        feat[d] = states[n, p, t, d]
                    for d in range(da):
                        feat[ds + d] = actions[n, t, d]
                    feat[nf - 1] = 1.0
                    for k in range(K):
                        for d in range(ds):
                            acc = 0.0
                            for f in range(nf):
                                acc = acc + weights[k, d, f] * feat[f]
                            pred[k, d] = acc
                    tot = 0.0
                    for d in range(ds):
                        mean = 0.0
                        for k in range(K):
                            mean = mean + pred[k, d]
                        mean = mean / K
                        var = 0.0
                        for k in range(K):
                            var = var + (pred[k, d] - mean) * (pred[k, d] - mean)
                        var = var / K
                        tot = tot + var * var
                    dis[n, p, t] = sqrt(tot)
                    k = member_of_particle[p]
                    for d in range(ds):
                        states[n, p, t + 1, d] = states[n, p, t, d] + pred[k, d]
    return states_arr, dis_arr


def tabular_rollout(const double[:, ::1] policy_cdf, const double[:, :, ::1] transition_cdf,
                    const double[:, ::1] reward_mean, const double[:, ::1] cost_mean,
                    const double[::1] init_cdf, const double[:, ::1] uniforms,
                    long episode_len):
    """Simulate a tabular policy from pre-drawn uniforms.

    ``uniforms`` has one row per step with columns (start, action,
    successor, reward, cost); the start column is read only at episode
    boundaries. Returns int arrays ``(s, a, s')`` and float arrays of
    realized Bernoulli reward and cost.
    """
    cdef Py_ssize_t L = uniforms.shape[0]
    cdef Py_ssize_t S = policy_cdf.shape[0]
    cdef Py_ssize_t A = policy_cdf.shape[1]
    cdef Py_ssize_t t, s = 0, a, s2

    s_arr = np.empty(L, dtype=np.int64)
    a_arr = np.empty(L, dtype=np.int64)
    s2_arr = np.empty(L, dtype=np.int64)
    r_arr = np.empty(L, dtype=np.float64)
    c_arr = np.empty(L, dtype=np.float64)
    cdef cnp.int64_t[::1] so = s_arr
    cdef cnp.int64_t[::1] ao = a_arr
    cdef cnp.int64_t[::1] s2o = s2_arr
    cdef double[::1] ro = r_arr
    cdef double[::1] co = c_arr

    with nogil:
        for t in range(L):
            if t % episode_len == 0:
                s = _search(init_cdf, S, uniforms[t, 0])
            a = _search(policy_cdf[s], A, uniforms[t, 1])
            s2 = _search(transition_cdf[s, a], S, uniforms[t, 2])
            so[t] = s
            ao[t] = a
            s2o[t] = s2
            ro[t] = 1.0 if uniforms[t, 3] < reward_mean[s, a] else 0.0
            co[t] = 1.0 if uniforms[t, 4] < cost_mean[s, a] else 0.0
            s = s2
    return s_arr, a_arr, s2_arr, r_arr, c_arr


cdef inline Py_ssize_t _search(const double[::1] cdf, Py_ssize_t n, double u) noexcept nogil:
    # first index with u < cdf[i]; the last entry absorbs rounding
    cdef Py_ssize_t i
    for i in range(n - 1):
        if u < cdf[i]:
            return i
    return n - 1
