# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: dense dual active-set QP and planar half-plane feasibility.

Same algorithms and tolerances as ``_kernels_py``; see that module for the math.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY

cnp.import_array()

DEF MAXN = 16
DEF MAXM = 256

OPTIMAL = 0
INFEASIBLE = 1
MAX_N = MAXN
MAX_M = MAXM


cdef bint _cholesky(double* M, double* L, int k) noexcept nogil:
    cdef int i, j, t
    cdef double acc
    for i in range(k):
        for j in range(i + 1):
            acc = M[i * MAXN + j]
            for t in range(j):
                acc -= L[i * MAXN + t] * L[j * MAXN + t]
            if i == j:
                if acc <= 0.0:
                    return False
                L[i * MAXN + i] = sqrt(acc)
            else:
                L[i * MAXN + j] = acc / L[j * MAXN + j]
    return True


cdef void _chol_solve(double* L, double* w, int k) noexcept nogil:
    cdef int i, t
    cdef double acc
    for i in range(k):
        acc = w[i]
        for t in range(i):
            acc -= L[i * MAXN + t] * w[t]
        w[i] = acc / L[i * MAXN + i]
    for i in range(k - 1, -1, -1):
        acc = w[i]
        for t in range(i + 1, k):
            acc -= L[t * MAXN + i] * w[t]
        w[i] = acc / L[i * MAXN + i]


def solve_qp_dense(Q, c, A, b, double tol=1e-10, int max_iter=-1):
    cdef double[:, ::1] Qv = np.ascontiguousarray(Q, dtype=np.float64)
    cdef int n = Qv.shape[0]
    cdef double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef double[:, ::1] Av = np.ascontiguousarray(np.asarray(A, dtype=np.float64).reshape(-1, n))
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef int m = Av.shape[0]
    if n > MAXN or m > MAXM:
        raise ValueError("problem too large for the dense kernel")

    cdef double Lq[MAXN * MAXN]
    cdef double Mq[MAXN * MAXN]
    cdef double Qinv[MAXN * MAXN]
    cdef double Qa[MAXM * MAXN]
    cdef double norms[MAXM]
    cdef double lam_out[MAXM]
    cdef int is_active[MAXM]
    cdef int active[MAXN]
    cdef double u_act[MAXN]
    cdef double Mw[MAXN * MAXN]
    cdef double Lw[MAXN * MAXN]
    cdef double r[MAXN]
    cdef double z[MAXN]
    cdef double x[MAXN]
    cdef double col[MAXN]
    cdef int i, j, t, k, p, drop, status, iters
    cdef double acc, worst, viol, curv, t1, t2, step, ratio, slack, u_p, base

    for i in range(n):
        for j in range(n):
            Mq[i * MAXN + j] = Qv[i, j]
    if not _cholesky(Mq, Lq, n):
        raise ValueError("Q is not positive definite")
    for j in range(n):
        for i in range(n):
            col[i] = 1.0 if i == j else 0.0
        _chol_solve(Lq, col, n)
        for i in range(n):
            Qinv[i * MAXN + j] = col[i]
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.5 * (Qinv[i * MAXN + j] + Qinv[j * MAXN + i])
            Qinv[i * MAXN + j] = acc
            Qinv[j * MAXN + i] = acc

    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += Av[i, j] * Av[i, j]
        norms[i] = sqrt(acc)
        is_active[i] = 0
        lam_out[i] = 0.0
        for t in range(n):
            acc = 0.0
            for j in range(n):
                acc += Qinv[t * MAXN + j] * Av[i, j]
            Qa[i * MAXN + t] = acc
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += Qinv[i * MAXN + j] * cv[j]
        x[i] = -acc

    if max_iter < 0:
        max_iter = 10 * (m + n) + 50
    k = 0
    iters = 0
    status = -1
    while status < 0:
        iters += 1
        if iters > max_iter:
            break
        p = -1
        worst = tol
        for i in range(m):
            if is_active[i]:
                continue
            if norms[i] == 0.0:
                if -bv[i] > tol:
                    status = INFEASIBLE
                    break
                continue
            acc = 0.0
            for j in range(n):
                acc += Av[i, j] * x[j]
            viol = (acc - bv[i]) / norms[i]
            if viol > worst:
                worst = viol
                p = i
        if status >= 0:
            break
        if p < 0:
            status = OPTIMAL
            break

        u_p = 0.0
        while True:
            iters += 1
            if iters > max_iter:
                break
            if k > 0:
                for i in range(k):
                    for j in range(k):
                        acc = 0.0
                        for t in range(n):
                            acc += Av[active[i], t] * Qa[active[j] * MAXN + t]
                        Mw[i * MAXN + j] = acc
                if not _cholesky(Mw, Lw, k):
                    status = INFEASIBLE
                    break
                for i in range(k):
                    acc = 0.0
                    for t in range(n):
                        acc += Av[active[i], t] * Qa[p * MAXN + t]
                    r[i] = acc
                _chol_solve(Lw, r, k)
            for t in range(n):
                acc = -Qa[p * MAXN + t]
                for j in range(k):
                    acc += Qa[active[j] * MAXN + t] * r[j]
                z[t] = acc
            curv = 0.0
            base = 0.0
            for t in range(n):
                curv -= z[t] * Av[p, t]
                base += Av[p, t] * Qa[p * MAXN + t]
            t1 = INFINITY
            drop = -1
            for j in range(k):
                if r[j] > 0.0:
                    ratio = u_act[j] / r[j]
                    if ratio < t1:
                        t1 = ratio
                        drop = j
            if curv <= 1e-11 * base:
                if drop < 0:
                    status = INFEASIBLE
                    break
                for j in range(k):
                    u_act[j] -= t1 * r[j]
                u_p += t1
                is_active[active[drop]] = 0
                for j in range(drop, k - 1):
                    active[j] = active[j + 1]
                    u_act[j] = u_act[j + 1]
                k -= 1
                continue
            slack = -bv[p]
            for t in range(n):
                slack += Av[p, t] * x[t]
            t2 = slack / curv
            step = t1 if t1 < t2 else t2
            for t in range(n):
                x[t] += step * z[t]
            for j in range(k):
                u_act[j] -= step * r[j]
            u_p += step
            if t2 <= t1:
                active[k] = p
                u_act[k] = u_p
                is_active[p] = 1
                k += 1
                break
            is_active[active[drop]] = 0
            for j in range(drop, k - 1):
                active[j] = active[j + 1]
                u_act[j] = u_act[j + 1]
            k -= 1

    if status != INFEASIBLE:
        # on convergence or at the iteration cap, accept only a primal feasible point;
        # near-dependent active rows can drift under roundoff and are re-checked here
        worst = 0.0
        for i in range(m):
            if norms[i] > 0.0:
                acc = -bv[i]
                for j in range(n):
                    acc += Av[i, j] * x[j]
                if acc / norms[i] > worst:
                    worst = acc / norms[i]
        status = OPTIMAL if worst <= 1e-8 else INFEASIBLE

    if status == OPTIMAL:
        for j in range(k):
            lam_out[active[j]] = u_act[j]
    xo = np.empty(n)
    lo = np.empty(m)
    for i in range(n):
        xo[i] = x[i]
    for i in range(m):
        lo[i] = lam_out[i]
    return status, xo, lo, iters


def halfplane_feasible(A, b, lo, hi, double tol=1e-9):
    cdef double[:, ::1] Av = np.ascontiguousarray(np.asarray(A, dtype=np.float64).reshape(-1, 2))
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef int m = Av.shape[0]
    cdef double lo0 = lo[0], lo1 = lo[1], hi0 = hi[0], hi1 = hi[1]
    if lo0 > hi0 + tol or lo1 > hi1 + tol:
        return False
    # a convex polygon clipped by m half-planes has at most m + 4 vertices
    cdef int cap = m + 8
    cdef double[:, ::1] P = np.empty((cap, 2))
    cdef double[:, ::1] Rb = np.empty((cap, 2))
    cdef double[:, ::1] tmp
    cdef int cnt = 4, out, idx, nxt, i
    cdef double a0, a1, bi, nrm, sp, sq, tt
    P[0, 0] = lo0; P[0, 1] = lo1
    P[1, 0] = hi0; P[1, 1] = lo1
    P[2, 0] = hi0; P[2, 1] = hi1
    P[3, 0] = lo0; P[3, 1] = hi1
    for i in range(m):
        a0 = Av[i, 0]
        a1 = Av[i, 1]
        nrm = sqrt(a0 * a0 + a1 * a1)
        if nrm == 0.0:
            if bv[i] < -tol:
                return False
            continue
        a0 /= nrm
        a1 /= nrm
        bi = bv[i] / nrm + tol
        out = 0
        for idx in range(cnt):
            nxt = idx + 1
            if nxt == cnt:
                nxt = 0
            sp = a0 * P[idx, 0] + a1 * P[idx, 1] - bi
            sq = a0 * P[nxt, 0] + a1 * P[nxt, 1] - bi
            if sp <= 0.0:
                Rb[out, 0] = P[idx, 0]
                Rb[out, 1] = P[idx, 1]
                out += 1
            if (sp < 0.0 and sq > 0.0) or (sq < 0.0 and sp > 0.0):
                tt = sp / (sp - sq)
                Rb[out, 0] = P[idx, 0] + tt * (P[nxt, 0] - P[idx, 0])
                Rb[out, 1] = P[idx, 1] + tt * (P[nxt, 1] - P[idx, 1])
                out += 1
        if out == 0:
            return False
        tmp = P
        P = Rb
        Rb = tmp
        cnt = out
    return True
