"""Pure-Python kernels; behavior must match the compiled ``_kernels`` module.

``solve_qp_dense`` is a Goldfarb-Idnani dual active-set method for

    min 1/2 x^T Q x + c^T x   s.t.   A x <= b

with Q symmetric positive definite. It starts from the unconstrained minimum
and adds the most violated (normalized) row until all rows hold; infeasibility
shows up as a violated row that no dual step can repair.

``halfplane_feasible`` decides whether a box in the plane intersected with
half-planes ``A u <= b`` is non-empty by convex polygon clipping.
"""

from __future__ import annotations

import math

import numpy as np

OPTIMAL = 0
INFEASIBLE = 1

MAX_N = 16
MAX_M = 256


def _cholesky(M, k):
    """In-place lower Cholesky of the leading k x k block (list of lists). Returns False if not PD."""
    L = [[0.0] * k for _ in range(k)]
    for i in range(k):
        for j in range(i + 1):
            acc = M[i][j]
            for t in range(j):
                acc -= L[i][t] * L[j][t]
            if i == j:
                if acc <= 0.0:
                    return None
                L[i][i] = math.sqrt(acc)
            else:
                L[i][j] = acc / L[j][j]
    return L


def _chol_solve(L, y):
    k = len(y)
    w = list(y)
    for i in range(k):
        acc = w[i]
        for t in range(i):
            acc -= L[i][t] * w[t]
        w[i] = acc / L[i][i]
    for i in range(k - 1, -1, -1):
        acc = w[i]
        for t in range(i + 1, k):
            acc -= L[t][i] * w[t]
        w[i] = acc / L[i][i]
    return w


def solve_qp_dense(Q, c, A, b, tol=1e-10, max_iter=-1):
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, Q.shape[0])
    b = np.asarray(b, dtype=float)
    n = Q.shape[0]
    m = A.shape[0]
    if n > MAX_N or m > MAX_M:
        raise ValueError("problem too large for the dense kernel")
    Lq = _cholesky(Q.tolist(), n)
    if Lq is None:
        raise ValueError("Q is not positive definite")
    Qinv = np.array([_chol_solve(Lq, list(col)) for col in np.eye(n)]).T
    Qinv = 0.5 * (Qinv + Qinv.T)

    Al = A.tolist()
    bl = b.tolist()
    Qi = Qinv.tolist()
    norms = [math.sqrt(sum(a * a for a in row)) for row in Al]
    x = [-sum(Qi[i][j] * c[j] for j in range(n)) for i in range(n)]
    # Qinv a_i is reused in every step computation
    Qa = [[sum(Qi[i][j] * row[j] for j in range(n)) for i in range(n)] for row in Al]

    active: list[int] = []
    u_act: list[float] = []
    is_active = [False] * m
    lam = [0.0] * m
    if max_iter < 0:
        max_iter = 10 * (m + n) + 50
    iters = 0

    def dot(a, bb):
        return sum(p * q for p, q in zip(a, bb))

    while True:
        iters += 1
        if iters > max_iter:
            break
        p = -1
        worst = tol
        for i in range(m):
            if is_active[i]:
                continue
            if norms[i] == 0.0:
                if -bl[i] > tol:
                    return INFEASIBLE, np.array(x), np.array(lam), iters
                continue
            viol = (dot(Al[i], x) - bl[i]) / norms[i]
            if viol > worst:
                worst = viol
                p = i
        if p < 0:
            break

        u_p = 0.0
        while True:
            iters += 1
            if iters > max_iter:
                break
            k = len(active)
            ap = Al[p]
            w = Qa[p]
            if k:
                M = [[dot(Al[active[i]], Qa[active[j]]) for j in range(k)] for i in range(k)]
                L = _cholesky(M, k)
                if L is None:
                    return INFEASIBLE, np.array(x), np.array(lam), iters
                r = _chol_solve(L, [dot(Al[i], w) for i in active])
                z = [-w[t] + sum(Qa[active[j]][t] * r[j] for j in range(k)) for t in range(n)]
            else:
                r = []
                z = [-wt for wt in w]
            curv = -dot(z, ap)
            t1 = math.inf
            drop = -1
            for j in range(k):
                if r[j] > 0.0:
                    ratio = u_act[j] / r[j]
                    if ratio < t1:
                        t1 = ratio
                        drop = j
            if curv <= 1e-11 * dot(ap, w):
                if drop < 0:
                    return INFEASIBLE, np.array(x), np.array(lam), iters
                for j in range(k):
                    u_act[j] -= t1 * r[j]
                u_p += t1
                is_active[active[drop]] = False
                del active[drop]
                del u_act[drop]
                continue
            slack = dot(ap, x) - bl[p]
            t2 = slack / curv
            t = min(t1, t2)
            x = [x[i] + t * z[i] for i in range(n)]
            for j in range(k):
                u_act[j] -= t * r[j]
            u_p += t
            if t2 <= t1:
                active.append(p)
                u_act.append(u_p)
                is_active[p] = True
                break
            is_active[active[drop]] = False
            del active[drop]
            del u_act[drop]

    # on convergence or at the iteration cap, accept only a primal feasible point;
    # near-dependent active rows can drift under roundoff and are re-checked here
    worst = max(
        [(dot(Al[i], x) - bl[i]) / norms[i] for i in range(m) if norms[i] > 0.0] or [0.0]
    )
    status = OPTIMAL if worst <= 1e-8 else INFEASIBLE
    if status == OPTIMAL:
        for j, i in enumerate(active):
            lam[i] = u_act[j]
    return status, np.array(x), np.array(lam), iters


def halfplane_feasible(A, b, lo, hi, tol=1e-9):
    """True iff some u with lo <= u <= hi satisfies every row of A u <= b (rows relaxed by tol*|a|)."""
    if lo[0] > hi[0] + tol or lo[1] > hi[1] + tol:
        return False
    poly = [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])]
    A = np.asarray(A, dtype=float).reshape(-1, 2).tolist()
    b = np.asarray(b, dtype=float).tolist()
    for (a0, a1), bi in zip(A, b):
        nrm = math.hypot(a0, a1)
        if nrm == 0.0:
            if bi < -tol:
                return False
            continue
        a0 /= nrm
        a1 /= nrm
        bi = bi / nrm + tol
        out = []
        cnt = len(poly)
        for idx in range(cnt):
            P = poly[idx]
            Qp = poly[(idx + 1) % cnt]
            sp = a0 * P[0] + a1 * P[1] - bi
            sq = a0 * Qp[0] + a1 * Qp[1] - bi
            if sp <= 0.0:
                out.append(P)
            if (sp < 0.0 < sq) or (sq < 0.0 < sp):
                t = sp / (sp - sq)
                out.append((P[0] + t * (Qp[0] - P[0]), P[1] + t * (Qp[1] - P[1])))
        if not out:
            return False
        poly = out
    return True
