"""Independent reference computations used by the tests.

Nothing here calls into the package solvers; each oracle is a direct
brute-force construction.
"""

from __future__ import annotations

import itertools

import numpy as np


def qp_enumeration(Q, c, A, b, feas_tol=1e-9):
    """Exhaustive active-set oracle for ``min 0.5 x'Qx + c'x  s.t.  Ax <= b``.

    For strictly convex ``Q`` the optimum is the minimizer over the affine
    hull of its active face, so the optimum equals the smallest objective
    among the equality-constrained minimizers that are feasible. Only active
    sets of size at most ``n`` are needed. Returns ``(x, obj)`` or ``None``
    when no candidate is feasible (the feasible set is then empty).
    """
    Q, c, A, b = (np.asarray(t, dtype=float) for t in (Q, c, A, b))
    n, m = len(c), len(b)
    scale = np.maximum(1.0, np.abs(b))
    best = None
    for k in range(min(n, m) + 1):
        combos = np.array(list(itertools.combinations(range(m), k)), dtype=int).reshape(-1, k) if k else np.zeros((1, 0), dtype=int)
        # one KKT system per active set, solved as a batch
        K = np.zeros((len(combos), n + k, n + k))
        K[:, :n, :n] = Q
        AS = A[combos]  # (C, k, n)
        K[:, :n, n:] = AS.transpose(0, 2, 1)
        K[:, n:, :n] = AS
        rhs = np.concatenate([np.broadcast_to(-c, (len(combos), n)), b[combos]], axis=1)
        sol = np.einsum("cij,cj->ci", np.linalg.pinv(K), rhs)
        # reject singular systems whose pseudo-inverse answer does not solve them
        size = np.einsum("cij,cj->ci", np.abs(K), np.abs(sol)).max(axis=1) + np.abs(rhs).max(axis=1)
        ok = np.abs(np.einsum("cij,cj->ci", K, sol) - rhs).max(axis=1) <= 1e-9 * np.maximum(1.0, size)
        X = sol[:, :n]
        if m:
            ok &= ((X @ A.T - b) <= feas_tol * scale).all(axis=1)
        if not ok.any():
            continue
        X = X[ok]
        objs = 0.5 * np.einsum("ci,ij,cj->c", X, Q, X) + X @ c
        i = int(np.argmin(objs))
        if best is None or objs[i] < best[1]:
            best = (X[i], float(objs[i]))
    return best


def grid_points(lo, hi, resolution) -> np.ndarray:
    """All points of a regular grid over the box ``[lo, hi]``, one per row."""
    axes = [np.arange(l, h + 0.5 * resolution, resolution) for l, h in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


def grid_min_violation(A, b, lo=None, hi=None, resolution=None, points=None, chunk=500_000):
    """Smallest worst-row violation of ``Ax <= b`` over a grid (built from the box or passed in)."""
    A, b = np.asarray(A, dtype=float), np.asarray(b, dtype=float)
    if points is None:
        points = grid_points(lo, hi, resolution)
    if not len(b):
        return 0.0
    worst = np.inf
    for start in range(0, len(points), chunk):
        pts = points[start : start + chunk]
        worst = min(worst, float((pts @ A.T - b).max(axis=1).min()))
    return worst


def ray_hits_disc(v, p_rel, r):
    """Does the ray from the origin along ``v`` pass strictly inside the disc of radius ``r`` at ``-p_rel``?"""
    c = -np.asarray(p_rel, dtype=float)
    v = np.asarray(v, dtype=float)
    t = max(0.0, float(c @ v) / float(v @ v))
    return float(np.linalg.norm(t * v - c)) < r


def random_qp(rng, n, m, box=None):
    """Random strictly convex QP; with ``box`` the last ``2n`` rows are ``|x_i| <= box``."""
    G = rng.normal(size=(n, n))
    Q = G @ G.T + 0.3 * np.eye(n)
    c = rng.normal(size=n) * 3.0
    A = rng.normal(size=(m, n))
    b = rng.normal(size=m) - 0.5
    if box is None:
        return Q, c, A, b
    A = np.vstack([A, np.eye(n), -np.eye(n)])
    b = np.concatenate([b, np.full(2 * n, box)])
    return Q, c, A, b
