"""QP, LP-feasibility and MIQP solvers over :class:`AffineRow` constraint sets.

Decision vector is ``x = [a, alpha, delta_d, delta_theta, delta_v, delta_omega]``.
The objective is

    1/2 u^T H u + 1/2 (u - u_pre)^T R (u - u_pre) + delta^T P delta

subject to the rows and a box on ``u`` (already intersected with the rate box).

Avoidance rows come in pairs, one pair per obstacle. A sub-problem keeps one or
both rows of every pair according to a :class:`Direction` per obstacle.
"""

from __future__ import annotations

import functools
import heapq
import itertools
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .geometry import ControlInput
from .rows import GE, N_DELTA, N_U, AffineRow

N_X = N_U + N_DELTA

DEFAULT_H = ((1.0, 0.0), (0.0, 1.0))
DEFAULT_R = ((0.5, 0.0), (0.0, 0.5))
DEFAULT_P = (100.0, 100.0, 1.0, 1.0)

FEAS_TOL = 1e-8
KKT_TOL = 1e-6
TIE_TOL = 1e-9
INTEGRALITY_TOL = 1e-6
SUBQP_CAP = 6


class Status(IntEnum):
    OPTIMAL = 0
    INFEASIBLE = 1


class Direction(IntEnum):
    """Side on which the robot passes an obstacle; the value is the tie-break rank."""

    LEFT = 0
    RIGHT = 1
    BACKWARD = 2

    @property
    def active_rows(self) -> tuple[int, ...]:
        return ((0,), (1,), (0, 1))[self]


Assignment = tuple  # tuple[Direction, ...], one entry per obstacle
RowPair = tuple  # (AffineRow, AffineRow) in >= form


def _as_matrix(m, size: int, name: str) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 1:
        arr = np.diag(arr)
    if arr.shape != (size, size):
        raise ValueError(f"{name} must be {size}x{size}")
    if not np.allclose(arr, arr.T):
        raise ValueError(f"{name} must be symmetric")
    return arr


@dataclass(frozen=True)
class QpProblem:
    """Base CLF-CBF QP: cost, previous input, box on ``u`` and the always-present rows."""

    rows: tuple = ()
    u_pre: ControlInput = ControlInput()
    u_lo: tuple[float, float] = (-1.0, -0.6)
    u_hi: tuple[float, float] = (1.0, 0.6)
    H: np.ndarray = field(default=DEFAULT_H)
    R: np.ndarray = field(default=DEFAULT_R)
    P: np.ndarray = field(default=DEFAULT_P)

    def __post_init__(self):
        H = _as_matrix(self.H, N_U, "H")
        R = _as_matrix(self.R, N_U, "R")
        P = _as_matrix(self.P, N_DELTA, "P")
        if np.linalg.eigvalsh(H).min() <= 0.0:
            raise ValueError("H must be positive definite")
        if np.linalg.eigvalsh(R).min() < -1e-12:
            raise ValueError("R must be positive semidefinite")
        if np.linalg.eigvalsh(P).min() <= 0.0:
            raise ValueError("P must be positive definite")
        if any(lo > hi for lo, hi in zip(self.u_lo, self.u_hi)):
            raise ValueError(f"inconsistent input box {self.u_lo} > {self.u_hi}")
        for name, val in (("H", H), ("R", R), ("P", P)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "rows", tuple(self.rows))

    def with_rows(self, extra: Sequence[AffineRow]) -> "QpProblem":
        return QpProblem(self.rows + tuple(extra), self.u_pre, self.u_lo, self.u_hi, self.H, self.R, self.P)

    def cost_terms(self) -> tuple[np.ndarray, np.ndarray, float]:
        """``(Q, c, const)`` with objective ``1/2 x^T Q x + c^T x + const``."""
        Q = np.zeros((N_X, N_X))
        Q[:N_U, :N_U] = self.H + self.R
        Q[N_U:, N_U:] = 2.0 * self.P
        up = np.array(self.u_pre.as_tuple())
        c = np.zeros(N_X)
        c[:N_U] = -self.R @ up
        return Q, c, 0.5 * float(up @ self.R @ up)

    def objective(self, x) -> float:
        Q, c, k = self.cost_terms()
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ Q @ x + c @ x + k)


@dataclass(frozen=True)
class QpSolution:
    status: Status
    u: ControlInput
    delta: tuple[float, float, float, float]
    objective: float
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == Status.OPTIMAL


def _infeasible(iterations: int = 0) -> QpSolution:
    return QpSolution(Status.INFEASIBLE, ControlInput(), (0.0,) * N_DELTA, math.inf, iterations)


def _stack(rows: Sequence[AffineRow], extra_A=None, extra_b=None):
    A = np.empty((len(rows), N_X))
    b = np.empty(len(rows))
    for i, row in enumerate(rows):
        a, bi = row.as_le()
        A[i] = a
        b[i] = bi
    if extra_A is not None and len(extra_A):
        A = np.vstack([A, extra_A])
        b = np.concatenate([b, extra_b])
    return A, b


def _box_rows(p: QpProblem):
    A = np.zeros((4, N_X))
    A[0, 0], A[1, 1], A[2, 0], A[3, 1] = 1.0, 1.0, -1.0, -1.0
    b = np.array([p.u_hi[0], p.u_hi[1], -p.u_lo[0], -p.u_lo[1]])
    return A, b


def _finish(p: QpProblem, Q, c, k, A: np.ndarray, b: np.ndarray) -> QpSolution:
    status, x, lam, iters = kernels.solve_qp_dense(Q, c, A, b)
    if status != kernels.OPTIMAL:
        return _infeasible(iters)
    norms = np.linalg.norm(A, axis=1)
    norms[norms == 0.0] = 1.0
    if np.max((A @ x - b) / norms) > FEAS_TOL:
        return _infeasible(iters)
    # the box is honored exactly; the kernel may sit a hair outside it
    x[0] = min(max(x[0], p.u_lo[0]), p.u_hi[0])
    x[1] = min(max(x[1], p.u_lo[1]), p.u_hi[1])
    obj = float(0.5 * x @ Q @ x + c @ x + k)
    return QpSolution(Status.OPTIMAL, ControlInput(x[0], x[1]), tuple(float(d) for d in x[N_U:]), obj, iters)


def _solve_stacked(p: QpProblem, A: np.ndarray, b: np.ndarray) -> QpSolution:
    Q, c, k = p.cost_terms()
    Ab, bb = _box_rows(p)
    A = np.vstack([A, Ab]) if len(A) else Ab
    b = np.concatenate([b, bb])
    return _finish(p, Q, c, k, A, b)


@functools.lru_cache(maxsize=4096)
def _row_index(assignment: tuple) -> tuple[list, list]:
    """(pair, row) indices of the rows an assignment activates, in stacking order."""
    idx_j, idx_k = [], []
    for j, d in enumerate(assignment):
        for k in Direction(d).active_rows:
            idx_j.append(j)
            idx_k.append(k)
    return idx_j, idx_k


class _Prepared:
    """Arrays of one step's problem, built once and shared by all its sub-problems.

    Stacked row order is always: base rows, extra rows, box rows.
    """

    def __init__(self, p: QpProblem, pairs: Sequence[RowPair]):
        self.p = p
        self.Q, self.c, self.k = p.cost_terms()
        self.base_A, self.base_b = _stack(p.rows)
        self.box_A, self.box_b = _box_rows(p)
        self.hard_A, self.hard_b = _hard_u_rows(p.rows)
        m = len(pairs)
        self.pair_A = np.empty((m, 2, N_X))
        self.pair_b = np.empty((m, 2))
        for j, pair in enumerate(pairs):
            for k, row in enumerate(pair):
                a, bi = row.as_le()
                self.pair_A[j, k] = a
                self.pair_b[j, k] = bi
        self.lo, self.hi = tuple(p.u_lo), tuple(p.u_hi)

    def selected(self, assignment) -> tuple[np.ndarray, np.ndarray]:
        idx_j, idx_k = _row_index(tuple(assignment))
        return self.pair_A[idx_j, idx_k], self.pair_b[idx_j, idx_k]

    def lp_feasible(self, A: np.ndarray, b: np.ndarray) -> bool:
        """Hard-row feasibility of the base rows plus ``A x <= b`` (avoidance rows carry no delta)."""
        HA = np.vstack([self.hard_A, A[:, :N_U]])
        Hb = np.concatenate([self.hard_b, b])
        return bool(kernels.halfplane_feasible(HA, Hb, self.lo, self.hi))

    def solve(self, A: np.ndarray, b: np.ndarray) -> QpSolution:
        return _finish(
            self.p,
            self.Q,
            self.c,
            self.k,
            np.vstack([self.base_A, A, self.box_A]),
            np.concatenate([self.base_b, b, self.box_b]),
        )


def solve_qp(p: QpProblem, extra_rows: Sequence[AffineRow] = ()) -> QpSolution:
    """Solve the base problem with ``extra_rows`` appended."""
    A, b = _stack(p.rows + tuple(extra_rows))
    return _solve_stacked(p, A, b)


def kkt_residual(p: QpProblem, sol: QpSolution, extra_rows: Sequence[AffineRow] = ()) -> float:
    """Stationarity residual of ``sol`` using least-squares non-negative multipliers on active rows."""
    Q, c, _ = p.cost_terms()
    A, b = _stack(p.rows + tuple(extra_rows))
    Ab, bb = _box_rows(p)
    A = np.vstack([A, Ab]) if len(A) else Ab
    b = np.concatenate([b, bb])
    x = np.array([*sol.u.as_tuple(), *sol.delta])
    grad = Q @ x + c
    active = np.abs(A @ x - b) <= 1e-7 * np.maximum(1.0, np.abs(b))
    if not active.any():
        return float(np.linalg.norm(grad))
    lam, *_ = np.linalg.lstsq(A[active].T, -grad, rcond=None)
    lam = np.maximum(lam, 0.0)
    return float(np.linalg.norm(grad + A[active].T @ lam))


def _hard_u_rows(rows: Sequence[AffineRow]):
    A = []
    b = []
    for row in rows:
        if row.is_hard:
            a, bi = row.as_le()
            A.append(a[:N_U])
            b.append(bi)
    return np.array(A, dtype=float).reshape(-1, N_U), np.array(b, dtype=float)


def lp_feasible(rows: Sequence[AffineRow], u_lo, u_hi) -> bool:
    """True iff some ``u`` in the box satisfies every hard row (CLF rows are ignored)."""
    A, b = _hard_u_rows(rows)
    return bool(kernels.halfplane_feasible(A, b, tuple(u_lo), tuple(u_hi)))


def assignment_rows(pairs: Sequence[RowPair], assignment: Sequence[Direction]) -> list[AffineRow]:
    if len(pairs) != len(assignment):
        raise ValueError("one direction per obstacle is required")
    out = []
    for pair, d in zip(pairs, assignment):
        out.extend(pair[k] for k in Direction(d).active_rows)
    return out


def all_assignments(m: int):
    """Every assignment in lexicographic order (Left < Right < Backward)."""
    return itertools.product(tuple(Direction), repeat=m)


def _check_pairs(pairs):
    for pair in pairs:
        if len(pair) != 2 or any(r.sense != GE or not r.is_hard for r in pair):
            raise ValueError("avoidance rows must be hard >= rows in pairs")


class SubQpResult(NamedTuple):
    solution: QpSolution
    assignment: tuple
    attempted: int
    skipped: int


def enumerate_subqps(
    p: QpProblem,
    pairs: Sequence[RowPair],
    use_lp_prescreen: bool = False,
    cap: int = SUBQP_CAP,
) -> SubQpResult:
    """Solve all ``3^M`` sub-QPs and keep the cheapest; ties go to the lowest assignment.

    With ``use_lp_prescreen`` a sub-QP whose hard rows admit no ``u`` in the box
    is skipped without calling the QP solver.
    """
    _check_pairs(pairs)
    m = len(pairs)
    if m > cap:
        raise ValueError(f"{m} obstacles exceed the enumeration cap of {cap}")
    prep = _Prepared(p, pairs)
    best, best_asg = _infeasible(), ()
    attempted = skipped = 0
    for asg in all_assignments(m):
        A, b = prep.selected(asg)
        attempted += 1
        if use_lp_prescreen and not prep.lp_feasible(A, b):
            skipped += 1
            continue
        sol = prep.solve(A, b)
        if sol.optimal and sol.objective < best.objective - TIE_TOL:
            best, best_asg = sol, asg
    if not best.optimal:
        return SubQpResult(best, (), attempted, skipped)
    return SubQpResult(best, tuple(best_asg), attempted, skipped)


def default_big_m(pairs: Sequence[RowPair]) -> float:
    consts = [abs(r.constant) for pair in pairs for r in pair]
    return 1e4 * max([1.0, *consts])


class MiqpResult(NamedTuple):
    solution: QpSolution
    assignment: tuple
    nodes: int


# branch state of one obstacle: binary z1 unfixed, fixed to 1 (row 1 enforced), fixed to 0 (row 2 enforced)
_FREE, _Z1_ONE, _Z1_ZERO = 0, 1, 2


def _node_rows(prep: _Prepared, state, G):
    """Big-M rows of a node relaxation projected onto ``(u, delta)``.

    With ``v_k = -(row_k)`` the relaxed disjunction ``v_k <= G (1 - z_k)``,
    ``z1 + z2 >= 1``, ``0 <= z <= 1`` admits some ``z`` iff
    ``v1 <= G, v2 <= G, v1 + v2 <= G``.
    """
    A, b = [], []
    for (a1, a2), (c1, c2), st in zip(prep.pair_A, prep.pair_b, state):
        if st == _FREE:
            A += [a1, a2, a1 + a2]
            b += [c1 + G, c2 + G, c1 + c2 + G]
        elif st == _Z1_ONE:
            A += [a1, a2]
            b += [c1, c2 + G]
        else:
            A += [a2, a1]
            b += [c2, c1 + G]
    return np.array(A).reshape(-1, N_X), np.array(b)


def _recover_z(v1: float, v2: float, G: float) -> tuple[float, float]:
    """Minimum-norm relaxed ``z`` for an unfixed obstacle given row violations ``v``."""
    ub1 = min(1.0, 1.0 - v1 / G)
    ub2 = min(1.0, 1.0 - v2 / G)
    if ub1 >= 0.5 and ub2 >= 0.5:
        return 0.5, 0.5
    if ub1 < 0.5:
        return ub1, 1.0 - ub1
    return 1.0 - ub2, ub2


def _is_integral(z: float) -> bool:
    return min(abs(z), abs(1.0 - z)) <= INTEGRALITY_TOL


def solve_miqp(p: QpProblem, pairs: Sequence[RowPair], big_m: float | None = None) -> MiqpResult:
    """Best-first branch-and-bound over the per-obstacle binaries.

    Each obstacle has binaries ``z1, z2`` with ``z1 + z2 >= 1``; ``z_k = 1``
    enforces row ``k``. Branching fixes ``z1``; once ``z1 = 0`` the cover
    constraint forces ``z2 = 1``.
    """
    _check_pairs(pairs)
    m = len(pairs)
    G = default_big_m(pairs) if big_m is None else float(big_m)
    if G <= 0.0:
        raise ValueError("big-M must be positive")
    prep = _Prepared(p, pairs)
    counter = itertools.count()
    incumbent, inc_asg = _infeasible(), ()
    nodes = 0

    def relax(state):
        return prep.solve(*_node_rows(prep, state, G))

    root = (_FREE,) * m
    heap = []
    sol = relax(root)
    nodes += 1
    if sol.optimal:
        heapq.heappush(heap, (sol.objective, next(counter), root, sol))
    while heap:
        bound, _, state, sol = heapq.heappop(heap)
        if bound >= incumbent.objective - 1e-12:
            continue
        x = (*sol.u.as_tuple(), *sol.delta)
        branch_at = -1
        asg = []
        for j, ((r1, r2), st) in enumerate(zip(pairs, state)):
            if st == _Z1_ZERO:
                asg.append(Direction.RIGHT)
                continue
            v1 = -r1.value(x[:N_U], x[N_U:])
            v2 = -r2.value(x[:N_U], x[N_U:])
            if st == _Z1_ONE:
                # z2 is free in [0, 1 - v2/G]; its minimum-norm value is 0
                asg.append(Direction.LEFT)
                continue
            z1, z2 = _recover_z(v1, v2, G)
            if not (_is_integral(z1) and _is_integral(z2)):
                branch_at = j
                break
            z1, z2 = round(z1), round(z2)
            asg.append(Direction.BACKWARD if z1 and z2 else Direction.LEFT if z1 else Direction.RIGHT)
        if branch_at < 0:
            if sol.objective < incumbent.objective:
                incumbent, inc_asg = sol, tuple(asg)
            continue
        for fix in (_Z1_ONE, _Z1_ZERO):
            child = state[:branch_at] + (fix,) + state[branch_at + 1 :]
            csol = relax(child)
            nodes += 1
            if csol.optimal and csol.objective < incumbent.objective - 1e-12:
                heapq.heappush(heap, (csol.objective, next(counter), child, csol))
    if not incumbent.optimal:
        return MiqpResult(incumbent, (), nodes)
    return MiqpResult(incumbent, inc_asg, nodes)
