"""Velocity-obstacle CBFs, the distance-based HOCBF baseline and state-limit CBFs.

For a robot/obstacle pair with relative position ``p = p_R - p_O`` and relative
velocity ``v = v_R - v_O`` the collision cone has half-angle ``alpha`` with
``sin(alpha) = r_sum / |p|``. Its outer normals are ``N1 = R(alpha - pi/2) p`` and
``N2 = R(pi/2 - alpha) p``; the VOCBFs are ``h_k = v . N_k`` and the relative
velocity is outside the cone iff ``h1 >= 0 or h2 >= 0``.

Every builder returns rows in ``>=`` form:
``L_g h . u + (L_f h + drift + mu * h) >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .geometry import (
    ControlInput,
    Limits,
    ObstacleState,
    RobotGeometry,
    RobotState,
    center_acceleration_terms,
    center_position,
    center_velocity,
    rotate,
)
from .rows import GE, AffineRow

_ASIN_CLAMP = 1.0 - 1e-12


class Overlap(ValueError):
    """Raised when the inflated discs overlap and the cone is undefined."""


@dataclass(frozen=True)
class CbfParams:
    mu: float = 1.0
    mu1: float = 0.75
    mu2: float = 0.65

    def __post_init__(self):
        if min(self.mu, self.mu1, self.mu2) <= 0:
            raise ValueError("class-K slopes must be positive")


@dataclass(frozen=True)
class ConeGeometry:
    p_rel: tuple[float, float]
    v_rel: tuple[float, float]
    r_sum: float
    alpha: float
    T1: tuple[float, float]
    T2: tuple[float, float]
    N1: tuple[float, float]
    N2: tuple[float, float]


class CbfRows(NamedTuple):
    rows: list
    values: tuple


def vo_cone(p_rel, v_rel, r_sum: float) -> ConeGeometry:
    px, py = float(p_rel[0]), float(p_rel[1])
    rho = math.hypot(px, py)
    if rho <= r_sum:
        raise Overlap(f"|p_rel| = {rho:.6g} <= r_sum = {r_sum:.6g}")
    alpha = math.asin(min(max(r_sum / rho, 0.0), _ASIN_CLAMP))
    T1 = rotate((px, py), alpha)
    T2 = rotate((px, py), -alpha)
    # R(-pi/2) (x, y) = (y, -x); R(pi/2) (x, y) = (-y, x)
    N1 = (T1[1], -T1[0])
    N2 = (-T2[1], T2[0])
    return ConeGeometry((px, py), (float(v_rel[0]), float(v_rel[1])), r_sum, alpha, T1, T2, N1, N2)


def vocbf_values(cone: ConeGeometry) -> tuple[float, float]:
    vx, vy = cone.v_rel
    return (vx * cone.N1[0] + vy * cone.N1[1], vx * cone.N2[0] + vy * cone.N2[1])


def _normal_jacobians(px: float, py: float, r: float):
    """Jacobians dN1/dp and dN2/dp of the outer normals w.r.t. the relative position."""
    rho2 = px * px + py * py
    rho = math.sqrt(rho2)
    s = math.sqrt(max(rho2 - r * r, 1e-300))
    # N1 = A1(rho) p with A1 = [[r, s], [-s, r]] / rho; N2 uses -s in place of s
    k = r / rho2
    q = r / s
    dA1p = (k * (-px + q * py), k * (-q * px - py))
    dA2p = (k * (-px - q * py), k * (q * px - py))
    a, b = r / rho, s / rho
    ux, uy = px / rho, py / rho
    J1 = (
        (a + dA1p[0] * ux, b + dA1p[0] * uy),
        (-b + dA1p[1] * ux, a + dA1p[1] * uy),
    )
    J2 = (
        (a + dA2p[0] * ux, -b + dA2p[0] * uy),
        (b + dA2p[1] * ux, a + dA2p[1] * uy),
    )
    return J1, J2


def _pair_kinematics(s: RobotState, g: RobotGeometry, o: ObstacleState):
    xc, yc = center_position(s, g)
    vcx, vcy = center_velocity(s, g)
    p = (xc - o.x_o, yc - o.y_o)
    v = (vcx - o.v_ox, vcy - o.v_oy)
    return p, (vcx, vcy), v


def r_sum_for(g: RobotGeometry, other_radius: float) -> float:
    return g.radius + g.safe_margin + other_radius


def _quad(v, J, w) -> float:
    """v^T J w for 2x2 J stored row-major."""
    return v[0] * (J[0][0] * w[0] + J[0][1] * w[1]) + v[1] * (J[1][0] * w[0] + J[1][1] * w[1])


def vocbf_rows(
    s: RobotState,
    g: RobotGeometry,
    o: ObstacleState,
    params: CbfParams = CbfParams(),
    r_sum: float | None = None,
    scale: float = 1.0,
    label: str = "vo",
) -> CbfRows:
    """Both VOCBF rows for one obstacle, including the obstacle drift term.

    ``scale`` multiplies ``h`` (0.5 gives the reciprocal-VO form).
    """
    if r_sum is None:
        r_sum = r_sum_for(g, o.radius)
    p, vc, v = _pair_kinematics(s, g, o)
    cone = vo_cone(p, v, r_sum)
    J1, J2 = _normal_jacobians(p[0], p[1], r_sum)
    (fx, fy), B = center_acceleration_terms(s, g)
    vo, ao = o.velocity, o.acceleration
    rows, values = [], []
    for k, (N, J) in enumerate(((cone.N1, J1), (cone.N2, J2)), start=1):
        h = v[0] * N[0] + v[1] * N[1]
        Lf = fx * N[0] + fy * N[1] + _quad(v, J, vc)
        drift = -_quad(v, J, vo) - (N[0] * ao[0] + N[1] * ao[1])
        Lg = (N[0] * B[0][0] + N[1] * B[1][0], N[0] * B[0][1] + N[1] * B[1][1])
        row = AffineRow(
            (scale * Lg[0], scale * Lg[1]),
            constant=scale * (Lf + drift + params.mu * h),
            sense=GE,
            label=f"{label}{k}",
        )
        rows.append(row)
        values.append(scale * h)
    return CbfRows(rows, tuple(values))


def robot_as_obstacle(s: RobotState, g: RobotGeometry, u: ControlInput | None = None) -> ObstacleState:
    """Obstacle view of another robot's center.

    Without ``u`` the disc is taken to move at constant velocity. With an
    input, the center acceleration that input produces is carried as well;
    a zero input gives the coasting acceleration implied by ``v`` and ``omega``.
    """
    xc, yc = center_position(s, g)
    vx, vy = center_velocity(s, g)
    ax = ay = 0.0
    if u is not None:
        (fx, fy), B = center_acceleration_terms(s, g)
        ax = fx + B[0][0] * u.a + B[0][1] * u.alpha
        ay = fy + B[1][0] * u.a + B[1][1] * u.alpha
    return ObstacleState(xc, yc, vx, vy, ax, ay, g.radius)


def rvo_rows(
    s_i: RobotState,
    s_j: RobotState,
    geom_i: RobotGeometry,
    geom_j: RobotGeometry,
    params: CbfParams = CbfParams(),
) -> CbfRows:
    """Reciprocal-VO rows for robot ``i`` against robot ``j``; ``h_rvo = h_vo / 2``."""
    other = robot_as_obstacle(s_j, geom_j)
    return vocbf_rows(s_i, geom_i, other, params, scale=0.5, label="rvo")


class HocbfTerms(NamedTuple):
    row: AffineRow
    h: float
    psi1: float


def hocbf_rows(
    s: RobotState,
    g: RobotGeometry,
    o: ObstacleState,
    params: CbfParams = CbfParams(),
    r_sum: float | None = None,
) -> HocbfTerms:
    """Second-order distance CBF ``h = |p|^2 - r_sum^2`` with linear class-K at both levels."""
    if r_sum is None:
        r_sum = r_sum_for(g, o.radius)
    p, _, v = _pair_kinematics(s, g, o)
    (fx, fy), B = center_acceleration_terms(s, g)
    h = p[0] * p[0] + p[1] * p[1] - r_sum * r_sum
    h_dot = 2.0 * (p[0] * v[0] + p[1] * v[1])
    psi1 = h_dot + params.mu1 * h
    h_ddot_f = 2.0 * (v[0] * v[0] + v[1] * v[1]) + 2.0 * (p[0] * (fx - o.a_ox) + p[1] * (fy - o.a_oy))
    Lg = (2.0 * (p[0] * B[0][0] + p[1] * B[1][0]), 2.0 * (p[0] * B[0][1] + p[1] * B[1][1]))
    row = AffineRow(Lg, constant=h_ddot_f + params.mu1 * h_dot + params.mu2 * psi1, sense=GE, label="hocbf")
    return HocbfTerms(row, h, psi1)


def state_limit_rows(s: RobotState, limits: Limits = Limits(), params: CbfParams = CbfParams()) -> list[AffineRow]:
    mu = params.mu
    return [
        AffineRow((1.0, 0.0), constant=mu * (s.v - limits.v_min), sense=GE, label="v_min"),
        AffineRow((-1.0, 0.0), constant=mu * (limits.v_max - s.v), sense=GE, label="v_max"),
        AffineRow((0.0, 1.0), constant=mu * (s.omega - limits.omega_min), sense=GE, label="omega_min"),
        AffineRow((0.0, -1.0), constant=mu * (limits.omega_max - s.omega), sense=GE, label="omega_max"),
    ]
