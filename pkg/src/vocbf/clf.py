"""State-feedback control Lyapunov functions for navigation.

Four CLFs drive the robot: ``V_d`` (distance, built on the rear axle so both
inputs enter), ``V_theta`` (heading toward the goal), ``V_v`` (track a desired
speed) and ``V_omega`` (damp the turn rate). Each is emitted as a relaxed row
``L_f V + L_g V u + gamma V - delta <= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import (
    Limits,
    RobotGeometry,
    RobotState,
    angle_diff,
    center_acceleration_terms,
    center_position,
    center_velocity,
)
from .rows import LE, AffineRow

DELTA_D, DELTA_THETA, DELTA_V, DELTA_OMEGA = range(4)


@dataclass(frozen=True)
class GoalSpec:
    """Goal expressed at the robot center; ``theta_g`` only locates the center."""

    x_g: float
    y_g: float
    theta_g: float = 0.0

    @classmethod
    def from_rear_axle(cls, x_gr: float, y_gr: float, theta_g: float, l: float) -> "GoalSpec":
        return cls(x_gr + l * math.cos(theta_g), y_gr + l * math.sin(theta_g), theta_g)


@dataclass(frozen=True)
class ClfGains:
    c1: float = 1.0
    c2: float = 1.0
    k1: float = 1.0
    k2: float = 1.0
    k_theta: float = 1.0
    v_d_gain: float = 0.5
    v_d_cap: float = 4.0
    gamma_d: float = 1.0
    gamma_theta: float = 1.0
    gamma_v: float = 1.0
    gamma_omega: float = 1.0
    # V_theta is ill-conditioned this close to the goal center
    theta_goal_tolerance: float = 0.2

    def __post_init__(self):
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("c1, c2 must be non-negative")
        for name in ("k1", "k2", "k_theta", "v_d_gain", "gamma_d", "gamma_theta", "gamma_v", "gamma_omega"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def _vd_terms(s: RobotState, goal: GoalSpec, geom: RobotGeometry, gains: ClfGains):
    xc, yc = center_position(s, geom)
    vx, vy = center_velocity(s, geom)
    (fx, fy), B = center_acceleration_terms(s, geom)
    e1 = xc - goal.x_g + gains.k1 * vx
    e2 = yc - goal.y_g + gains.k2 * vy
    V = gains.c1 * e1 * e1 + gains.c2 * e2 * e2
    g1 = 2.0 * gains.c1 * e1
    g2 = 2.0 * gains.c2 * e2
    LfV = g1 * (vx + gains.k1 * fx) + g2 * (vy + gains.k2 * fy)
    LgV = (
        g1 * gains.k1 * B[0][0] + g2 * gains.k2 * B[1][0],
        g1 * gains.k1 * B[0][1] + g2 * gains.k2 * B[1][1],
    )
    return V, LfV, LgV


def _bearing_terms(s: RobotState, goal: GoalSpec, geom: RobotGeometry):
    """Heading error to the goal, its rate, and the affine form of its second derivative."""
    xc, yc = center_position(s, geom)
    vx, vy = center_velocity(s, geom)
    (fx, fy), B = center_acceleration_terms(s, geom)
    dx, dy = goal.x_g - xc, goal.y_g - yc
    D = dx * dx + dy * dy
    if D == 0.0:
        raise ValueError("bearing undefined with the robot center at the goal")
    err = angle_diff(s.theta, math.atan2(dy, dx))
    # bearing rate: (dy*vx - dx*vy)/D, because d/dt(goal - center) = -center velocity
    num = dy * vx - dx * vy
    bearing_rate = num / D
    q = s.omega - bearing_rate
    D_dot = -2.0 * (dx * vx + dy * vy)
    # d(num)/dt = dy*vdot_x - dx*vdot_y
    num_dot_f = dy * fx - dx * fy
    num_dot_g = (dy * B[0][0] - dx * B[1][0], dy * B[0][1] - dx * B[1][1])
    bearing_acc_f = num_dot_f / D - num * D_dot / (D * D)
    q_dot_f = -bearing_acc_f
    q_dot_g = (-num_dot_g[0] / D, 1.0 - num_dot_g[1] / D)
    return err, q, q_dot_f, q_dot_g


def _vtheta_terms(s: RobotState, goal: GoalSpec, geom: RobotGeometry, gains: ClfGains):
    err, q, q_dot_f, q_dot_g = _bearing_terms(s, goal, geom)
    E = err + gains.k_theta * q
    V = E * E
    LfV = 2.0 * E * (q + gains.k_theta * q_dot_f)
    LgV = (2.0 * E * gains.k_theta * q_dot_g[0], 2.0 * E * gains.k_theta * q_dot_g[1])
    return V, LfV, LgV


def desired_speed(s: RobotState, goal: GoalSpec, geom: RobotGeometry, gains: ClfGains, v_max: float):
    """Desired speed proportional to the goal distance, and its time derivative."""
    xc, yc = center_position(s, geom)
    vx, vy = center_velocity(s, geom)
    dx, dy = goal.x_g - xc, goal.y_g - yc
    dist = math.hypot(dx, dy)
    cap = min(gains.v_d_cap, v_max)
    raw = gains.v_d_gain * dist
    if raw >= cap or dist == 0.0:
        return cap if raw >= cap else 0.0, 0.0
    return raw, -gains.v_d_gain * (dx * vx + dy * vy) / dist


def _vv_terms(s, goal, geom, gains, v_max):
    v_d, v_d_dot = desired_speed(s, goal, geom, gains, v_max)
    err = s.v - v_d
    return err * err, -2.0 * err * v_d_dot, (2.0 * err, 0.0)


def _vomega_terms(s):
    return s.omega * s.omega, 0.0, (0.0, 2.0 * s.omega)


def eval_Vd(s: RobotState, goal: GoalSpec, geom: RobotGeometry, gains: ClfGains = ClfGains()) -> float:
    return _vd_terms(s, goal, geom, gains)[0]


def eval_Vtheta(s: RobotState, goal: GoalSpec, geom: RobotGeometry, gains: ClfGains = ClfGains()) -> float:
    return _vtheta_terms(s, goal, geom, gains)[0]


def heading_error(s: RobotState, goal: GoalSpec, geom: RobotGeometry) -> tuple[float, float]:
    """Wrapped heading error to the goal bearing and its analytic rate ``q_theta``."""
    err, q, _, _ = _bearing_terms(s, goal, geom)
    return err, q


def eval_Vv(s, goal, geom, gains: ClfGains = ClfGains(), v_max: float = Limits().v_max) -> float:
    return _vv_terms(s, goal, geom, gains, v_max)[0]


def eval_Vomega(s: RobotState) -> float:
    return s.omega * s.omega


def goal_distance(s: RobotState, goal: GoalSpec, geom: RobotGeometry) -> float:
    xc, yc = center_position(s, geom)
    return math.hypot(goal.x_g - xc, goal.y_g - yc)


def _row(V, LfV, LgV, gamma, slot, label):
    delta = [0.0, 0.0, 0.0, 0.0]
    delta[slot] = -1.0
    return AffineRow((LgV[0], LgV[1]), tuple(delta), LfV + gamma * V, LE, label)


def clf_rows(
    s: RobotState,
    goal: GoalSpec,
    geom: RobotGeometry,
    gains: ClfGains = ClfGains(),
    limits: Limits = Limits(),
) -> list[AffineRow]:
    """Relaxed CLF rows for ``V_d``, ``V_theta``, ``V_v`` and ``V_omega``.

    The ``V_theta`` row is dropped within ``gains.theta_goal_tolerance`` of the goal.
    """
    rows = [_row(*_vd_terms(s, goal, geom, gains), gains.gamma_d, DELTA_D, "clf_d")]
    if goal_distance(s, goal, geom) > gains.theta_goal_tolerance:
        rows.append(_row(*_vtheta_terms(s, goal, geom, gains), gains.gamma_theta, DELTA_THETA, "clf_theta"))
    rows.append(_row(*_vv_terms(s, goal, geom, gains, limits.v_max), gains.gamma_v, DELTA_V, "clf_v"))
    rows.append(_row(*_vomega_terms(s), gains.gamma_omega, DELTA_OMEGA, "clf_omega"))
    return rows
