"""Per-step problem assembly shared by the controller and the decision oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .cbf import CbfParams, hocbf_rows, robot_as_obstacle, state_limit_rows, vocbf_rows
from .clf import ClfGains, GoalSpec, clf_rows
from .geometry import (
    DEFAULT_DT,
    ControlInput,
    Limits,
    ObstacleState,
    RobotGeometry,
    RobotState,
    center_position,
)
from .solver import DEFAULT_H, DEFAULT_P, DEFAULT_R, SUBQP_CAP, QpProblem

# neighbor robots get the reciprocal (half) share of the avoidance effort
RECIPROCAL_SCALE = 0.5


class Collision(RuntimeError):
    """Physical discs overlap; no controller can be built for this state."""


@dataclass(frozen=True)
class ControllerParams:
    geom: RobotGeometry = field(default_factory=RobotGeometry)
    limits: Limits = field(default_factory=Limits)
    gains: ClfGains = field(default_factory=ClfGains)
    cbf: CbfParams = field(default_factory=CbfParams)
    H: tuple = DEFAULT_H
    R: tuple = DEFAULT_R
    P: tuple = DEFAULT_P
    dt: float = DEFAULT_DT
    sensing_radius: float = 8.0
    big_m: float | None = None
    subqp_cap: int = SUBQP_CAP
    lp_prescreen: bool = True

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.sensing_radius <= 0.0:
            raise ValueError("sensing radius must be positive")


class Neighbor(NamedTuple):
    state: RobotState
    geom: RobotGeometry
    u: ControlInput | None = None  # last applied input, when the snapshot carries it


@dataclass(frozen=True)
class Assembly:
    problem: QpProblem
    pairs: tuple  # avoidance row pairs, VO-type methods only
    others: tuple  # ObstacleState views (neighbors as constant-velocity discs)
    is_robot: tuple
    r_sums: tuple  # inflated radius sum used for each entry of ``others``
    h_values: tuple
    intrusion: bool  # some pair sits inside the safety margin this step


def effective_r_sum(dist: float, r_phys: float, r_sum: float) -> tuple[float, bool]:
    """Shrink the inflated radius when already inside the margin so the cone stays defined."""
    if dist <= r_phys:
        raise Collision(f"center distance {dist:.6g} <= physical radius sum {r_phys:.6g}")
    if dist <= r_sum:
        return r_phys + 0.5 * (dist - r_phys), True
    return r_sum, False


def sensed(
    s: RobotState,
    obstacles: Sequence[ObstacleState],
    neighbors: Sequence[Neighbor],
    params: ControllerParams,
):
    """Obstacles and neighbor discs within sensing range, in input order (obstacles first)."""
    cx, cy = center_position(s, params.geom)
    out = []
    for o in obstacles:
        out.append((o, False))
    for n in neighbors:
        out.append((robot_as_obstacle(n.state, n.geom, n.u), True))
    keep = []
    for o, is_robot in out:
        gap = math.hypot(cx - o.x_o, cy - o.y_o) - o.radius
        if gap <= params.sensing_radius:
            keep.append((o, is_robot))
    return keep


def assemble(
    s: RobotState,
    goal: GoalSpec,
    obstacles: Sequence[ObstacleState],
    neighbors: Sequence[Neighbor],
    params: ControllerParams,
    u_pre: ControlInput,
    avoidance: str = "vo",
) -> Assembly:
    """Build the base QP (CLF and state-limit rows) and the avoidance rows.

    ``avoidance="vo"`` returns one VOCBF row pair per sensed disc;
    ``avoidance="hocbf"`` appends one HOCBF row per disc to the base rows instead.
    """
    if avoidance not in ("vo", "hocbf"):
        raise ValueError(f"unknown avoidance mode {avoidance!r}")
    g = params.geom
    rows = clf_rows(s, goal, g, params.gains, params.limits)
    rows += state_limit_rows(s, params.limits, params.cbf)
    cx, cy = center_position(s, g)
    pairs, others, is_robot, r_sums, h_values = [], [], [], [], []
    intrusion = False
    for o, robot in sensed(s, obstacles, neighbors, params):
        dist = math.hypot(cx - o.x_o, cy - o.y_o)
        r_phys = g.radius + o.radius
        r_sum, inside = effective_r_sum(dist, r_phys, r_phys + g.safe_margin)
        intrusion |= inside
        if avoidance == "vo":
            scale = RECIPROCAL_SCALE if robot else 1.0
            res = vocbf_rows(s, g, o, params.cbf, r_sum=r_sum, scale=scale, label="rvo" if robot else "vo")
            pairs.append(tuple(res.rows))
            h_values.append(res.values)
        else:
            terms = hocbf_rows(s, g, o, params.cbf, r_sum=r_sum)
            rows.append(terms.row)
            h_values.append((terms.h, terms.psi1))
        others.append(o)
        is_robot.append(robot)
        r_sums.append(r_sum)
    lo, hi = params.limits.input_box(u_pre, params.dt)
    problem = QpProblem(tuple(rows), u_pre, lo, hi, params.H, params.R, params.P)
    return Assembly(problem, tuple(pairs), tuple(others), tuple(is_robot), tuple(r_sums), tuple(h_values), intrusion)
