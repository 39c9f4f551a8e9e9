"""Closed-loop controller: assemble rows, dispatch to a method, fall back on infeasibility."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .assembly import Assembly, ControllerParams, Neighbor, assemble, effective_r_sum, sensed
from .cbf import vo_cone, vocbf_values
from .clf import GoalSpec, desired_speed
from .decision import DecisionNet, assembly_features, load_weights, net_decide
from .geometry import ControlInput, ObstacleState, RobotState, angle_diff, center_position, center_velocity
from .solver import (
    QpSolution,
    assignment_rows,
    enumerate_subqps,
    solve_miqp,
    solve_qp,
)


class Method(str, Enum):
    MIQP = "miqp"
    SUB_QPS = "qps"
    DECNET = "decnet"
    HOCBF = "hocbf"
    CLASSIC_VO = "vo"

    @classmethod
    def parse(cls, text) -> "Method":
        if isinstance(text, cls):
            return text
        try:
            return cls(str(text).lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown method {text!r}; expected one of {names}") from None

    @property
    def uses_vocbf(self) -> bool:
        return self in (Method.MIQP, Method.SUB_QPS, Method.DECNET)


@dataclass(frozen=True)
class StepReport:
    u: ControlInput
    method: Method
    assignment: tuple
    objective: float
    feasible: bool
    h_values: tuple
    delta: tuple
    solve_time: float
    intrusion: bool = False


def _clamp(x: float, lo: float, hi: float) -> float:
    return min(max(x, lo), hi)


def braking_input(s: RobotState, params: ControllerParams, u_pre: ControlInput) -> ControlInput:
    """Strongest available deceleration toward standstill with zero angular acceleration."""
    lo, hi = params.limits.input_box(u_pre, params.dt)
    return ControlInput(_clamp(-s.v / params.dt, lo[0], hi[0]), _clamp(0.0, lo[1], hi[1]))


_default_net: DecisionNet | None = None


def default_net() -> DecisionNet:
    """Shipped decision-network weights, loaded once."""
    global _default_net
    if _default_net is None:
        _default_net = load_weights()
    return _default_net


def _solve(method: Method, s, goal, asm: Assembly, params: ControllerParams, net) -> tuple[QpSolution, tuple]:
    p = asm.problem
    if method == Method.MIQP:
        res = solve_miqp(p, asm.pairs, params.big_m)
        return res.solution, res.assignment
    if method == Method.SUB_QPS:
        res = enumerate_subqps(p, asm.pairs, params.lp_prescreen, params.subqp_cap)
        return res.solution, res.assignment
    if method == Method.DECNET:
        if asm.pairs:
            assignment = net_decide(net, assembly_features(s, goal, asm, params.geom))
        else:
            assignment = ()
        return solve_qp(p, assignment_rows(asm.pairs, assignment)), assignment
    if method == Method.HOCBF:
        return solve_qp(p), ()
    raise ValueError(f"{method} is not a QP method")


def control_step(
    s: RobotState,
    goal: GoalSpec,
    obstacles: Sequence[ObstacleState],
    neighbors: Sequence[Neighbor] = (),
    method: Method | str = Method.SUB_QPS,
    params: ControllerParams = ControllerParams(),
    u_pre: ControlInput = ControlInput(),
    net: DecisionNet | None = None,
) -> StepReport:
    """One control update. Raises :class:`Collision` if a sensed disc already overlaps the robot."""
    method = Method.parse(method)
    if method == Method.CLASSIC_VO:
        return classic_vo_step(s, goal, obstacles, neighbors, params, u_pre)
    if method == Method.DECNET and net is None:
        net = default_net()
    t0 = time.perf_counter()
    asm = assemble(s, goal, obstacles, neighbors, params, u_pre, "hocbf" if method == Method.HOCBF else "vo")
    sol, assignment = _solve(method, s, goal, asm, params, net)
    if sol.optimal:
        u, feasible, delta, obj = sol.u, True, sol.delta, sol.objective
    else:
        u, feasible, delta, obj = braking_input(s, params, u_pre), False, (0.0,) * 4, math.inf
    elapsed = time.perf_counter() - t0
    return StepReport(u, method, tuple(assignment), obj, feasible, asm.h_values, delta, elapsed, asm.intrusion)


# ---------------------------------------------------------------- classic VO baseline

VO_HORIZON = 1.0  # s, reachable-set horizon for candidate velocities
VO_SPEED_SAMPLES = 9
VO_HEADING_SAMPLES = 25
VO_SPEED_GAIN = 2.0
VO_HEADING_GAIN = 2.0
VO_TURN_GAIN = 4.0


def _vo_candidates(s: RobotState, params: ControllerParams):
    lim = params.limits
    speed = abs(s.v)
    lo = max(0.0, speed - lim.a_max * VO_HORIZON)
    hi = min(lim.v_max, speed + lim.a_max * VO_HORIZON)
    speeds = np.linspace(lo, hi, VO_SPEED_SAMPLES)
    headings = s.theta + np.linspace(-math.pi / 2, math.pi / 2, VO_HEADING_SAMPLES)
    sp, hd = np.meshgrid(speeds, headings, indexing="ij")
    return np.stack([sp.ravel() * np.cos(hd.ravel()), sp.ravel() * np.sin(hd.ravel())], axis=1)


def classic_vo_step(
    s: RobotState,
    goal: GoalSpec,
    obstacles: Sequence[ObstacleState],
    neighbors: Sequence[Neighbor] = (),
    params: ControllerParams = ControllerParams(),
    u_pre: ControlInput = ControlInput(),
) -> StepReport:
    """Sampling velocity-obstacle baseline tracked by proportional speed/heading control."""
    t0 = time.perf_counter()
    g = params.geom
    cx, cy = center_position(s, g)
    cand = _vo_candidates(s, params)
    safe = np.ones(len(cand), dtype=bool)
    h_values = []
    intrusion = False
    for o, _ in sensed(s, obstacles, neighbors, params):
        p = (cx - o.x_o, cy - o.y_o)
        dist = math.hypot(*p)
        r_phys = g.radius + o.radius
        r_sum, inside = effective_r_sum(dist, r_phys, r_phys + g.safe_margin)
        intrusion |= inside
        cone = vo_cone(p, (0.0, 0.0), r_sum)
        rel = cand - np.array(o.velocity)
        h1 = rel @ np.array(cone.N1)
        h2 = rel @ np.array(cone.N2)
        safe &= (h1 >= 0.0) | (h2 >= 0.0)
        vc = center_velocity(s, g)
        h_values.append(vocbf_values(vo_cone(p, (vc[0] - o.v_ox, vc[1] - o.v_oy), r_sum)))
    lo, hi = params.limits.input_box(u_pre, params.dt)
    v_d, _ = desired_speed(s, goal, g, params.gains, params.limits.v_max)
    bearing = math.atan2(goal.y_g - cy, goal.x_g - cx)
    pref = np.array([v_d * math.cos(bearing), v_d * math.sin(bearing)])
    if safe.any():
        idx = np.flatnonzero(safe)
        best = idx[np.argmin(np.linalg.norm(cand[idx] - pref, axis=1))]
        vx, vy = cand[best]
        target_speed = math.hypot(vx, vy)
        target_heading = math.atan2(vy, vx) if target_speed > 1e-9 else s.theta
        a = VO_SPEED_GAIN * (target_speed - s.v)
        alpha = VO_TURN_GAIN * (VO_HEADING_GAIN * angle_diff(target_heading, s.theta) - s.omega)
        u = ControlInput(_clamp(a, lo[0], hi[0]), _clamp(alpha, lo[1], hi[1]))
        feasible = True
    else:
        # hold the heading and slow down
        u = ControlInput(_clamp(-s.v / params.dt, lo[0], hi[0]), _clamp(-s.omega / params.dt, lo[1], hi[1]))
        feasible = False
    return StepReport(
        u, Method.CLASSIC_VO, (), math.nan, feasible, tuple(h_values), (0.0,) * 4, time.perf_counter() - t0, intrusion
    )
