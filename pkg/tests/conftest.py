import math

import numpy as np
import pytest
from hypothesis import settings

from vocbf.geometry import ControlInput, ObstacleState, RobotGeometry, RobotState

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")


def shifted_robot(s: RobotState, u: ControlInput, h: float) -> RobotState:
    """State moved by ``h`` along the continuous vector field (``h`` may be negative)."""
    c, sn = math.cos(s.theta), math.sin(s.theta)
    return RobotState(
        s.x_p + h * s.v * c,
        s.y_p + h * s.v * sn,
        s.theta + h * s.omega,
        s.v + h * u.a,
        s.omega + h * u.alpha,
    )


def shifted_obstacle(o: ObstacleState, h: float) -> ObstacleState:
    return ObstacleState(
        o.x_o + h * o.v_ox, o.y_o + h * o.v_oy, o.v_ox + h * o.a_ox, o.v_oy + h * o.a_oy, o.a_ox, o.a_oy, o.radius
    )


def central_diff(f, h: float = 1e-5) -> float:
    return (f(h) - f(-h)) / (2.0 * h)


def close_rel(analytic: float, numeric: float, rel: float = 1e-3, floor: float = 1e-6) -> bool:
    return abs(analytic - numeric) <= max(floor, rel * max(abs(analytic), abs(numeric)))


def random_robot(rng: np.random.Generator) -> RobotState:
    return RobotState(
        rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-math.pi, math.pi), rng.uniform(0, 4), rng.uniform(-0.5, 0.5)
    )


def random_input(rng: np.random.Generator) -> ControlInput:
    return ControlInput(rng.uniform(-1, 1), rng.uniform(-0.6, 0.6))


def random_geometry(rng: np.random.Generator) -> RobotGeometry:
    radius = rng.uniform(0.2, 0.7)
    return RobotGeometry(radius, rng.uniform(0.0, 0.9 * radius), 0.15)


def random_obstacle_outside(rng: np.random.Generator, s: RobotState, g: RobotGeometry, gap=(0.2, 6.0)):
    """Obstacle whose inflated disc clears the robot center by a random gap."""
    from vocbf.geometry import center_position

    radius = rng.uniform(0.1, 1.5)
    r_sum = g.radius + g.safe_margin + radius
    dist = r_sum + rng.uniform(*gap)
    ang = rng.uniform(-math.pi, math.pi)
    cx, cy = center_position(s, g)
    return ObstacleState(
        cx + dist * math.cos(ang),
        cy + dist * math.sin(ang),
        rng.uniform(-1, 1),
        rng.uniform(-1, 1),
        rng.uniform(-0.3, 0.3),
        rng.uniform(-0.3, 0.3),
        radius,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_controller_instance(rng: np.random.Generator, m: int, params=None):
    """Assembled controller problem with ``m`` obstacles scattered around a random robot.

    Returns ``(assembly, state, goal, obstacles, params, u_pre)``.
    """
    from vocbf.assembly import ControllerParams, assemble
    from vocbf.clf import GoalSpec
    from vocbf.geometry import center_position

    params = params or ControllerParams()
    g = params.geom
    s = RobotState(rng.uniform(0, 15), rng.uniform(0, 15), rng.uniform(-math.pi, math.pi), rng.uniform(0, 3), rng.uniform(-0.4, 0.4))
    cx, cy = center_position(s, g)
    ang = rng.uniform(-math.pi, math.pi)
    dist = rng.uniform(2, 12)
    goal = GoalSpec(cx + dist * math.cos(ang), cy + dist * math.sin(ang))
    obstacles = []
    while len(obstacles) < m:
        r = rng.uniform(0.1, 1.5)
        bearing = s.theta + rng.uniform(-1.2, 1.2)
        d = g.radius + g.safe_margin + r + rng.uniform(0.1, 4.0)
        o = ObstacleState(cx + d * math.cos(bearing), cy + d * math.sin(bearing), rng.uniform(-1, 1), rng.uniform(-1, 1), radius=r)
        obstacles.append(o)
    u_pre = ControlInput(rng.uniform(-1, 1), rng.uniform(-0.6, 0.6))
    asm = assemble(s, goal, obstacles, (), params, u_pre)
    return asm, s, goal, obstacles, params, u_pre


# acceptance verdicts, printed as one line per criterion at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
