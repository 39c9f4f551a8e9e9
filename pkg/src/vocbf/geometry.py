"""Kinematics of the rear-axle unicycle robot and double-integrator obstacles.

All functions are pure; states are small frozen dataclasses of floats so they
can be shared between robots running on the same world snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_DT = 0.05


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def angle_diff(a: float, b: float) -> float:
    """Wrapped difference a - b in (-pi, pi]."""
    return wrap_angle(a - b)


def _check_finite(*values: float) -> None:
    for value in values:
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")


@dataclass(frozen=True)
class RobotState:
    """Rear-axle pose and body velocities ``(x_p, y_p, theta, v, omega)``."""

    x_p: float
    y_p: float
    theta: float
    v: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        _check_finite(self.x_p, self.y_p, self.theta, self.v, self.omega)
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.x_p, self.y_p, self.theta, self.v, self.omega)


@dataclass(frozen=True)
class ControlInput:
    """Linear and angular acceleration."""

    a: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        _check_finite(self.a, self.alpha)

    def as_tuple(self) -> tuple[float, float]:
        return (self.a, self.alpha)


@dataclass(frozen=True)
class ObstacleState:
    """Circular obstacle following double-integrator dynamics."""

    x_o: float
    y_o: float
    v_ox: float = 0.0
    v_oy: float = 0.0
    a_ox: float = 0.0
    a_oy: float = 0.0
    radius: float = 0.5

    def __post_init__(self):
        _check_finite(self.x_o, self.y_o, self.v_ox, self.v_oy, self.a_ox, self.a_oy, self.radius)
        if self.radius <= 0.0:
            raise ValueError(f"obstacle radius must be positive, got {self.radius}")

    @property
    def position(self) -> tuple[float, float]:
        return (self.x_o, self.y_o)

    @property
    def velocity(self) -> tuple[float, float]:
        return (self.v_ox, self.v_oy)

    @property
    def acceleration(self) -> tuple[float, float]:
        return (self.a_ox, self.a_oy)


@dataclass(frozen=True)
class RobotGeometry:
    """Body radius, rear-axle offset ``l`` and safety margin ``d_s``."""

    radius: float = 0.3
    l: float = 0.15
    safe_margin: float = 0.15

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError("robot radius must be positive")
        if not 0.0 <= self.l < self.radius:
            raise ValueError("rear-axle offset must satisfy 0 <= l < radius")
        if self.safe_margin < 0.0:
            raise ValueError("safe margin must be non-negative")


@dataclass(frozen=True)
class Limits:
    """Physical limits on states, inputs and input rates (defaults from the reference setup)."""

    v_min: float = 0.0
    v_max: float = 4.0
    omega_max: float = 0.5
    a_max: float = 1.0
    alpha_max: float = 0.6
    delta_a_max: float = 6.0
    delta_alpha_max: float = 3.0

    def __post_init__(self):
        if not self.v_min < self.v_max:
            raise ValueError("v_min must be below v_max")
        for name in ("omega_max", "a_max", "alpha_max", "delta_a_max", "delta_alpha_max"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def omega_min(self) -> float:
        return -self.omega_max

    def input_box(self, u_pre: ControlInput, dt: float) -> tuple[tuple[float, float], tuple[float, float]]:
        """Intersection of the absolute input box with the per-step rate box around ``u_pre``.

        Returns ``((a_lo, alpha_lo), (a_hi, alpha_hi))``.
        """
        da = self.delta_a_max * dt
        dal = self.delta_alpha_max * dt
        lo = (max(-self.a_max, u_pre.a - da), max(-self.alpha_max, u_pre.alpha - dal))
        hi = (min(self.a_max, u_pre.a + da), min(self.alpha_max, u_pre.alpha + dal))
        return lo, hi


def robot_derivative(s: RobotState, u: ControlInput) -> tuple[float, float, float, float, float]:
    c, sn = math.cos(s.theta), math.sin(s.theta)
    return (s.v * c, s.v * sn, s.omega, u.a, u.alpha)


def step_robot(s: RobotState, u: ControlInput, dt: float = DEFAULT_DT) -> RobotState:
    """Forward-Euler step; derivatives are evaluated at ``s``."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    dx, dy, dth, dv, dw = robot_derivative(s, u)
    return RobotState(
        s.x_p + dt * dx,
        s.y_p + dt * dy,
        s.theta + dt * dth,
        s.v + dt * dv,
        s.omega + dt * dw,
    )


def step_obstacle(o: ObstacleState, dt: float = DEFAULT_DT) -> ObstacleState:
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    return ObstacleState(
        o.x_o + dt * o.v_ox,
        o.y_o + dt * o.v_oy,
        o.v_ox + dt * o.a_ox,
        o.v_oy + dt * o.a_oy,
        o.a_ox,
        o.a_oy,
        o.radius,
    )


def center_position(s: RobotState, g: RobotGeometry) -> tuple[float, float]:
    return (s.x_p + g.l * math.cos(s.theta), s.y_p + g.l * math.sin(s.theta))


def center_velocity(s: RobotState, g: RobotGeometry) -> tuple[float, float]:
    c, sn = math.cos(s.theta), math.sin(s.theta)
    return (s.v * c - g.l * sn * s.omega, s.v * sn + g.l * c * s.omega)


def center_acceleration_terms(s: RobotState, g: RobotGeometry):
    """Split the center acceleration into drift and input matrix.

    ``d/dt center_velocity = drift + B @ [a, alpha]`` with ``B`` returned
    row-major as ``((b00, b01), (b10, b11))``.
    """
    c, sn = math.cos(s.theta), math.sin(s.theta)
    v, w, l = s.v, s.omega, g.l
    drift = (-v * sn * w - l * c * w * w, v * c * w - l * sn * w * w)
    B = ((c, -l * sn), (sn, l * c))
    return drift, B


def rotate(vec, angle: float) -> tuple[float, float]:
    """Rotate a 2-vector counterclockwise by ``angle``."""
    c, sn = math.cos(angle), math.sin(angle)
    x, y = vec
    return (c * x - sn * y, sn * x + c * y)


def to_local_frame(s: RobotState, world_point, g: RobotGeometry | None = None) -> tuple[float, float]:
    """Express a world point in the robot-centered, heading-aligned frame."""
    cx, cy = center_position(s, g) if g is not None else (s.x_p, s.y_p)
    return rotate((world_point[0] - cx, world_point[1] - cy), -s.theta)
