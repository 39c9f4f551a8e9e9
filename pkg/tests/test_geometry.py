import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vocbf.geometry import (
    ControlInput,
    Limits,
    ObstacleState,
    RobotGeometry,
    RobotState,
    angle_diff,
    center_position,
    center_velocity,
    rotate,
    step_obstacle,
    step_robot,
    to_local_frame,
    wrap_angle,
)

finite = st.floats(-50, 50, allow_nan=False)
angles = st.floats(-20, 20, allow_nan=False)


def approx_tuple(t, rel=1e-12, abs=1e-12):
    return pytest.approx(t, rel=rel, abs=abs)


class TestStepRobot:
    def test_straight_line(self):
        s = step_robot(RobotState(0, 0, 0, 1, 0), ControlInput(0, 0), 0.05)
        assert s.as_tuple() == approx_tuple((0.05, 0, 0, 1, 0))

    def test_euler_uses_current_speed(self):
        s = step_robot(RobotState(0, 0, 0, 1, 0), ControlInput(1, 0), 0.05)
        assert s.as_tuple() == approx_tuple((0.05, 0, 0, 1.05, 0))

    def test_hand_evaluated_turn(self):
        s = step_robot(RobotState(0, 0, math.pi / 2, 2, 0.1), ControlInput(0, 0), 0.05)
        assert s.as_tuple() == approx_tuple((0.0, 0.1, math.pi / 2 + 0.005, 2, 0.1))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            RobotState(0, math.nan, 0)
        with pytest.raises(ValueError):
            ControlInput(math.inf, 0)
        with pytest.raises(ValueError):
            step_robot(RobotState(0, 0, 0), ControlInput(), 0.0)

    @given(st.floats(-math.pi, math.pi), st.floats(-0.5, 0.5), st.integers(1, 400))
    def test_theta_stays_wrapped(self, theta, omega, n):
        s = RobotState(0, 0, theta, 1.0, omega)
        for _ in range(n):
            s = step_robot(s, ControlInput(0, 0.6), 0.05)
            assert -math.pi < s.theta <= math.pi


class TestStepObstacle:
    def test_constant_velocity(self):
        o = step_obstacle(ObstacleState(0, 0, -0.5, 0), 0.05)
        assert o.position == approx_tuple((-0.025, 0))

    def test_at_rest_is_identity(self):
        o = ObstacleState(1, 2, radius=0.4)
        assert step_obstacle(o) == o

    def test_hand_evaluated_acceleration(self):
        o = step_obstacle(ObstacleState(1, 1, 1, 2, 0.2, 0), 0.1)
        assert o.position == approx_tuple((1.1, 1.2))
        assert o.velocity == approx_tuple((1.02, 2))

    def test_radius_positive(self):
        with pytest.raises(ValueError):
            ObstacleState(0, 0, radius=0.0)


class TestFrames:
    def test_center_position(self):
        g = RobotGeometry(0.3, 0.15)
        assert center_position(RobotState(0, 0, 0), g) == approx_tuple((0.15, 0))
        assert center_position(RobotState(1, 2, math.pi / 2), g) == approx_tuple((1, 2.15))
        assert center_position(RobotState(1, 2, 0.7), RobotGeometry(0.3, 0.0)) == (1, 2)

    def test_center_velocity(self):
        g = RobotGeometry(0.3, 0.15)
        assert center_velocity(RobotState(0, 0, 0, 2, 0), g) == approx_tuple((2, 0))
        assert center_velocity(RobotState(0, 0, 1.0, 0, 0), g) == approx_tuple((0, 0))
        assert center_velocity(RobotState(0, 0, 0, 1, 1), g) == approx_tuple((1, 0.15))

    def test_rotate(self):
        assert rotate((1, 0), 0) == approx_tuple((1, 0))
        assert rotate((1, 0), math.pi / 2) == approx_tuple((0, 1))
        assert rotate((2, 0), math.pi / 6) == approx_tuple((math.sqrt(3), 1))

    def test_local_frame(self):
        s = RobotState(1, 1, math.pi / 2)
        assert to_local_frame(s, (1, 2), RobotGeometry(0.3, 0.0)) == approx_tuple((1, 0))
        g = RobotGeometry(0.3, 0.15)
        s = RobotState(3, -1, 2.0)
        assert to_local_frame(s, center_position(s, g), g) == approx_tuple((0, 0))
        assert to_local_frame(RobotState(1, 1, 0), (3, 4), RobotGeometry(0.3, 0.0)) == approx_tuple((2, 3))

    @given(finite, finite, angles)
    def test_rotate_is_isometry(self, x, y, a):
        rx, ry = rotate((x, y), a)
        assert math.hypot(rx, ry) == pytest.approx(math.hypot(x, y), rel=1e-12, abs=1e-12)
        back = rotate((rx, ry), -a)
        assert back == approx_tuple((x, y), abs=1e-12 * max(1.0, abs(x) + abs(y)))

    @given(
        st.floats(-math.pi, math.pi),
        st.floats(0, 4),
        st.floats(-0.5, 0.5),
        st.floats(-1, 1),
        st.floats(-0.6, 0.6),
    )
    def test_center_velocity_matches_trajectory(self, theta, v, omega, a, alpha):
        g = RobotGeometry(0.3, 0.15)
        s = RobotState(0.3, -0.2, theta, v, omega)
        dt = 1e-4
        s1 = step_robot(s, ControlInput(a, alpha), dt)
        p0, p1 = center_position(s, g), center_position(s1, g)
        fd = ((p1[0] - p0[0]) / dt, (p1[1] - p0[1]) / dt)
        # Euler drives the rear axle with the current speed, so the error is O(dt)
        assert fd == approx_tuple(center_velocity(s, g), rel=0, abs=10 * dt)


class TestAngles:
    @given(st.floats(-1e3, 1e3))
    def test_wrap_range(self, a):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)

    def test_wrap_boundary(self):
        assert wrap_angle(math.pi) == pytest.approx(math.pi)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)
        assert angle_diff(-3.1, 3.1) == pytest.approx(2 * math.pi - 6.2)


class TestLimits:
    def test_input_box_is_intersection(self):
        lim = Limits()
        lo, hi = lim.input_box(ControlInput(0.9, -0.5), 0.05)
        assert lo == approx_tuple((0.6, -0.6))
        assert hi == approx_tuple((1.0, -0.35))

    def test_validation(self):
        with pytest.raises(ValueError):
            Limits(v_min=4.0, v_max=4.0)
        with pytest.raises(ValueError):
            RobotGeometry(0.3, 0.3)
