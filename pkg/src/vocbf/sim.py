"""Scenario configuration, closed-loop simulation, batch evaluation and scripted scenes."""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .assembly import Collision, ControllerParams, Neighbor
from .cbf import CbfParams
from .clf import ClfGains, GoalSpec
from .controller import Method, StepReport, control_step
from .decision import DecisionNet
from .geometry import (
    ControlInput,
    Limits,
    ObstacleState,
    RobotGeometry,
    RobotState,
    center_position,
    center_velocity,
    step_obstacle,
    step_robot,
)
from .solver import DEFAULT_H, DEFAULT_P, DEFAULT_R, SUBQP_CAP


# constant_velocity: straight-line motion at the observed center velocity
# coasting: the center acceleration the neighbor's observed v and omega imply under zero input
# shared_input: as coasting, plus the neighbor's last applied input (requires communication)
NEIGHBOR_MODELS = ("constant_velocity", "coasting", "shared_input")


class ConfigError(ValueError):
    """Invalid scenario configuration; the message starts with the offending field path."""


class Outcome(str, Enum):
    COMPLETED = "completed"
    DEADLOCK = "deadlock"
    COLLISION = "collision"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class RobotSpec:
    start: RobotState
    goal: GoalSpec
    radius: float = 0.3
    l: float = 0.15
    limits: Limits = field(default_factory=Limits)


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.05
    t_max: float = 40.0
    d_s: float = 0.15
    gains: ClfGains = field(default_factory=ClfGains)
    cbf: CbfParams = field(default_factory=CbfParams)
    H: tuple = DEFAULT_H
    R: tuple = DEFAULT_R
    P: tuple = DEFAULT_P
    sensing_radius: float = 8.0
    seed: int = 0
    goal_tolerance: float = 0.25
    deadlock_speed: float = 0.05
    deadlock_time: float = 3.0
    big_m: float | None = None
    subqp_cap: int = SUBQP_CAP
    lp_prescreen: bool = True
    # how a robot extrapolates its neighbors: see NEIGHBOR_MODELS
    neighbor_model: str = "coasting"


@dataclass(frozen=True)
class ScenarioConfig:
    robots: tuple
    obstacles: tuple = ()
    params: SimParams = field(default_factory=SimParams)
    method: Method = Method.SUB_QPS
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "robots", tuple(self.robots))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "method", Method.parse(self.method))
        validate(self)

    def geometry(self, i: int) -> RobotGeometry:
        r = self.robots[i]
        return RobotGeometry(r.radius, r.l, self.params.d_s)

    def controller_params(self, i: int) -> ControllerParams:
        p = self.params
        return ControllerParams(
            geom=self.geometry(i),
            limits=self.robots[i].limits,
            gains=p.gains,
            cbf=p.cbf,
            H=p.H,
            R=p.R,
            P=p.P,
            dt=p.dt,
            sensing_radius=p.sensing_radius,
            big_m=p.big_m,
            subqp_cap=p.subqp_cap,
            lp_prescreen=p.lp_prescreen,
        )

    def with_method(self, method) -> "ScenarioConfig":
        return replace(self, method=Method.parse(method))


def validate(cfg: ScenarioConfig) -> None:
    p = cfg.params
    if not p.dt > 0.0:
        raise ConfigError("params.dt: must be positive")
    if not p.t_max > p.dt:
        raise ConfigError("params.t_max: must exceed dt")
    if p.d_s < 0.0:
        raise ConfigError("params.d_s: must be non-negative")
    if p.neighbor_model not in NEIGHBOR_MODELS:
        raise ConfigError(f"params.neighbor_model: expected one of {', '.join(NEIGHBOR_MODELS)}")
    if not cfg.robots:
        raise ConfigError("robots: at least one robot is required")
    for i, r in enumerate(cfg.robots):
        if r.radius <= 0.0:
            raise ConfigError(f"robots[{i}].radius: must be positive")
        if not 0.0 <= r.l < r.radius:
            raise ConfigError(f"robots[{i}].l: must satisfy 0 <= l < radius")
    centers = [center_position(r.start, RobotGeometry(r.radius, r.l, p.d_s)) for r in cfg.robots]
    for i, (ci, ri) in enumerate(zip(centers, cfg.robots)):
        for j, o in enumerate(cfg.obstacles):
            if math.hypot(ci[0] - o.x_o, ci[1] - o.y_o) <= ri.radius + o.radius:
                raise ConfigError(f"obstacles[{j}]: overlaps robots[{i}] at start")
        for k in range(i + 1, len(cfg.robots)):
            ck, rk = centers[k], cfg.robots[k]
            if math.hypot(ci[0] - ck[0], ci[1] - ck[1]) <= ri.radius + rk.radius:
                raise ConfigError(f"robots[{k}]: overlaps robots[{i}] at start")


# ---------------------------------------------------------------- config files


def _pair(value, path: str) -> tuple[float, float]:
    try:
        x, y = value
        return float(x), float(y)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected a pair of numbers") from None


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}: unknown field")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _robot_from_dict(d: dict, path: str) -> RobotSpec:
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    if "start" not in d or "goal" not in d:
        raise ConfigError(f"{path}: start and goal are required")
    start = d["start"]
    try:
        state = RobotState(
            float(start["x"]), float(start["y"]), float(start.get("theta", 0.0)),
            float(start.get("v", 0.0)), float(start.get("omega", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.start: {exc}") from None
    goal = d["goal"]
    try:
        goal_spec = GoalSpec(float(goal["x"]), float(goal["y"]), float(goal.get("theta", 0.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.goal: {exc}") from None
    limits = _build(Limits, d.get("limits", {}), f"{path}.limits")
    unknown = set(d) - {"start", "goal", "radius", "l", "limits"}
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}: unknown field")
    try:
        return RobotSpec(state, goal_spec, float(d.get("radius", 0.3)), float(d.get("l", 0.15)), limits)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _obstacle_from_dict(d: dict, path: str) -> ObstacleState:
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = set(d) - {"position", "velocity", "acceleration", "radius"}
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}: unknown field")
    if "position" not in d:
        raise ConfigError(f"{path}.position: required")
    x, y = _pair(d["position"], f"{path}.position")
    vx, vy = _pair(d.get("velocity", (0.0, 0.0)), f"{path}.velocity")
    ax, ay = _pair(d.get("acceleration", (0.0, 0.0)), f"{path}.acceleration")
    try:
        return ObstacleState(x, y, vx, vy, ax, ay, float(d.get("radius", 0.5)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.radius: {exc}") from None


def _params_from_dict(d: dict, path: str = "params") -> SimParams:
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    d = dict(d)
    kw = {}
    if "gains" in d:
        kw["gains"] = _build(ClfGains, d.pop("gains"), f"{path}.gains")
    if "mu" in d:
        kw["cbf"] = _build(CbfParams, d.pop("mu"), f"{path}.mu")
    if "weights" in d:
        w = d.pop("weights")
        if not isinstance(w, dict) or set(w) - {"H", "R", "P"}:
            raise ConfigError(f"{path}.weights: expected an object with H, R, P")
        for key in ("H", "R", "P"):
            if key in w:
                kw[key] = tuple(tuple(r) if isinstance(r, list) else r for r in w[key])
    kw.update(d)
    return _build(SimParams, kw, path)


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>: expected an object")
    unknown = set(data) - {"robots", "obstacles", "params", "method", "name"}
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown field")
    robots = data.get("robots")
    if not isinstance(robots, list):
        raise ConfigError("robots: expected a list")
    obstacles = data.get("obstacles", [])
    if not isinstance(obstacles, list):
        raise ConfigError("obstacles: expected a list")
    try:
        method = Method.parse(data.get("method", Method.SUB_QPS))
    except ValueError as exc:
        raise ConfigError(f"method: {exc}") from None
    return ScenarioConfig(
        tuple(_robot_from_dict(r, f"robots[{i}]") for i, r in enumerate(robots)),
        tuple(_obstacle_from_dict(o, f"obstacles[{j}]") for j, o in enumerate(obstacles)),
        _params_from_dict(data.get("params", {})),
        method,
        str(data.get("name", "")),
    )


def config_to_dict(cfg: ScenarioConfig) -> dict:
    p = cfg.params
    params = {
        k: v
        for k, v in asdict(p).items()
        if k not in ("gains", "cbf", "H", "R", "P")
    }
    params["gains"] = asdict(p.gains)
    params["mu"] = asdict(p.cbf)
    params["weights"] = {
        "H": np.asarray(p.H).tolist(),
        "R": np.asarray(p.R).tolist(),
        "P": np.asarray(p.P).tolist(),
    }
    return {
        "name": cfg.name,
        "method": cfg.method.value,
        "robots": [
            {
                "start": dict(zip(("x", "y", "theta", "v", "omega"), r.start.as_tuple())),
                "goal": {"x": r.goal.x_g, "y": r.goal.y_g, "theta": r.goal.theta_g},
                "radius": r.radius,
                "l": r.l,
                "limits": asdict(r.limits),
            }
            for r in cfg.robots
        ],
        "obstacles": [
            {"position": [o.x_o, o.y_o], "velocity": [o.v_ox, o.v_oy], "acceleration": [o.a_ox, o.a_oy], "radius": o.radius}
            for o in cfg.obstacles
        ],
        "params": params,
    }


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<file>: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(data)


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- simulation


@dataclass(frozen=True)
class StepRecord:
    t: float
    robot: int
    state: tuple
    u: tuple
    feasible: bool
    objective: float
    assignment: str
    h_min: float
    clearance: float  # min center distance minus physical radius sum
    solve_time: float
    intrusion: bool


@dataclass
class TrajectoryLog:
    dt: float
    records: list = field(default_factory=list)
    obstacles: list = field(default_factory=list)  # (t, j, x, y, vx, vy)


@dataclass(frozen=True)
class RobotSummary:
    outcome: Outcome
    reach_time: float | None
    min_clearance: float
    min_margin_clearance: float
    infeasible_steps: int
    intrusion_steps: int
    steps: int
    path_length: float
    mean_solve_time: float
    median_solve_time: float


@dataclass(frozen=True)
class RunOutcome:
    robots: tuple

    @property
    def outcome(self) -> Outcome:
        """Completed only if every robot completed; otherwise the most severe robot outcome."""
        order = (Outcome.COLLISION, Outcome.DEADLOCK, Outcome.TIMEOUT, Outcome.COMPLETED)
        return min((r.outcome for r in self.robots), key=order.index)

    @property
    def completed(self) -> bool:
        return self.outcome == Outcome.COMPLETED

    @property
    def infeasible_steps(self) -> int:
        return sum(r.infeasible_steps for r in self.robots)

    @property
    def category(self) -> str:
        """Batch category: completed, infeasible (failed after an infeasible step), or the failure outcome."""
        if self.completed:
            return "completed"
        if self.infeasible_steps:
            return "infeasible"
        return self.outcome.value

    @property
    def reach_time(self) -> float | None:
        if not self.completed:
            return None
        return max(r.reach_time for r in self.robots)

    @property
    def min_clearance(self) -> float:
        return min(r.min_clearance for r in self.robots)

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "category": self.category,
            "reach_time": self.reach_time,
            "min_clearance": self.min_clearance,
            "robots": [{**asdict(r), "outcome": r.outcome.value} for r in self.robots],
        }


StepHook = Callable[[int, RobotState, GoalSpec, list, list, ControllerParams, ControlInput, StepReport], None]


def _frozen_disc(s: RobotState, geom: RobotGeometry) -> ObstacleState:
    x, y = center_position(s, geom)
    return ObstacleState(x, y, 0.0, 0.0, 0.0, 0.0, geom.radius)


def _neighbor_input(model: str, u_last: ControlInput) -> ControlInput | None:
    if model == "constant_velocity":
        return None
    if model == "coasting":
        return ControlInput()
    return u_last


def run_scenario(
    cfg: ScenarioConfig,
    net: DecisionNet | None = None,
    on_step: StepHook | None = None,
    record: bool = True,
) -> tuple[TrajectoryLog, RunOutcome]:
    """Simulate until every robot has an outcome.

    All robots act on the same snapshot each step. A robot that has finished
    (any outcome) stays in place and is seen by the others as a static disc.
    """
    p = cfg.params
    n = len(cfg.robots)
    geoms = [cfg.geometry(i) for i in range(n)]
    cparams = [cfg.controller_params(i) for i in range(n)]
    states = [r.start for r in cfg.robots]
    u_pre = [ControlInput() for _ in range(n)]
    obstacles = list(cfg.obstacles)
    outcome: list[Outcome | None] = [None] * n
    reach = [None] * n
    still = [0] * n
    still_limit = int(round(p.deadlock_time / p.dt))
    min_clear = [math.inf] * n
    min_margin = [math.inf] * n
    infeasible = [0] * n
    intrusions = [0] * n
    steps = [0] * n
    path = [0.0] * n
    times: list[list[float]] = [[] for _ in range(n)]
    log = TrajectoryLog(p.dt)
    k = 0
    t = 0.0
    while True:
        t = k * p.dt
        centers = [center_position(s, g) for s, g in zip(states, geoms)]
        # clearances and collisions on the current snapshot
        for i in range(n):
            if outcome[i] is not None:
                continue
            ci, gi = centers[i], geoms[i]
            for o in obstacles:
                d = math.hypot(ci[0] - o.x_o, ci[1] - o.y_o)
                min_clear[i] = min(min_clear[i], d - gi.radius - o.radius)
                min_margin[i] = min(min_margin[i], d - gi.radius - o.radius - gi.safe_margin)
            for j in range(n):
                if j == i:
                    continue
                d = math.hypot(ci[0] - centers[j][0], ci[1] - centers[j][1])
                min_clear[i] = min(min_clear[i], d - gi.radius - geoms[j].radius)
                min_margin[i] = min(min_margin[i], d - gi.radius - geoms[j].radius - gi.safe_margin)
            if min_clear[i] <= 0.0:
                outcome[i] = Outcome.COLLISION
        for i in range(n):
            if outcome[i] is not None:
                continue
            g = cfg.robots[i].goal
            if math.hypot(centers[i][0] - g.x_g, centers[i][1] - g.y_g) < p.goal_tolerance:
                outcome[i] = Outcome.COMPLETED
                reach[i] = t
            elif still[i] >= still_limit:
                outcome[i] = Outcome.DEADLOCK
            elif t >= p.t_max - 1e-9:
                outcome[i] = Outcome.TIMEOUT
        if record:
            for j, o in enumerate(obstacles):
                log.obstacles.append((t, j, o.x_o, o.y_o, o.v_ox, o.v_oy))
        if all(o is not None for o in outcome):
            break

        new_states = list(states)
        u_snap = list(u_pre)
        for i in range(n):
            if outcome[i] is not None:
                continue
            seen = list(obstacles)
            neighbors = []
            for j in range(n):
                if j == i:
                    continue
                if outcome[j] is None:
                    neighbors.append(Neighbor(states[j], geoms[j], _neighbor_input(p.neighbor_model, u_snap[j])))
                else:
                    seen.append(_frozen_disc(states[j], geoms[j]))
            try:
                rep = control_step(states[i], cfg.robots[i].goal, seen, neighbors, cfg.method, cparams[i], u_pre[i], net)
            except Collision:
                outcome[i] = Outcome.COLLISION
                continue
            if on_step is not None:
                on_step(i, states[i], cfg.robots[i].goal, seen, neighbors, cparams[i], u_pre[i], rep)
            steps[i] += 1
            infeasible[i] += not rep.feasible
            intrusions[i] += rep.intrusion
            times[i].append(rep.solve_time)
            if record:
                h_all = [h for pair in rep.h_values for h in pair]
                log.records.append(
                    StepRecord(
                        t,
                        i,
                        states[i].as_tuple(),
                        rep.u.as_tuple(),
                        rep.feasible,
                        rep.objective,
                        "".join("LRB"[d] for d in rep.assignment),
                        min(h_all) if h_all else math.nan,
                        min_clear[i],
                        rep.solve_time,
                        rep.intrusion,
                    )
                )
            new_states[i] = step_robot(states[i], rep.u, p.dt)
            u_pre[i] = rep.u
            nc = center_position(new_states[i], geoms[i])
            path[i] += math.hypot(nc[0] - centers[i][0], nc[1] - centers[i][1])
            speed = math.hypot(*center_velocity(new_states[i], geoms[i]))
            still[i] = still[i] + 1 if speed < p.deadlock_speed else 0
        states = new_states
        obstacles = [step_obstacle(o, p.dt) for o in obstacles]
        k += 1

    summaries = tuple(
        RobotSummary(
            outcome[i],
            reach[i],
            min_clear[i],
            min_margin[i],
            infeasible[i],
            intrusions[i],
            steps[i],
            path[i],
            statistics.fmean(times[i]) if times[i] else 0.0,
            statistics.median(times[i]) if times[i] else 0.0,
        )
        for i in range(n)
    )
    return log, RunOutcome(summaries)


TRAJECTORY_COLUMNS = (
    "t", "robot", "x_p", "y_p", "theta", "v", "omega", "a", "alpha",
    "feasible", "objective", "assignment", "h_min", "clearance", "solve_time", "intrusion",
)


def write_outputs(out_dir, log: TrajectoryLog, outcome: RunOutcome, cfg: ScenarioConfig | None = None) -> None:
    """``trajectory.csv`` (one row per step and robot), ``obstacles.csv`` and ``summary.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trajectory.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for r in log.records:
            w.writerow(
                [f"{r.t:.3f}", r.robot, *(repr(x) for x in r.state), *(repr(x) for x in r.u),
                 int(r.feasible), repr(r.objective), r.assignment, repr(r.h_min), repr(r.clearance),
                 f"{r.solve_time:.6e}", int(r.intrusion)]
            )
    with open(out / "obstacles.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("t", "obstacle", "x", "y", "vx", "vy"))
        for t, j, x, y, vx, vy in log.obstacles:
            w.writerow([f"{t:.3f}", j, repr(x), repr(y), repr(vx), repr(vy)])
    summary = outcome.to_dict()
    if cfg is not None:
        summary = {"name": cfg.name, "method": cfg.method.value, **summary}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- method comparison


def compare_methods(cfg: ScenarioConfig, methods: Sequence, net: DecisionNet | None = None) -> list[dict]:
    rows = []
    for m in methods:
        m = Method.parse(m)
        _, out = run_scenario(cfg.with_method(m), net=net, record=False)
        rows.append(
            {
                "method": m.value,
                "outcome": out.outcome.value,
                "reach_time": out.reach_time,
                "min_clearance": out.min_clearance,
                "infeasible_steps": out.infeasible_steps,
                "mean_solve_time": statistics.fmean(r.mean_solve_time for r in out.robots),
                "median_solve_time": statistics.median(r.median_solve_time for r in out.robots),
            }
        )
    return rows


def format_comparison(rows: list[dict]) -> str:
    lines = [f"{'method':<8} {'outcome':<10} {'reach_s':>8} {'min_clear':>9} {'infeas':>6} {'mean_ms':>8}"]
    for r in rows:
        reach = f"{r['reach_time']:.2f}" if r["reach_time"] is not None else "N/A"
        lines.append(
            f"{r['method']:<8} {r['outcome']:<10} {reach:>8} {r['min_clearance']:>9.3f} "
            f"{r['infeasible_steps']:>6d} {1e3 * r['mean_solve_time']:>8.3f}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------- random batch


@dataclass(frozen=True)
class BatchRanges:
    arena: tuple = (0.0, 15.0)
    robot_radius: tuple = (0.2, 0.7)
    obstacle_radius: tuple = (0.1, 1.5)
    obstacle_velocity: tuple = (-1.0, 1.0)
    n_obstacles: int = 2
    min_start_goal: float = 6.0
    # extra gap kept between every obstacle and the robot's inflated disc at t = 0
    start_clearance: float = 0.0


def heading_to(x: float, y: float, gx: float, gy: float) -> float:
    return math.atan2(gy - y, gx - x)


def random_scenario(
    rng: np.random.Generator,
    method=Method.SUB_QPS,
    params: SimParams = SimParams(),
    ranges: BatchRanges = BatchRanges(),
    name: str = "",
) -> ScenarioConfig:
    """One robot and ``n_obstacles`` moving discs drawn uniformly; redraws until nothing overlaps."""
    lo, hi = ranges.arena
    l = 0.15
    while True:
        radius = rng.uniform(*ranges.robot_radius)
        m = radius + 0.1
        sx, sy, gx, gy = rng.uniform(lo + m, hi - m, size=4)
        if math.hypot(gx - sx, gy - sy) >= ranges.min_start_goal:
            break
    theta = heading_to(sx, sy, gx, gy)
    start = RobotState(sx - l * math.cos(theta), sy - l * math.sin(theta), theta)
    obstacles = []
    while len(obstacles) < ranges.n_obstacles:
        r = rng.uniform(*ranges.obstacle_radius)
        x, y = rng.uniform(lo, hi, size=2)
        vx, vy = rng.uniform(*ranges.obstacle_velocity, size=2)
        if math.hypot(x - sx, y - sy) > radius + params.d_s + r + ranges.start_clearance:
            obstacles.append(ObstacleState(x, y, vx, vy, 0.0, 0.0, r))
    robot = RobotSpec(start, GoalSpec(gx, gy, theta), radius, l)
    return ScenarioConfig((robot,), tuple(obstacles), params, method, name)


def batch_scenarios(n: int, seed: int, method=Method.SUB_QPS, params: SimParams = SimParams(), ranges=BatchRanges()):
    """Scenario ``i`` depends only on ``(seed, i)``."""
    seqs = np.random.SeedSequence(seed).spawn(n)
    return [
        random_scenario(np.random.default_rng(sq), method, replace(params, seed=seed), ranges, f"batch-{seed}-{i}")
        for i, sq in enumerate(seqs)
    ]


CATEGORIES = ("completed", "deadlock", "infeasible", "collision", "timeout")


@dataclass(frozen=True)
class BatchResult:
    method: Method
    seed: int
    outcomes: tuple  # RunOutcome per scenario

    @property
    def n(self) -> int:
        return len(self.outcomes)

    def rate(self, category: str) -> float:
        return sum(o.category == category for o in self.outcomes) / self.n if self.n else 0.0

    def metrics(self) -> dict:
        reach = [o.reach_time for o in self.outcomes if o.reach_time is not None]
        return {
            "method": self.method.value,
            "seed": self.seed,
            "n": self.n,
            **{f"{c}_rate": self.rate(c) for c in CATEGORIES},
            "infeasible_step_runs": sum(o.infeasible_steps > 0 for o in self.outcomes) / self.n if self.n else 0.0,
            "mean_reach_time": statistics.fmean(reach) if reach else None,
        }


def format_metrics(results: Sequence[BatchResult]) -> str:
    """Plain-text table; contains no timing so it is reproducible byte for byte."""
    head = f"{'method':<8} {'seed':>6} {'n':>5} " + " ".join(f"{c:>10}" for c in CATEGORIES) + f" {'reach_s':>8}"
    lines = [head]
    for res in results:
        m = res.metrics()
        reach = f"{m['mean_reach_time']:.3f}" if m["mean_reach_time"] is not None else "N/A"
        lines.append(
            f"{m['method']:<8} {m['seed']:>6d} {m['n']:>5d} "
            + " ".join(f"{100 * m[c + '_rate']:>9.1f}%" for c in CATEGORIES)
            + f" {reach:>8}"
        )
    return "\n".join(lines) + "\n"


def run_batch(
    n: int,
    seed: int,
    method=Method.SUB_QPS,
    params: SimParams = SimParams(),
    ranges: BatchRanges = BatchRanges(),
    net: DecisionNet | None = None,
    out_dir=None,
) -> BatchResult:
    method = Method.parse(method)
    outcomes = []
    rows = []
    for cfg in batch_scenarios(n, seed, method, params, ranges):
        _, out = run_scenario(cfg, net=net, record=False)
        outcomes.append(out)
        rows.append(
            {"name": cfg.name, "category": out.category, "reach_time": out.reach_time,
             "min_clearance": out.min_clearance, "infeasible_steps": out.infeasible_steps}
        )
    result = BatchResult(method, seed, tuple(outcomes))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / f"batch_{method.value}_{seed}.jsonl", "w", encoding="utf-8") as fh:
            for r in rows:
                fh.write(json.dumps(r) + "\n")
        (out / f"metrics_{method.value}_{seed}.txt").write_text(format_metrics([result]), encoding="utf-8")
    return result


# ---------------------------------------------------------------- scripted scenes


def circle_config(
    n_robots: int,
    radius: float = 5.0,
    center: tuple = (7.0, 7.0),
    method=Method.DECNET,
    params: SimParams = SimParams(),
    robot_radius: float = 0.3,
) -> ScenarioConfig:
    """Robots evenly spaced on a circle, each heading for the antipodal point."""
    if n_robots < 2:
        raise ValueError("the circle scene needs at least two robots")
    l = 0.15
    robots = []
    for k in range(n_robots):
        phi = 2.0 * math.pi * k / n_robots
        sx, sy = center[0] + radius * math.cos(phi), center[1] + radius * math.sin(phi)
        gx, gy = center[0] - radius * math.cos(phi), center[1] - radius * math.sin(phi)
        theta = heading_to(sx, sy, gx, gy)
        start = RobotState(sx - l * math.cos(theta), sy - l * math.sin(theta), theta)
        robots.append(RobotSpec(start, GoalSpec(gx, gy, theta), robot_radius, l))
    return ScenarioConfig(tuple(robots), (), params, method, f"circle-{n_robots}")


def run_circle(n_robots: int, radius: float = 5.0, center=(7.0, 7.0), method=Method.DECNET, net=None, params=SimParams()):
    return run_scenario(circle_config(n_robots, radius, center, method, params), net=net)


FIG_START = (0.0, 4.0)
FIG_GOAL = (12.0, 10.0)


def _single_robot(obstacles, method, name, params=SimParams()) -> ScenarioConfig:
    sx, sy = FIG_START
    gx, gy = FIG_GOAL
    theta = heading_to(sx, sy, gx, gy)
    l = 0.15
    robot = RobotSpec(RobotState(sx - l * math.cos(theta), sy - l * math.sin(theta), theta), GoalSpec(gx, gy, theta))
    return ScenarioConfig((robot,), tuple(obstacles), params, method, name)


def two_obstacle_scene(dynamic: bool, method=Method.SUB_QPS) -> ScenarioConfig:
    """Start (0, 4), goal (12, 10), two discs near the straight path; dynamic discs move at (-0.5, 0)."""
    if dynamic:
        obstacles = (
            ObstacleState(6.5, 6.9, -0.5, 0.0, radius=0.6),
            ObstacleState(11.0, 8.6, -0.5, 0.0, radius=0.6),
        )
    else:
        obstacles = (
            ObstacleState(4.0, 6.2, radius=0.8),
            ObstacleState(8.5, 7.9, radius=0.8),
        )
    return _single_robot(obstacles, method, "two-obstacle-dynamic" if dynamic else "two-obstacle-static")


def static_dynamic_scene(obstacle_speed: float, method=Method.DECNET) -> ScenarioConfig:
    """One static disc and one disc moving along -x at ``obstacle_speed``."""
    obstacles = (
        ObstacleState(4.0, 6.8, radius=0.5),
        ObstacleState(11.1, 5.5, -obstacle_speed, 0.0, radius=0.9),
    )
    return _single_robot(obstacles, method, f"static-dynamic-{obstacle_speed:g}")


SLOW_OBSTACLE_SPEED = 0.05
FAST_OBSTACLE_SPEED = 0.6
