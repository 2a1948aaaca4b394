"""System models, scenario geometry, predicate library, and the MPC loop.

Two deterministic discrete-time systems are provided: the scalar
integrator used by the linear benchmark and a kinematic single-track
vehicle model (explicit Euler).  Scenario objects bundle a system with
lane geometry, obstacles, and prioritized specifications, and expose
the predicate registry that binds textual formulas to evaluators.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from .lexcost import (
    DiscretizationScheme,
    PrioritizedSpec,
    ScalarCost,
    SpecSet,
    uniform_thresholds,
)
from .robustness import MeasureConfig, measure_config
from .stl import ContractViolation, Trace, parse_formula

__all__ = [
    "System",
    "ScalarIntegrator",
    "SingleTrackModel",
    "SingleTrackState",
    "integrator_step",
    "single_track_step",
    "rollout",
    "rollout_batch",
    "ReferencePath",
    "LaneGeometry",
    "VehicleShape",
    "Obstacle",
    "Schedule",
    "MotionLimits",
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "scenario_from_dict",
    "in_lane_predicate",
    "mpc_loop",
    "MpcResult",
]

SCHEMA_VERSION = 1

# Output row indices of the single-track model: y = [x; u]
ST_X, ST_Y, ST_THETA, ST_DELTA, ST_V, ST_VDELTA, ST_A = range(7)


class System:
    """Deterministic discrete-time system x' = f(x, u), y = g(x, u)."""

    n_x: int
    n_u: int
    n_y: int
    dt: float
    u_lo: np.ndarray
    u_hi: np.ndarray

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def output(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def step_batch(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Vectorized step over rows; invalid states propagate as NaN."""
        return np.stack([self.step(xi, ui) for xi, ui in zip(x, u)])

    def output_batch(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.stack([self.output(xi, ui) for xi, ui in zip(x, u)])


def integrator_step(x: float, u: float) -> float:
    """Scalar integrator dynamics x' = x + u."""
    return x + u


@dataclass
class ScalarIntegrator(System):
    """x' = x + u with identity output, symmetric input bound."""

    bound: float = 1.35
    dt: float = 1.0

    def __post_init__(self) -> None:
        self.n_x = self.n_u = self.n_y = 1
        self.u_lo = np.array([-self.bound])
        self.u_hi = np.array([self.bound])

    def step(self, x, u):
        return x + u

    def output(self, x, u):
        return np.asarray(x, dtype=float)

    def step_batch(self, x, u):
        return x + u

    def output_batch(self, x, u):
        return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class SingleTrackState:
    """Kinematic single-track state (rear-axle position)."""

    x: float
    y: float
    theta: float
    delta: float
    v: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, self.delta, self.v])


def single_track_step(
    state: SingleTrackState, u: np.ndarray, dt: float, wheelbase: float
) -> SingleTrackState:
    """One explicit-Euler step of the kinematic single-track model.

    Raises when the steering angle reaches the tan singularity.
    """
    if abs(state.delta) >= math.pi / 2:
        raise ContractViolation("steering angle at or beyond +/-pi/2")
    v_delta, a = float(u[0]), float(u[1])
    return SingleTrackState(
        x=state.x + dt * state.v * math.cos(state.theta),
        y=state.y + dt * state.v * math.sin(state.theta),
        theta=state.theta + dt * state.v / wheelbase * math.tan(state.delta),
        delta=state.delta + dt * v_delta,
        v=state.v + dt * a,
    )


@dataclass
class SingleTrackModel(System):
    """Single-track model as a batch-capable System; output y = [x; u]."""

    dt: float = 0.2
    wheelbase: float = 3.0
    u_lo: np.ndarray = field(default_factory=lambda: np.array([-0.3, -8.0]))
    u_hi: np.ndarray = field(default_factory=lambda: np.array([0.3, 8.0]))

    def __post_init__(self) -> None:
        self.n_x, self.n_u, self.n_y = 5, 2, 7
        self.u_lo = np.asarray(self.u_lo, dtype=float)
        self.u_hi = np.asarray(self.u_hi, dtype=float)

    def step(self, x, u):
        state = single_track_step(SingleTrackState(*x), u, self.dt, self.wheelbase)
        return state.as_array()

    def output(self, x, u):
        return np.concatenate([np.asarray(x, dtype=float), np.asarray(u, dtype=float)])

    def step_batch(self, x, u):
        # steering at/beyond the tan singularity marks the sample invalid
        theta, delta, v = x[:, 2], x[:, 3], x[:, 4]
        bad = np.abs(delta) >= math.pi / 2
        out = np.empty_like(x)
        out[:, 0] = x[:, 0] + self.dt * v * np.cos(theta)
        out[:, 1] = x[:, 1] + self.dt * v * np.sin(theta)
        with np.errstate(invalid="ignore"):
            out[:, 2] = theta + self.dt * v / self.wheelbase * np.tan(delta)
        out[:, 3] = delta + self.dt * u[:, 0]
        out[:, 4] = v + self.dt * u[:, 1]
        out[bad] = np.nan
        return out

    def output_batch(self, x, u):
        return np.concatenate([x, u], axis=1)


def rollout(system: System, x0: np.ndarray, inputs: np.ndarray) -> Trace:
    """Roll an input plan u_0..u_K through the system into an output trace.

    The final input is used for the output map only.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[0] == 1 and system.n_u == 1 and inputs.shape[1] != 1:
        inputs = inputs.T
    Kp1 = inputs.shape[0]
    x = np.asarray(x0, dtype=float).reshape(system.n_x)
    outputs = np.empty((system.n_y, Kp1))
    for k in range(Kp1):
        outputs[:, k] = system.output(x, inputs[k])
        if k < Kp1 - 1:
            x = system.step(x, inputs[k])
    return Trace(outputs, system.dt)


def rollout_batch(
    system: System, x0: np.ndarray, inputs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized rollout of M plans, shape (M, K+1, n_u).

    Returns outputs of shape (M, n_y, K+1) and a validity mask; samples
    whose state leaves the model's domain turn NaN and are flagged.
    """
    M, Kp1, _ = inputs.shape
    x = np.broadcast_to(np.asarray(x0, dtype=float).reshape(1, system.n_x), (M, system.n_x)).copy()
    outputs = np.empty((M, system.n_y, Kp1))
    for k in range(Kp1):
        outputs[:, :, k] = system.output_batch(x, inputs[:, k, :])
        if k < Kp1 - 1:
            x = system.step_batch(x, inputs[:, k, :])
    valid = np.isfinite(outputs).all(axis=(1, 2))
    return outputs, valid


# --------------------------------------------------------------------------
# Lane geometry


class ReferencePath:
    """Piecewise-linear reference path with arc-length projection.

    Lateral offsets are signed with left of the travel direction
    positive; poses beyond the path ends are clamped to the nearest
    segment.
    """

    def __init__(self, points: np.ndarray):
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[0] < 2 or points.shape[1] != 2:
            raise ContractViolation("reference path needs shape (P, 2) with P >= 2")
        deltas = np.diff(points, axis=0)
        lengths = np.hypot(deltas[:, 0], deltas[:, 1])
        if np.any(lengths <= 0):
            raise ContractViolation("reference path has zero-length segment")
        self.points = points
        self._dirs = deltas / lengths[:, None]
        self._lengths = lengths
        self._cum = np.concatenate([[0.0], np.cumsum(lengths)])

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def project(self, xy: np.ndarray) -> tuple[float, float]:
        """Arc length and signed lateral offset (left positive) of a point."""
        s, d = self.project_many(np.asarray(xy, dtype=float).reshape(1, 2))
        return float(s[0]), float(d[0])

    def project_many(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized projection of points with shape (n, 2)."""
        q = np.asarray(points, dtype=float)
        starts = self.points[:-1]  # (P-1, 2)
        dirs = self._dirs
        rel = q[:, None, :] - starts[None, :, :]  # (n, P-1, 2)
        t = rel[:, :, 0] * dirs[None, :, 0] + rel[:, :, 1] * dirs[None, :, 1]
        t = np.clip(t, 0.0, self._lengths[None, :])
        dx = rel[:, :, 0] - t * dirs[None, :, 0]
        dy = rel[:, :, 1] - t * dirs[None, :, 1]
        dist2 = dx * dx + dy * dy
        lateral = dirs[None, :, 0] * rel[:, :, 1] - dirs[None, :, 1] * rel[:, :, 0]
        best = np.argmin(dist2, axis=1)
        rows = np.arange(len(q))
        return self._cum[best] + t[rows, best], lateral[rows, best]


@dataclass(frozen=True)
class LaneGeometry:
    path: ReferencePath
    width: float

    def __post_init__(self) -> None:
        if not self.width > 0:
            raise ContractViolation("lane width must be positive")


@dataclass(frozen=True)
class VehicleShape:
    """Rectangle approximated by three discs along the heading.

    Disc centers sit at {0.25, 0.5, 0.75} of the vehicle length ahead of
    the rear axle; the radius covers the rectangle.
    """

    length: float = 4.5
    width: float = 1.8

    def __post_init__(self) -> None:
        if not (self.length > 0 and self.width > 0):
            raise ContractViolation("vehicle extents must be positive")

    @property
    def disc_radius(self) -> float:
        return math.hypot(self.length / 4.0, self.width / 2.0)

    def disc_centers(self, x: float, y: float, theta: float) -> np.ndarray:
        c, s = math.cos(theta), math.sin(theta)
        offsets = np.array([0.25, 0.5, 0.75]) * self.length
        return np.stack([x + offsets * c, y + offsets * s], axis=1)


def _disc_offsets(lane: LaneGeometry, shape: VehicleShape, pose: tuple[float, float, float]):
    centers = shape.disc_centers(*pose)
    return lane.path.project_many(centers)[1]


def left_deviation(lane: LaneGeometry, shape: VehicleShape, pose) -> float:
    """Leftmost extent of the three discs (signed offset, left positive)."""
    return float(_disc_offsets(lane, shape, pose).max()) + shape.disc_radius


def right_deviation(lane: LaneGeometry, shape: VehicleShape, pose) -> float:
    """Rightmost extent of the three discs (signed offset, left positive)."""
    return float(_disc_offsets(lane, shape, pose).min()) - shape.disc_radius


def in_lane_margin(lane: LaneGeometry, shape: VehicleShape, pose) -> float:
    """Signed margin: >= 0 iff all three discs lie inside the corridor."""
    half = lane.width / 2.0
    left = half - left_deviation(lane, shape, pose)
    right = right_deviation(lane, shape, pose) + half
    return min(left, right)


def in_lane_predicate(trace: Trace, k: int, lane: LaneGeometry, shape: VehicleShape) -> float:
    pose = (trace.values[ST_X, k], trace.values[ST_Y, k], trace.values[ST_THETA, k])
    return in_lane_margin(lane, shape, pose)


# --------------------------------------------------------------------------
# Obstacles and scenario parameters


@dataclass(frozen=True)
class Obstacle:
    """Disc obstacle with a constant-velocity motion prediction."""

    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0

    def predict(self, k: int, dt: float) -> np.ndarray:
        return np.array(
            [
                self.position[0] + self.velocity[0] * k * dt,
                self.position[1] + self.velocity[1] * k * dt,
            ]
        )

    def advanced(self, dt: float) -> "Obstacle":
        return replace(self, position=(self.position[0] + self.velocity[0] * dt,
                                       self.position[1] + self.velocity[1] * dt))


@dataclass(frozen=True)
class Schedule:
    """Longitudinal schedule: target arc length start + speed * t."""

    speed: float
    start: float = 0.0
    tolerance: float = 2.0

    def target(self, t: float) -> float:
        return self.start + self.speed * t


@dataclass(frozen=True)
class MotionLimits:
    speed: float = 13.9
    v_min: float = 0.0
    steer: float = 0.45
    a_long: float = 8.0
    a_lat: float = 8.0
    flow_speed: float = 2.0


@dataclass(frozen=True)
class SpecDef:
    """Scenario-file description of one prioritized specification."""

    name: str
    formula: str
    measure: str = "space-left-time"
    m: int = 1
    c_bar: float | None = None
    nus: dict = field(default_factory=dict)

    def scheme(self) -> DiscretizationScheme:
        if self.m < 2 or self.c_bar is None:
            return DiscretizationScheme(1) if self.m < 2 else uniform_thresholds(1.0, self.m)
        return uniform_thresholds(self.c_bar, self.m)

    def measure_config(self) -> MeasureConfig:
        return measure_config(self.measure, **self.nus)


class ScenarioError(ValueError):
    """Scenario file failed to parse or validate."""


@dataclass
class Scenario:
    """Planning scenario: system, geometry, obstacles, and specifications."""

    system: SingleTrackModel
    initial_state: np.ndarray
    horizon: int
    lane: LaneGeometry
    vehicle: VehicleShape
    obstacles: tuple[Obstacle, ...]
    spec_defs: tuple[SpecDef, ...]
    schedule: Schedule | None = None
    limits: MotionLimits = field(default_factory=MotionLimits)
    name: str = "scenario"

    def __post_init__(self) -> None:
        self.initial_state = np.asarray(self.initial_state, dtype=float).reshape(-1)
        if self.horizon < 1:
            raise ScenarioError("horizon must be >= 1")
        if not self.spec_defs:
            raise ScenarioError("scenario needs at least one specification")

    # -- predicate registry -------------------------------------------------

    def predicate_registry(
        self, obstacles: tuple[Obstacle, ...] | None = None, t0: float = 0.0
    ) -> dict[str, Callable[[Trace, int], float]]:
        """Evaluator callbacks keyed by id, bound to the given obstacle
        states (constant-velocity prediction from the plan start) and the
        schedule offset t0."""
        lane, shape, limits = self.lane, self.vehicle, self.limits
        obstacles = self.obstacles if obstacles is None else obstacles
        dt = self.system.dt
        wheelbase = self.system.wheelbase
        schedule = self.schedule
        radius = shape.disc_radius

        # geometry (disc centers/offsets, axle arc length) is shared by
        # several predicates; compute it once per trace
        geometry: "weakref.WeakKeyDictionary[Trace, tuple]" = weakref.WeakKeyDictionary()

        def geom(trace: Trace):
            cached = geometry.get(trace)
            if cached is None:
                xs, ys, thetas = trace.values[0], trace.values[1], trace.values[2]
                Kp1 = xs.shape[0]
                offsets = np.array([0.25, 0.5, 0.75]) * shape.length
                cos_t, sin_t = np.cos(thetas), np.sin(thetas)
                centers = np.empty((Kp1, 3, 2))
                centers[:, :, 0] = xs[:, None] + offsets[None, :] * cos_t[:, None]
                centers[:, :, 1] = ys[:, None] + offsets[None, :] * sin_t[:, None]
                arc, _ = lane.path.project_many(np.stack([xs, ys], axis=1))
                _, lat = lane.path.project_many(centers.reshape(-1, 2))
                cached = (centers, lat.reshape(Kp1, 3), arc)
                geometry[trace] = cached
            return cached

        def mu_collision(trace: Trace, k: int) -> float:
            # penetration depth: positive when any ego disc overlaps an obstacle
            if not obstacles:
                return -1.0
            centers = geom(trace)[0][k]
            worst = -math.inf
            for obstacle in obstacles:
                p = obstacle.predict(k, dt)
                dists = np.hypot(centers[:, 0] - p[0], centers[:, 1] - p[1])
                worst = max(worst, float((radius + obstacle.radius) - dists.min()))
            return worst

        def mu_left_bound(trace: Trace, k: int) -> float:
            lat = geom(trace)[1][k]
            return lane.width / 2.0 - (float(lat.max()) + radius)

        def mu_right_bound(trace: Trace, k: int) -> float:
            lat = geom(trace)[1][k]
            return (float(lat.min()) - radius) + lane.width / 2.0

        def mu_in_lane(trace: Trace, k: int) -> float:
            return min(mu_left_bound(trace, k), mu_right_bound(trace, k))

        def mu_make_progress(trace: Trace, k: int) -> float:
            if schedule is None:
                raise ScenarioError("scenario has no schedule")
            return float(geom(trace)[2][k]) - schedule.target(t0 + k * dt)

        def mu_at_scheduled_pos(trace: Trace, k: int) -> float:
            if schedule is None:
                raise ScenarioError("scenario has no schedule")
            return schedule.tolerance - abs(float(geom(trace)[2][k]) - schedule.target(t0 + k * dt))

        def mu_velocity_in_limits(trace: Trace, k: int) -> float:
            v = trace.values[ST_V, k]
            return min(v - limits.v_min, limits.speed - v)

        def mu_steering_in_limits(trace: Trace, k: int) -> float:
            return limits.steer - abs(trace.values[ST_DELTA, k])

        def mu_below_speed_limit(trace: Trace, k: int) -> float:
            return limits.speed - trace.values[ST_V, k]

        def mu_preserves_flow(trace: Trace, k: int) -> float:
            return trace.values[ST_V, k] - limits.flow_speed

        def mu_below_long_acc(trace: Trace, k: int) -> float:
            return limits.a_long - abs(trace.values[ST_A, k])

        def mu_below_lat_acc(trace: Trace, k: int) -> float:
            v = trace.values[ST_V, k]
            lat = v * v * math.tan(trace.values[ST_DELTA, k]) / wheelbase
            return limits.a_lat - abs(lat)

        return {
            "mu_collision": mu_collision,
            "mu_left_bound": mu_left_bound,
            "mu_right_bound": mu_right_bound,
            "mu_in_lane": mu_in_lane,
            "mu_make_progress": mu_make_progress,
            "mu_at_scheduled_pos": mu_at_scheduled_pos,
            "mu_velocity_in_limits": mu_velocity_in_limits,
            "mu_steering_in_limits": mu_steering_in_limits,
            "mu_below_speed_limit": mu_below_speed_limit,
            "mu_preserves_flow": mu_preserves_flow,
            "mu_below_long_acc": mu_below_long_acc,
            "mu_below_lat_acc": mu_below_lat_acc,
        }

    def spec_set(
        self, obstacles: tuple[Obstacle, ...] | None = None, t0: float = 0.0
    ) -> SpecSet:
        registry = self.predicate_registry(obstacles, t0)
        specs = []
        for sd in self.spec_defs:
            formula = parse_formula(sd.formula, registry)
            specs.append(PrioritizedSpec(sd.name, formula, sd.measure_config(), sd.scheme()))
        return SpecSet(specs)

    def with_measure(self, measure: str) -> "Scenario":
        """Copy of the scenario with every spec evaluated under one measure."""
        return replace(
            self, spec_defs=tuple(replace(sd, measure=measure) for sd in self.spec_defs)
        )


# --------------------------------------------------------------------------
# Scenario files


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ScenarioError("missing %r in %s" % (key, where))
    return mapping[key]


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must contain a mapping")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError("unsupported schema_version %r (expected %d)" % (version, SCHEMA_VERSION))

    sysdef = _require(data, "system", "scenario")
    kind = sysdef.get("kind", "single_track")
    if kind != "single_track":
        raise ScenarioError("unsupported system kind %r" % kind)
    system = SingleTrackModel(
        dt=float(sysdef.get("dt", 0.2)),
        wheelbase=float(sysdef.get("wheelbase", 3.0)),
        u_lo=np.asarray(sysdef.get("u_lo", [-0.3, -8.0]), dtype=float),
        u_hi=np.asarray(sysdef.get("u_hi", [0.3, 8.0]), dtype=float),
    )
    if np.any(system.u_lo > system.u_hi):
        raise ScenarioError("input bounds must satisfy u_lo <= u_hi")

    lane_def = _require(data, "lane", "scenario")
    try:
        lane = LaneGeometry(
            ReferencePath(np.asarray(_require(lane_def, "path", "lane"), dtype=float)),
            float(_require(lane_def, "width", "lane")),
        )
    except ContractViolation as exc:
        raise ScenarioError(str(exc)) from exc

    vdef = data.get("vehicle", {})
    vehicle = VehicleShape(float(vdef.get("length", 4.5)), float(vdef.get("width", 1.8)))

    obstacles = tuple(
        Obstacle(
            position=tuple(float(v) for v in _require(o, "position", "obstacle")),
            velocity=tuple(float(v) for v in o.get("velocity", (0.0, 0.0))),
            radius=float(o.get("radius", 1.0)),
        )
        for o in data.get("obstacles", [])
    )

    schedule = None
    if "schedule" in data:
        sdef = data["schedule"]
        schedule = Schedule(
            speed=float(_require(sdef, "speed", "schedule")),
            start=float(sdef.get("start", 0.0)),
            tolerance=float(sdef.get("tolerance", 2.0)),
        )

    limits_def = data.get("limits", {})
    limits = MotionLimits(
        speed=float(limits_def.get("speed", 13.9)),
        v_min=float(limits_def.get("v_min", 0.0)),
        steer=float(limits_def.get("steer", 0.45)),
        a_long=float(limits_def.get("a_long", 8.0)),
        a_lat=float(limits_def.get("a_lat", 8.0)),
        flow_speed=float(limits_def.get("flow_speed", 2.0)),
    )

    spec_defs = []
    for raw in _require(data, "specs", "scenario"):
        spec_defs.append(
            SpecDef(
                name=str(_require(raw, "name", "spec")),
                formula=str(_require(raw, "formula", "spec")),
                measure=str(raw.get("measure", "space-left-time")),
                m=int(raw.get("m", 1)),
                c_bar=float(raw["c_bar"]) if "c_bar" in raw else None,
                nus={k: float(v) for k, v in raw.get("nus", {}).items()},
            )
        )

    scenario = Scenario(
        system=system,
        initial_state=np.asarray(_require(data, "initial_state", "scenario"), dtype=float),
        horizon=int(_require(data, "horizon", "scenario")),
        lane=lane,
        vehicle=vehicle,
        obstacles=obstacles,
        spec_defs=tuple(spec_defs),
        schedule=schedule,
        limits=limits,
        name=str(data.get("name", "scenario")),
    )
    # fail early on malformed formulas / unknown measures
    try:
        scenario.spec_set()
    except (ValueError, ContractViolation) as exc:
        raise ScenarioError(str(exc)) from exc
    return scenario


def load_scenario(path: "str | Path") -> Scenario:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise
    except yaml.YAMLError as exc:
        raise ScenarioError("cannot parse %s: %s" % (path, exc)) from exc
    return scenario_from_dict(data)


def overtaking_scenario(
    measure: str = "space-left-time",
    lane_width: float = 6.0,
    obstacle_x: float = 20.0,
    obstacle_radius: float = 1.6,
    horizon: int = 15,
    speed: float = 6.0,
    schedule_speed: float = 6.0,
    c_bar_progress: float = 30.0,
    c_bar_lane: float = 25.0,
) -> Scenario:
    """Single-lane overtaking of a broken-down vehicle.

    The stalled vehicle blocks the lane so that passing requires leaving
    the lane corridor, and it sits within the first planning horizon so
    the conflict is visible from the start.  Prioritization is motion
    limits over collision avoidance over schedule progress over in-lane
    driving, so the lane specification is the one that gets deliberately
    violated during the pass.
    """
    system = SingleTrackModel(
        dt=0.2,
        wheelbase=3.0,
        u_lo=np.array([-0.5, -5.0]),
        u_hi=np.array([0.5, 5.0]),
    )
    lane = LaneGeometry(ReferencePath(np.array([[-20.0, 0.0], [600.0, 0.0]])), lane_width)
    specs = (
        SpecDef(
            "limits",
            "G(and(mu_velocity_in_limits, mu_steering_in_limits))",
            measure,
            m=1,
        ),
        SpecDef("collision", "G(not(mu_collision))", measure, m=1),
        # end-of-plan schedule band: parking violates it immediately, so the
        # planner cannot postpone the overtake indefinitely
        SpecDef(
            "progress",
            "F[%d,%d](mu_at_scheduled_pos)" % (horizon, horizon),
            measure,
            m=31,
            c_bar=c_bar_progress,
        ),
        SpecDef("lane", "G(and(mu_left_bound, mu_right_bound))", measure, m=31, c_bar=c_bar_lane),
    )
    initial_state = np.array([0.0, 0.0, 0.0, 0.0, speed])
    start_arc = lane.path.project(initial_state[:2])[0]
    return Scenario(
        system=system,
        initial_state=initial_state,
        horizon=horizon,
        lane=lane,
        vehicle=VehicleShape(4.5, 1.8),
        obstacles=(Obstacle(position=(obstacle_x, 0.0), radius=obstacle_radius),),
        spec_defs=specs,
        schedule=Schedule(speed=schedule_speed, start=start_arc, tolerance=3.0),
        limits=MotionLimits(speed=15.0, v_min=0.0, steer=0.5, a_long=8.0, a_lat=9.0),
        name="overtaking",
    )


# --------------------------------------------------------------------------
# Receding-horizon execution


@dataclass
class MpcResult:
    """Executed trajectory plus per-iteration planning diagnostics."""

    executed: Trace
    solve_results: list
    cost_vectors: list[tuple[int, ...]]
    scalar_costs: list[ScalarCost]


def mpc_loop(scenario: Scenario, solver_config, steps: int) -> MpcResult:
    """Plan, apply the first input, re-plan; repeated ``steps`` times.

    The next solve is warm-started with the previous plan shifted by one
    step (last input held).  Obstacle predictions are re-anchored at the
    current obstacle states each iteration.
    """
    from .solver import solve  # local import to avoid a cycle

    if steps < 1:
        raise ContractViolation("mpc_loop needs steps >= 1")
    system = scenario.system
    K = scenario.horizon
    x = scenario.initial_state.copy()
    obstacles = scenario.obstacles
    u_plan = np.zeros((K + 1, system.n_u))
    u_plan = np.clip(u_plan, system.u_lo, system.u_hi)

    outputs = []
    results = []
    vectors = []
    scalars = []
    last_input = np.zeros(system.n_u)
    for i in range(steps):
        spec_set = scenario.spec_set(obstacles=obstacles, t0=i * system.dt)
        config = replace(solver_config, seed=(solver_config.seed, i))
        result = solve(system, spec_set, x, u_plan, config)
        results.append(result)
        plan_inputs = result.inputs
        scalar = spec_set.scalar_cost(result.trace)
        scalars.append(scalar)
        vectors.append(scalar.components())

        last_input = plan_inputs[0].copy()
        outputs.append(system.output(x, last_input))
        x = system.step(x, last_input)
        obstacles = tuple(o.advanced(system.dt) for o in obstacles)
        u_plan = np.vstack([plan_inputs[1:], plan_inputs[-1:]])

    outputs.append(system.output(x, last_input))
    executed = Trace(np.stack(outputs, axis=1), system.dt)
    return MpcResult(executed, results, vectors, scalars)
