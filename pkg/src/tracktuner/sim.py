"""Fixed-step kinematic vehicle simulator with actuator lag and noisy odometry.

The plant is a kinematic bicycle integrated with explicit Euler at a fixed
step. Speed and steering commands pass through first-order lags before they
reach the wheels, and the steering angle saturates at a configurable bound.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from .controller import (
    BodyError,
    ControlCommand,
    ControllerState,
    GainSet,
    body_error,
    control_step,
    world_error,
)
from .geometry import Pose, wrap_angle
from .paths import (
    LookaheadProgress,
    ReferencePath,
    ReferenceSchedule,
    TimedProgress,
)


class SimulationError(RuntimeError):
    """Raised when the closed loop produces non-finite values (controller blow-up)."""


class Outcome(Enum):
    GOAL_REACHED = "GoalReached"
    COLLISION = "Collision"
    TIME_UP = "TimeUp"


@dataclass(slots=True)
class VehicleState:
    pose: Pose
    v_actual: float = 0.0  # achieved speed (m/s)
    phi_actual: float = 0.0  # achieved steering angle (rad)


@dataclass(frozen=True, slots=True)
class SimConfig:
    dt: float = 0.01
    wheelbase: float = 2.875
    actuator_tau: float = 0.5  # speed lag time constant (s); 0 means instantaneous
    steer_tau: float = 0.1  # steering lag time constant (s); 0 means instantaneous
    phi_max: float = math.radians(30.0)
    goal_tolerance: float = 1.0
    offpath_limit: float = 2.0  # lateral deviation treated as a collision (m)
    seed: int = 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not (math.isfinite(self.wheelbase) and self.wheelbase > 0.0):
            raise ValueError(f"wheelbase must be positive, got {self.wheelbase!r}")
        if self.actuator_tau < 0.0 or self.steer_tau < 0.0:
            raise ValueError("lag time constants must be >= 0")
        if not (0.0 < self.phi_max < math.pi / 2.0):
            raise ValueError(f"phi_max must lie in (0, pi/2), got {self.phi_max!r}")
        if self.goal_tolerance <= 0.0 or self.offpath_limit <= 0.0:
            raise ValueError("goal_tolerance and offpath_limit must be positive")


@dataclass
class NoiseModel:
    """Odometry noise: Gaussian position error plus triangular heading error."""

    enabled: bool = False
    pos_sigma: float = 0.1  # std dev of x and y perturbations (m)
    orient_halfwidth: float = 0.088  # support half-width of the heading error (rad)
    seed: int = 0
    _rng: np.random.Generator | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.pos_sigma < 0.0 or self.orient_halfwidth < 0.0:
            raise ValueError("noise magnitudes must be >= 0")

    def reset(self) -> None:
        """Restart the noise stream from the stored seed."""
        self._rng = np.random.default_rng(self.seed)

    @property
    def rng(self) -> np.random.Generator:
        if self._rng is None:
            self.reset()
        assert self._rng is not None
        return self._rng


def read_odometry(state: VehicleState, noise: NoiseModel) -> Pose:
    """The vehicle pose as the controller sees it.

    With noise disabled this is the true pose. Otherwise x and y each get an
    independent Gaussian perturbation and the heading gets a zero-mode
    triangular perturbation, re-wrapped to (-pi, pi].
    """
    if not noise.enabled:
        return state.pose
    rng = noise.rng
    dx = rng.normal(0.0, noise.pos_sigma)
    dy = rng.normal(0.0, noise.pos_sigma)
    if noise.orient_halfwidth > 0.0:
        dtheta = rng.triangular(-noise.orient_halfwidth, 0.0, noise.orient_halfwidth)
    else:
        dtheta = 0.0
    pose = state.pose
    return Pose(pose.x + dx, pose.y + dy, pose.theta + dtheta)


def _clamp(value: float, low: float, high: float) -> float:
    return low if value < low else high if value > high else value


def step_vehicle(state: VehicleState, cmd: ControlCommand, cfg: SimConfig) -> VehicleState:
    """Advance the vehicle one step.

    The commanded speed and steering angle pass through first-order lags
    (or apply immediately when the time constant is zero), the steering is
    saturated at phi_max, and the pose integrates the bicycle kinematics
    with the post-lag values.
    """
    if not (math.isfinite(cmd.v) and math.isfinite(cmd.phi)):
        raise SimulationError(f"non-finite command {cmd!r}")
    if cmd.v < 0.0:
        raise SimulationError(f"commanded speed must be >= 0, got {cmd.v!r}")
    pose = state.pose
    if not (math.isfinite(pose.x) and math.isfinite(pose.y) and math.isfinite(state.v_actual)):
        raise SimulationError(f"non-finite vehicle state {state!r}")

    if cfg.actuator_tau > 0.0:
        v = state.v_actual + (cfg.dt / cfg.actuator_tau) * (cmd.v - state.v_actual)
    else:
        v = cmd.v
    if v < 0.0:
        v = 0.0

    phi_target = _clamp(cmd.phi, -cfg.phi_max, cfg.phi_max)
    if cfg.steer_tau > 0.0:
        phi = state.phi_actual + (cfg.dt / cfg.steer_tau) * (phi_target - state.phi_actual)
    else:
        phi = phi_target
    phi = _clamp(phi, -cfg.phi_max, cfg.phi_max)

    theta = pose.theta
    x = pose.x + cfg.dt * v * math.cos(theta)
    y = pose.y + cfg.dt * v * math.sin(theta)
    theta_new = wrap_angle(theta + cfg.dt * (v / cfg.wheelbase) * math.tan(phi))
    return VehicleState(Pose(x, y, theta_new), v, phi)


@dataclass(frozen=True, slots=True)
class LogSample:
    t: float
    x: float
    y: float
    theta: float
    odo_x: float
    odo_y: float
    odo_theta: float
    bex: float
    bey: float
    betheta: float
    v: float  # commanded speed after any supervisor limit
    omega: float  # pre-filter steering rate
    phi: float  # saturated steering command


CSV_HEADER = (
    "t",
    "x",
    "y",
    "theta",
    "odo_x",
    "odo_y",
    "odo_theta",
    "bex",
    "bey",
    "betheta",
    "v",
    "omega",
    "phi",
    "outcome",
)


@dataclass
class TrajectoryLog:
    samples: list[LogSample]
    outcome: Outcome
    monitor_status: str | None = None

    def to_csv(self, destination: Union[str, Path], meta: Mapping[str, object] | None = None) -> None:
        """Write one row per sample; the outcome column is filled on the last row only."""
        with open(destination, "w", newline="") as handle:
            for key, value in (meta or {}).items():
                handle.write(f"# {key}={value}\n")
            writer = csv.writer(handle)
            writer.writerow(CSV_HEADER)
            last = len(self.samples) - 1
            for i, s in enumerate(self.samples):
                row = [
                    repr(s.t), repr(s.x), repr(s.y), repr(s.theta),
                    repr(s.odo_x), repr(s.odo_y), repr(s.odo_theta),
                    repr(s.bex), repr(s.bey), repr(s.betheta),
                    repr(s.v), repr(s.omega), repr(s.phi),
                    self.outcome.value if i == last else "",
                ]
                writer.writerow(row)

    def to_json(self, destination: Union[str, Path], meta: Mapping[str, object] | None = None) -> None:
        payload = {
            "outcome": self.outcome.value,
            "monitor_status": self.monitor_status,
            "meta": dict(meta or {}),
            "samples": [
                {name: getattr(s, name) for name in LogSample.__slots__} for s in self.samples
            ],
        }
        with open(destination, "w") as handle:
            json.dump(payload, handle, indent=1, sort_keys=True)
            handle.write("\n")


def start_state(path: ReferencePath, lateral_offset: float = 0.0) -> VehicleState:
    """Vehicle at rest on (or laterally offset from) the first path point."""
    p = path.start_pose()
    x = p.x - lateral_offset * math.sin(p.theta)
    y = p.y + lateral_offset * math.cos(p.theta)
    return VehicleState(Pose(x, y, p.theta), 0.0, 0.0)


def run_simulation(
    cfg: SimConfig,
    pilot: object,
    path: ReferencePath,
    noise: NoiseModel,
    duration: float,
    reference: ReferenceSchedule | None = None,
    start: VehicleState | None = None,
) -> TrajectoryLog:
    """Run the closed loop (odometry, controller, plant) at the fixed step.

    Args:
        cfg: plant and termination parameters.
        pilot: either a fixed GainSet or a supervisor-like object exposing
            gains_at(x, y) and apply_limit(command).
        path: reference path to follow.
        noise: odometry noise model; its stream restarts from its seed here,
            so a rerun with the same inputs reproduces the log byte for byte.
        duration: simulated time budget in seconds.
        reference: how the reference pose advances. Defaults to timed
            progress at 4 m/s of arc length per second.
        start: initial vehicle state; defaults to rest at the path start.

    Returns:
        The sampled trajectory and the outcome. The loop exits early with
        GOAL_REACHED when the odometry position comes within goal_tolerance
        of the final path point, or with COLLISION when the true position
        strays more than offpath_limit from the path.
    """
    if not (math.isfinite(duration) and duration > 0.0):
        raise ValueError(f"duration must be positive, got {duration!r}")
    if reference is None:
        reference = TimedProgress()

    if isinstance(pilot, GainSet):
        fixed_gains = pilot
        gains_at = None
        apply_limit = None
    else:
        fixed_gains = None
        gains_at = pilot.gains_at
        apply_limit = pilot.apply_limit

    noise.reset()
    state = start if start is not None else start_state(path)
    ctrl = ControllerState()
    n_steps = int(math.floor(duration / cfg.dt + 1e-9))
    goal_x = float(path.xs[-1])
    goal_y = float(path.ys[-1])

    xs, ys, ss = path.xs, path.ys, path.ss
    n_points = len(xs)
    window = max(int(round(5.0 / path.spacing)), 10)
    cursor = path.nearest_index(state.pose.x, state.pose.y)

    timed = isinstance(reference, TimedProgress)
    if timed:
        ref_speed = reference.speed
        ref_idx = 0
    else:
        lookahead = reference.policy.lookahead_dist

    samples: list[LogSample] = []
    outcome = Outcome.TIME_UP

    for k in range(n_steps):
        t = k * cfg.dt
        odom = read_odometry(state, noise)

        if math.hypot(odom.x - goal_x, odom.y - goal_y) < cfg.goal_tolerance:
            outcome = Outcome.GOAL_REACHED
            break

        lo = cursor - window if cursor > window else 0
        hi = cursor + window
        if hi > n_points:
            hi = n_points
        cursor = path.nearest_index(state.pose.x, state.pose.y, lo, hi)
        off = math.hypot(state.pose.x - xs[cursor], state.pose.y - ys[cursor])
        if off > cfg.offpath_limit:
            outcome = Outcome.COLLISION
            break

        if timed:
            # nearest grid point to s_ref; monotone in t, ties keep the
            # smaller arc length (same convention as index_at_s)
            s_ref = ref_speed * t
            while ref_idx + 1 < n_points and abs(ss[ref_idx + 1] - s_ref) < abs(
                ss[ref_idx] - s_ref
            ):
                ref_idx += 1
            target = ref_idx
        else:
            near = path.nearest_index(odom.x, odom.y, lo, hi)
            target = path.index_at_s(float(ss[near]) + lookahead)
        ref = Pose(float(xs[target]), float(ys[target]), float(path.thetas[target]))

        err = body_error(world_error(ref, odom), odom.theta)
        gains = fixed_gains if fixed_gains is not None else gains_at(odom.x, odom.y)
        cmd, ctrl = control_step(err, gains, ctrl, cfg.dt, cfg.phi_max)
        if apply_limit is not None:
            cmd = apply_limit(cmd)

        samples.append(
            LogSample(
                t,
                state.pose.x, state.pose.y, state.pose.theta,
                odom.x, odom.y, odom.theta,
                err.bex, err.bey, err.betheta,
                cmd.v, cmd.omega_s, cmd.phi,
            )
        )
        state = step_vehicle(state, cmd, cfg)

    return TrajectoryLog(samples, outcome)
