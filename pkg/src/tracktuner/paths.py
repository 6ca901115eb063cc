"""Reference path construction, map zones, and reference scheduling policies."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .geometry import Pose, wrap_angle

DEFAULT_SPACING = 0.1  # target distance between consecutive path points (m)


class Maneuver(Enum):
    LANE_CHANGE = "lane_change"
    ROUNDABOUT = "roundabout"
    DEFAULT = "default"


@dataclass(frozen=True, slots=True)
class PathPoint:
    x: float
    y: float
    theta: float  # tangent heading (rad)
    s: float  # cumulative arc length from the path start (m)


class ReferencePath:
    """Polyline reference with tangent headings and cumulative arc length.

    Coordinates are held in numpy arrays so nearest-point queries stay cheap
    inside the simulation loop.
    """

    def __init__(
        self,
        xs: Sequence[float],
        ys: Sequence[float],
        thetas: Sequence[float],
        spacing: float = DEFAULT_SPACING,
    ) -> None:
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        self.thetas = np.asarray(thetas, dtype=float)
        self.spacing = float(spacing)
        if self.xs.ndim != 1 or self.xs.shape != self.ys.shape or self.xs.shape != self.thetas.shape:
            raise ValueError("xs, ys, thetas must be 1-d arrays of equal length")
        if len(self.xs) < 2:
            raise ValueError("a path needs at least two points")
        if not (math.isfinite(self.spacing) and self.spacing > 0.0):
            raise ValueError(f"spacing must be positive, got {spacing!r}")
        steps = np.hypot(np.diff(self.xs), np.diff(self.ys))
        if np.any(steps < 0.5 * self.spacing - 1e-9) or np.any(steps > 2.0 * self.spacing + 1e-9):
            raise ValueError("consecutive point spacing outside [0.5*spacing, 2*spacing]")
        self.ss = np.concatenate(([0.0], np.cumsum(steps)))

    def __len__(self) -> int:
        return len(self.xs)

    @property
    def length(self) -> float:
        return float(self.ss[-1])

    def point(self, index: int) -> PathPoint:
        return PathPoint(
            float(self.xs[index]),
            float(self.ys[index]),
            float(self.thetas[index]),
            float(self.ss[index]),
        )

    @property
    def points(self) -> list[PathPoint]:
        return [self.point(i) for i in range(len(self))]

    def start_pose(self) -> Pose:
        return Pose(float(self.xs[0]), float(self.ys[0]), float(self.thetas[0]))

    def end_pose(self) -> Pose:
        return Pose(float(self.xs[-1]), float(self.ys[-1]), float(self.thetas[-1]))

    def nearest_index(self, x: float, y: float, lo: int = 0, hi: int | None = None) -> int:
        """Index of the point closest to (x, y); distance ties take the smaller arc length."""
        if hi is None:
            hi = len(self.xs)
        dx = self.xs[lo:hi] - x
        dy = self.ys[lo:hi] - y
        return lo + int(np.argmin(dx * dx + dy * dy))

    def index_at_s(self, s: float) -> int:
        """Index of the point whose arc length is closest to s, clamped to the ends."""
        j = int(np.searchsorted(self.ss, s))
        if j <= 0:
            return 0
        if j >= len(self.ss):
            return len(self.ss) - 1
        if self.ss[j] - s < s - self.ss[j - 1]:
            return j
        return j - 1

    def to_csv(self, destination: Union[str, Path]) -> None:
        with open(destination, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["x", "y", "theta", "s"])
            for i in range(len(self)):
                writer.writerow(
                    [repr(float(self.xs[i])), repr(float(self.ys[i])), repr(float(self.thetas[i])), repr(float(self.ss[i]))]
                )

    @classmethod
    def from_csv(cls, source: Union[str, Path]) -> "ReferencePath":
        xs: list[float] = []
        ys: list[float] = []
        thetas: list[float] = []
        with open(source, newline="") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None or not {"x", "y", "theta"}.issubset(reader.fieldnames):
                raise ValueError(f"{source}: expected columns x, y, theta, s")
            for row in reader:
                xs.append(float(row["x"]))
                ys.append(float(row["y"]))
                thetas.append(float(row["theta"]))
        if len(xs) < 2:
            raise ValueError(f"{source}: a path needs at least two points")
        steps = np.hypot(np.diff(np.asarray(xs)), np.diff(np.asarray(ys)))
        return cls(xs, ys, thetas, spacing=float(np.median(steps)))


# --- zones ---------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class RectRegion:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def contains(self, x: float, y: float) -> bool:
        # boundaries count as inside
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True, slots=True)
class CircleRegion:
    cx: float
    cy: float
    radius: float

    def contains(self, x: float, y: float) -> bool:
        dx = x - self.cx
        dy = y - self.cy
        return dx * dx + dy * dy <= self.radius * self.radius


Region = Union[RectRegion, CircleRegion]


@dataclass(frozen=True, slots=True)
class Zone:
    name: str
    region: Region
    maneuver: Maneuver


def zone_of(zones: Sequence[Zone], x: float, y: float) -> Maneuver:
    """Maneuver kind at a position: the containing zone's kind, or DEFAULT."""
    for zone in zones:
        if zone.region.contains(x, y):
            return zone.maneuver
    return Maneuver.DEFAULT


def _regions_overlap(a: Region, b: Region) -> bool:
    if isinstance(a, RectRegion) and isinstance(b, RectRegion):
        return (
            a.x_min <= b.x_max
            and b.x_min <= a.x_max
            and a.y_min <= b.y_max
            and b.y_min <= a.y_max
        )
    if isinstance(a, CircleRegion) and isinstance(b, CircleRegion):
        return math.hypot(a.cx - b.cx, a.cy - b.cy) <= a.radius + b.radius
    rect, circle = (a, b) if isinstance(a, RectRegion) else (b, a)
    nx = min(max(circle.cx, rect.x_min), rect.x_max)
    ny = min(max(circle.cy, rect.y_min), rect.y_max)
    return math.hypot(circle.cx - nx, circle.cy - ny) <= circle.radius


def zones_disjoint(zones: Sequence[Zone]) -> bool:
    for i in range(len(zones)):
        for j in range(i + 1, len(zones)):
            if _regions_overlap(zones[i].region, zones[j].region):
                return False
    return True


# --- reference scheduling -------------------------------------------------


@dataclass(frozen=True, slots=True)
class LookaheadPolicy:
    """Arc-length offset applied ahead of the nearest path point."""

    lookahead_dist: float = 2.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.lookahead_dist) or self.lookahead_dist < 0.0:
            raise ValueError(f"lookahead_dist must be finite and >= 0, got {self.lookahead_dist!r}")


@dataclass(frozen=True, slots=True)
class TimedProgress:
    """Reference pose marches along arc length at a fixed progress speed."""

    speed: float = 4.0  # m/s

    def __post_init__(self) -> None:
        if not math.isfinite(self.speed) or self.speed <= 0.0:
            raise ValueError(f"progress speed must be positive, got {self.speed!r}")


@dataclass(frozen=True, slots=True)
class LookaheadProgress:
    """Reference pose stays a fixed arc length ahead of the nearest path point."""

    policy: LookaheadPolicy = LookaheadPolicy()


ReferenceSchedule = Union[TimedProgress, LookaheadProgress]


def reference_pose(path: ReferencePath, odom: Pose, policy: LookaheadPolicy) -> Pose:
    """Reference pose for a vehicle at `odom`.

    Finds the path point nearest to the odometry position (distance ties go
    to the smaller arc length) and returns the point `lookahead_dist`
    further along the path, clamped to the final point.
    """
    i = path.nearest_index(odom.x, odom.y)
    j = path.index_at_s(float(path.ss[i]) + policy.lookahead_dist)
    target = path.point(j)
    return Pose(target.x, target.y, target.theta)


# --- builders --------------------------------------------------------------


def _lane_change_arrays(
    lane_width: float,
    approach: float,
    transition: float,
    exit_len: float,
    spacing: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if transition <= 0.0 or approach < 0.0 or exit_len < 0.0:
        raise ValueError("transition must be positive and straights non-negative")
    total = approach + transition + exit_len
    n = max(2, int(round(total / spacing)))
    xs = np.linspace(0.0, total, n + 1)
    ys = np.empty_like(xs)
    thetas = np.empty_like(xs)
    half = lane_width / 2.0
    for k, x in enumerate(xs):
        if x <= approach:
            ys[k] = 0.0
            thetas[k] = 0.0
        elif x <= approach + transition:
            u = (x - approach) / transition
            ys[k] = -half * (1.0 - math.cos(math.pi * u))
            slope = -half * math.pi * math.sin(math.pi * u) / transition
            thetas[k] = math.atan(slope)
        else:
            ys[k] = -lane_width
            thetas[k] = 0.0
    return xs, ys, thetas


def make_lane_change_path(
    lane_width: float = 3.5,
    approach: float = 15.0,
    transition: float = 20.0,
    exit_len: float = 15.0,
    spacing: float = DEFAULT_SPACING,
) -> ReferencePath:
    """Straight approach, cosine-blend shift one lane to the right, straight exit.

    The blend is C1 at both junctions: its slope is zero at the transition
    ends and largest mid-transition.
    """
    xs, ys, thetas = _lane_change_arrays(lane_width, approach, transition, exit_len, spacing)
    return ReferencePath(xs, ys, thetas, spacing=spacing)


def _roundabout_arrays(
    radius: float,
    entry: float,
    sweep: float,
    exit_len: float,
    spacing: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if radius <= 0.0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    if not 0.0 < sweep <= 2.0 * math.pi:
        raise ValueError(f"sweep must lie in (0, 2*pi], got {sweep!r}")
    if entry < 0.0 or exit_len < 0.0:
        raise ValueError("entry and exit lengths must be non-negative")

    xs: list[float] = []
    ys: list[float] = []
    thetas: list[float] = []

    n_entry = max(1, int(round(entry / spacing)))
    for k in range(n_entry + 1):
        xs.append(entry * k / n_entry)
        ys.append(0.0)
        thetas.append(0.0)

    # counterclockwise arc tangent to the entry straight: center sits on the left
    cx, cy = entry, radius
    n_arc = max(1, int(round(radius * sweep / spacing)))
    for k in range(1, n_arc + 1):
        a = -math.pi / 2.0 + sweep * k / n_arc
        xs.append(cx + radius * math.cos(a))
        ys.append(cy + radius * math.sin(a))
        thetas.append(wrap_angle(a + math.pi / 2.0))

    heading = wrap_angle(sweep)
    ex, ey = xs[-1], ys[-1]
    n_exit = max(1, int(round(exit_len / spacing)))
    for k in range(1, n_exit + 1):
        d = exit_len * k / n_exit
        xs.append(ex + d * math.cos(heading))
        ys.append(ey + d * math.sin(heading))
        thetas.append(heading)

    return np.asarray(xs), np.asarray(ys), np.asarray(thetas)


def make_roundabout_path(
    radius: float = 20.0,
    entry: float = 10.0,
    sweep: float = 1.5 * math.pi,
    exit_len: float = 10.0,
    spacing: float = DEFAULT_SPACING,
) -> ReferencePath:
    """Straight entry, counterclockwise circular arc, straight tangent exit."""
    xs, ys, thetas = _roundabout_arrays(radius, entry, sweep, exit_len, spacing)
    return ReferencePath(xs, ys, thetas, spacing=spacing)


def maneuver_path(maneuver: Maneuver, spacing: float = DEFAULT_SPACING) -> ReferencePath:
    """Default benchmark path for a trainable maneuver."""
    if maneuver is Maneuver.LANE_CHANGE:
        return make_lane_change_path(spacing=spacing)
    if maneuver is Maneuver.ROUNDABOUT:
        return make_roundabout_path(spacing=spacing)
    raise ValueError(f"no benchmark path for {maneuver!r}")


def _transform(
    xs: np.ndarray, ys: np.ndarray, thetas: np.ndarray, origin: Pose
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    c = math.cos(origin.theta)
    s = math.sin(origin.theta)
    xw = origin.x + c * xs - s * ys
    yw = origin.y + s * xs + c * ys
    tw = np.asarray([wrap_angle(t + origin.theta) for t in thetas])
    return xw, yw, tw


def _straight_arrays(length: float, spacing: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = max(1, int(round(length / spacing)))
    xs = np.linspace(0.0, length, n + 1)
    return xs, np.zeros_like(xs), np.zeros_like(xs)


def _arc_arrays(radius: float, sweep: float, spacing: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # counterclockwise, starting at the origin heading +x
    n = max(1, int(round(radius * sweep / spacing)))
    a = -math.pi / 2.0 + sweep * np.arange(n + 1) / n
    xs = radius * np.cos(a)
    ys = radius + radius * np.sin(a)
    thetas = np.asarray([wrap_angle(v + math.pi / 2.0) for v in a])
    return xs, ys, thetas


def make_full_circuit(spacing: float = DEFAULT_SPACING) -> tuple[ReferencePath, list[Zone]]:
    """Benchmark circuit: straight, lane change, straight, sharp left, roundabout, straight.

    Returns the path plus the two gain-scheduling zones. Walking the path
    through `zone_of` yields DEFAULT, LANE_CHANGE, DEFAULT, ROUNDABOUT,
    DEFAULT in that order.
    """
    lane_width = 3.5
    roundabout_radius = 20.0
    segments: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
    cursor = Pose(0.0, 0.0, 0.0)

    def append(local: tuple[np.ndarray, np.ndarray, np.ndarray]) -> Pose:
        nonlocal cursor
        xs, ys, thetas = _transform(*local, cursor)
        segments.append((xs, ys, thetas))
        cursor = Pose(float(xs[-1]), float(ys[-1]), float(thetas[-1]))
        return cursor

    append(_straight_arrays(10.0, spacing))
    lane_entry = cursor
    lane_exit = append(_lane_change_arrays(lane_width, 15.0, 20.0, 15.0, spacing))
    append(_straight_arrays(10.0, spacing))
    append(_arc_arrays(12.0, math.radians(100.0), spacing))
    # long approach lifts the roundabout clear of the lane-change corridor
    arc_start = append(_straight_arrays(30.0, spacing))
    arc_center = (
        arc_start.x - roundabout_radius * math.sin(arc_start.theta),
        arc_start.y + roundabout_radius * math.cos(arc_start.theta),
    )
    append(_arc_arrays(roundabout_radius, 1.5 * math.pi, spacing))
    append(_straight_arrays(25.0, spacing))

    xs = np.concatenate([seg[0] if i == 0 else seg[0][1:] for i, seg in enumerate(segments)])
    ys = np.concatenate([seg[1] if i == 0 else seg[1][1:] for i, seg in enumerate(segments)])
    thetas = np.concatenate([seg[2] if i == 0 else seg[2][1:] for i, seg in enumerate(segments)])
    path = ReferencePath(xs, ys, thetas, spacing=spacing)

    zones = [
        Zone(
            "lane_change",
            RectRegion(
                x_min=lane_entry.x,
                y_min=min(lane_entry.y, lane_exit.y) - 2.0,
                x_max=lane_exit.x,
                y_max=max(lane_entry.y, lane_exit.y) + 2.0,
            ),
            Maneuver.LANE_CHANGE,
        ),
        Zone(
            "roundabout",
            CircleRegion(cx=arc_center[0], cy=arc_center[1], radius=roundabout_radius + 1.5),
            Maneuver.ROUNDABOUT,
        ),
    ]
    if not zones_disjoint(zones):
        raise RuntimeError("circuit zones overlap")
    return path, zones
