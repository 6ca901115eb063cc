"""Zone-based gain scheduling, speed limiting, and advisory reward monitoring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .controller import ControlCommand, GainSet
from .paths import Maneuver, Zone, zone_of


@dataclass(frozen=True)
class GainSchedule:
    """Gain sets keyed by maneuver kind, with a fallback for open road."""

    entries: Mapping[Maneuver, GainSet]
    default: GainSet

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", dict(self.entries))


def select_gains(schedule: GainSchedule, maneuver: Maneuver) -> GainSet:
    """Gains for a maneuver kind; unknown kinds fall back to the default set."""
    return schedule.entries.get(maneuver, schedule.default)


@dataclass(frozen=True, slots=True)
class SpeedLimit:
    v_max: float = 4.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.v_max) and self.v_max > 0.0):
            raise ValueError(f"v_max must be positive, got {self.v_max!r}")


def enforce_speed_limit(cmd: ControlCommand, limit: SpeedLimit) -> ControlCommand:
    """Cap the commanded speed; steering passes through untouched."""
    if cmd.v <= limit.v_max:
        return cmd
    return ControlCommand(limit.v_max, cmd.omega_s, cmd.phi)


class MonitorStatus(Enum):
    NOMINAL = "Nominal"
    DEGRADED = "Degraded"


@dataclass
class RewardMonitor:
    """Compares a running reward sum against the stored training curve.

    The status is advisory: it is logged and exposed but never alters
    control.
    """

    training_curve: Sequence[float]
    window: int = 1
    threshold: float = 0.5

    def __post_init__(self) -> None:
        if len(self.training_curve) == 0:
            raise ValueError("training_curve must not be empty")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in (0, 1], got {self.threshold!r}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window!r}")


def monitor_reward(
    monitor: RewardMonitor, observed_running_sum: float, episode_fraction: float
) -> MonitorStatus:
    """Flag a run whose accumulated reward falls well below the training record.

    The training curve's running sum is interpolated at the given fraction
    of progress; the observed sum is DEGRADED when it drops below
    threshold times that reference. A fraction of zero compares against an
    empty window and is always NOMINAL.
    """
    if not 0.0 <= episode_fraction <= 1.0:
        raise ValueError(f"episode_fraction must lie in [0, 1], got {episode_fraction!r}")
    if not math.isfinite(observed_running_sum):
        raise ValueError(f"observed_running_sum must be finite, got {observed_running_sum!r}")
    if episode_fraction == 0.0:
        return MonitorStatus.NOMINAL
    cumulative = np.concatenate(([0.0], np.cumsum(np.asarray(monitor.training_curve, dtype=float))))
    grid = np.linspace(0.0, 1.0, len(cumulative))
    reference = float(np.interp(episode_fraction, grid, cumulative))
    if observed_running_sum < monitor.threshold * reference:
        return MonitorStatus.DEGRADED
    return MonitorStatus.NOMINAL


@dataclass
class Supervisor:
    """Bundles the schedule, zones, optional speed limit, and optional monitor.

    Exactly one gain set is consulted per control step; the switch happens
    between steps when the odometry position crosses a zone boundary.
    """

    schedule: GainSchedule
    zones: Sequence[Zone] = field(default_factory=tuple)
    limit: SpeedLimit | None = None
    monitor: RewardMonitor | None = None

    def gains_at(self, x: float, y: float) -> GainSet:
        return select_gains(self.schedule, zone_of(self.zones, x, y))

    def apply_limit(self, cmd: ControlCommand) -> ControlCommand:
        if self.limit is None:
            return cmd
        return enforce_speed_limit(cmd, self.limit)
