"""Four-gain trajectory controller.

The commanded speed tracks the longitudinal body error, a steering rate is
formed from the lateral and heading body errors, and a first-order low-pass
filter smooths the steering angle before saturation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .geometry import Pose, wrap_angle


class ControlInputError(ValueError):
    """Raised when the control laws receive non-finite inputs."""


@dataclass(frozen=True, slots=True)
class GainSet:
    """The four tunable controller parameters.

    kv scales the longitudinal error into a speed command, kl and ks scale
    the lateral and heading errors into a steering rate, and ki is the
    coefficient of the steering low-pass filter.
    """

    kv: float
    kl: float
    ks: float
    ki: float

    def __post_init__(self) -> None:
        for name in ("kv", "kl", "ks"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise ControlInputError(f"{name} must be finite and >= 0, got {value!r}")
        if not math.isfinite(self.ki) or not 0.0 < self.ki < 1.0:
            raise ControlInputError(f"ki must lie strictly inside (0, 1), got {self.ki!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.kv, self.kl, self.ks, self.ki)

    @classmethod
    def from_iterable(cls, values: Iterable[float]) -> "GainSet":
        items = [float(v) for v in values]
        if len(items) != 4:
            raise ControlInputError(f"expected 4 gains, got {len(items)}")
        return cls(*items)


@dataclass(frozen=True, slots=True)
class WorldError:
    """Reference minus vehicle pose, expressed in the world frame."""

    ex: float
    ey: float
    etheta: float  # wrapped heading difference (rad)


@dataclass(frozen=True, slots=True)
class BodyError:
    """World error rotated into the vehicle body frame."""

    bex: float  # longitudinal (m)
    bey: float  # lateral (m)
    betheta: float  # heading (rad)


@dataclass(frozen=True, slots=True)
class ControlCommand:
    v: float  # commanded speed (m/s), never negative
    omega_s: float  # steering rate before filtering (rad/s)
    phi: float  # filtered, saturated steering angle (rad)


@dataclass(frozen=True, slots=True)
class ControllerState:
    """Carries the previous filtered steering angle between control steps."""

    phi_prev: float = 0.0


def world_error(ref: Pose, pose: Pose) -> WorldError:
    """Positional and wrapped heading difference from the vehicle to the reference."""
    return WorldError(ref.x - pose.x, ref.y - pose.y, wrap_angle(ref.theta - pose.theta))


def body_error(err: WorldError, theta: float) -> BodyError:
    """Rotate a world-frame error into the body frame of a vehicle heading theta."""
    c = math.cos(theta)
    s = math.sin(theta)
    return BodyError(c * err.ex + s * err.ey, -s * err.ex + c * err.ey, err.etheta)


def control_step(
    err: BodyError,
    gains: GainSet,
    state: ControllerState,
    h: float,
    phi_max: float,
) -> tuple[ControlCommand, ControllerState]:
    """Run one control update.

    Args:
        err: body-frame tracking error.
        gains: controller parameters.
        state: previous controller state (filtered steering angle).
        h: controller period in seconds, must be positive.
        phi_max: steering saturation bound in radians.

    Returns:
        The command for this period and the state to carry into the next one.
        The stored steering angle is the post-saturation value.
    """
    if h <= 0.0 or not math.isfinite(h):
        raise ControlInputError(f"controller period must be positive, got {h!r}")
    if phi_max <= 0.0:
        raise ControlInputError(f"phi_max must be positive, got {phi_max!r}")
    if not (math.isfinite(err.bex) and math.isfinite(err.bey) and math.isfinite(err.betheta)):
        raise ControlInputError(f"non-finite body error {err!r}")
    if not math.isfinite(state.phi_prev):
        raise ControlInputError(f"non-finite controller state {state!r}")

    v = gains.kv * err.bex
    if v < 0.0:
        v = 0.0  # forward-only: a reference behind the vehicle means hold
    omega_s = gains.ks * err.betheta + gains.kl * err.bey
    phi = gains.ki * state.phi_prev + gains.ki * h * omega_s
    if phi > phi_max:
        phi = phi_max
    elif phi < -phi_max:
        phi = -phi_max
    return ControlCommand(v, omega_s, phi), ControllerState(phi)
