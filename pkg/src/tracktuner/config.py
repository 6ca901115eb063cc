"""Run configuration: sectioned key-value files with full defaulting.

Every knob has a default, so all sections and keys are optional. Values
that fail to parse or validate raise ConfigError with the offending
section.key in the message.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Callable, TypeVar

from .controller import ControlInputError, GainSet
from .paths import (
    CircleRegion,
    LookaheadPolicy,
    Maneuver,
    RectRegion,
    Zone,
    zones_disjoint,
)
from .sim import NoiseModel, SimConfig
from .supervisor import GainSchedule, SpeedLimit
from .tuner import TrainingConfig

T = TypeVar("T")

PAPERLIKE_LANE_GAINS = GainSet(3.0, 21.0, 21.0, 0.7)
PAPERLIKE_ROUNDABOUT_GAINS = GainSet(3.4, 21.0, 1.0, 0.84)


class ConfigError(ValueError):
    """Configuration value error, carrying the section.key location."""


@dataclass
class RunConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)
    training: dict[Maneuver, TrainingConfig] = field(
        default_factory=lambda: {
            Maneuver.LANE_CHANGE: TrainingConfig.for_maneuver(Maneuver.LANE_CHANGE),
            Maneuver.ROUNDABOUT: TrainingConfig.for_maneuver(Maneuver.ROUNDABOUT),
        }
    )
    schedule: GainSchedule = field(
        default_factory=lambda: GainSchedule(
            entries={
                Maneuver.LANE_CHANGE: PAPERLIKE_LANE_GAINS,
                Maneuver.ROUNDABOUT: PAPERLIKE_ROUNDABOUT_GAINS,
            },
            default=PAPERLIKE_LANE_GAINS,
        )
    )
    limit: SpeedLimit = field(default_factory=SpeedLimit)
    monitor_threshold: float = 0.5
    monitor_window: int = 1
    lookahead: LookaheadPolicy = field(default_factory=LookaheadPolicy)
    ref_speed: float = 4.0
    circuit_ref_speed: float = 3.5
    eval_runs: int = 10
    eval_duration: float | None = None
    eval_start_offset: float = 1.0
    zones: list[Zone] | None = None
    circuit_csv: str | None = None


def _convert(
    parser: configparser.ConfigParser,
    section: str,
    key: str,
    default: T,
    conv: Callable[[str], T],
) -> T:
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    if raw == "":
        return default
    try:
        return conv(raw)
    except (ValueError, ControlInputError) as exc:
        raise ConfigError(f"{section}.{key}: {exc}") from exc


def _float(parser, section, key, default):
    return _convert(parser, section, key, default, float)


def _int(parser, section, key, default):
    return _convert(parser, section, key, default, int)


def _bool(parser, section, key, default):
    def conv(raw: str) -> bool:
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")

    return _convert(parser, section, key, default, conv)


def _float_pair(parser, section, key, default):
    def conv(raw: str) -> tuple[float, float]:
        parts = [float(p) for p in raw.split(",")]
        if len(parts) != 2:
            raise ValueError(f"expected two comma-separated values, got {raw!r}")
        return (parts[0], parts[1])

    return _convert(parser, section, key, default, conv)


def _float_quad(parser, section, key, default):
    def conv(raw: str) -> tuple[float, float, float, float]:
        parts = [float(p) for p in raw.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected four comma-separated values, got {raw!r}")
        return (parts[0], parts[1], parts[2], parts[3])

    return _convert(parser, section, key, default, conv)


def _gain_quad(parser, section, key, default: GainSet) -> GainSet:
    quad = _float_quad(parser, section, key, default.as_tuple())
    try:
        return GainSet(*quad)
    except ControlInputError as exc:
        raise ConfigError(f"{section}.{key}: {exc}") from exc


def _schedule_entry(parser: configparser.ConfigParser, section: str, default: GainSet) -> GainSet:
    values = []
    for name, fallback in zip(("kv", "kl", "ks", "ki"), default.as_tuple()):
        values.append(_float(parser, section, name, fallback))
    try:
        return GainSet(*values)
    except ControlInputError as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def _training_section(
    parser: configparser.ConfigParser, section: str, maneuver: Maneuver, ref_speed: float
) -> TrainingConfig:
    base = TrainingConfig.for_maneuver(maneuver)
    base.ref_speed = ref_speed
    cfg = TrainingConfig(
        maneuver=maneuver,
        loop_time=_float(parser, section, "loop_time", base.loop_time),
        e_low=_float_pair(parser, section, "e_low", base.e_low),
        e_high=_float_pair(parser, section, "e_high", base.e_high),
        k_min=_gain_quad(parser, section, "k_min", base.k_min),
        k_max=_gain_quad(parser, section, "k_max", base.k_max),
        h_consts=_float_quad(parser, section, "h_consts", base.h_consts),
        episodes=_int(parser, section, "episodes", base.episodes),
        step_limit=_int(parser, section, "step_limit", base.step_limit),
        gamma=_float(parser, section, "gamma", base.gamma),
        alpha=_float(parser, section, "alpha", base.alpha),
        epsilon_start=_float(parser, section, "epsilon_start", base.epsilon_start),
        epsilon_decay=_convert(parser, section, "epsilon_decay", None, float),
        collision_penalty=_float(parser, section, "collision_penalty", base.collision_penalty),
        seed=_int(parser, section, "seed", base.seed),
        start_offset=_float(parser, section, "start_offset", base.start_offset),
        ref_speed=_float(parser, section, "ref_speed", base.ref_speed),
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from exc
    return cfg


def _parse_zone(name: str, raw: str) -> Zone:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) < 2:
        raise ValueError("expected 'rect,KIND,x_min,y_min,x_max,y_max' or 'circle,KIND,cx,cy,r'")
    shape, kind = parts[0].lower(), parts[1].lower()
    maneuver = Maneuver(kind)
    coords = [float(p) for p in parts[2:]]
    if shape == "rect":
        if len(coords) != 4:
            raise ValueError("rect zones need four coordinates")
        region: RectRegion | CircleRegion = RectRegion(*coords)
    elif shape == "circle":
        if len(coords) != 3:
            raise ValueError("circle zones need three coordinates")
        region = CircleRegion(*coords)
    else:
        raise ValueError(f"unknown zone shape {shape!r}")
    return Zone(name, region, maneuver)


def load_run_config(path: str | None = None) -> RunConfig:
    """Load a config file; a missing path (or file) yields pure defaults."""
    parser = configparser.ConfigParser()
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")

    cfg = RunConfig()

    try:
        cfg.sim = SimConfig(
            dt=_float(parser, "sim", "dt", cfg.sim.dt),
            wheelbase=_float(parser, "sim", "wheelbase", cfg.sim.wheelbase),
            actuator_tau=_float(parser, "sim", "actuator_tau", cfg.sim.actuator_tau),
            steer_tau=_float(parser, "sim", "steer_tau", cfg.sim.steer_tau),
            phi_max=math.radians(
                _float(parser, "sim", "phi_max_deg", math.degrees(cfg.sim.phi_max))
            ),
            goal_tolerance=_float(parser, "sim", "goal_tolerance", cfg.sim.goal_tolerance),
            offpath_limit=_float(parser, "sim", "offpath_limit", cfg.sim.offpath_limit),
            seed=_int(parser, "sim", "seed", cfg.sim.seed),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"sim: {exc}") from exc

    try:
        cfg.noise = NoiseModel(
            enabled=_bool(parser, "noise", "enabled", cfg.noise.enabled),
            pos_sigma=_float(parser, "noise", "pos_sigma", cfg.noise.pos_sigma),
            orient_halfwidth=_float(
                parser, "noise", "orient_halfwidth", cfg.noise.orient_halfwidth
            ),
            seed=_int(parser, "noise", "seed", cfg.sim.seed),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"noise: {exc}") from exc

    cfg.ref_speed = _float(parser, "paths", "ref_speed", cfg.ref_speed)
    cfg.circuit_ref_speed = _float(parser, "paths", "circuit_ref_speed", cfg.circuit_ref_speed)
    try:
        cfg.lookahead = LookaheadPolicy(
            _float(parser, "paths", "lookahead", cfg.lookahead.lookahead_dist)
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"paths.lookahead: {exc}") from exc
    circuit_csv = parser.get("paths", "circuit_csv", fallback=None)
    cfg.circuit_csv = circuit_csv.strip() if circuit_csv else None

    cfg.training = {
        Maneuver.LANE_CHANGE: _training_section(
            parser, "training.lane_change", Maneuver.LANE_CHANGE, cfg.ref_speed
        ),
        Maneuver.ROUNDABOUT: _training_section(
            parser, "training.roundabout", Maneuver.ROUNDABOUT, cfg.ref_speed
        ),
    }

    cfg.schedule = GainSchedule(
        entries={
            Maneuver.LANE_CHANGE: _schedule_entry(
                parser, "schedule.lane_change", PAPERLIKE_LANE_GAINS
            ),
            Maneuver.ROUNDABOUT: _schedule_entry(
                parser, "schedule.roundabout", PAPERLIKE_ROUNDABOUT_GAINS
            ),
        },
        default=_schedule_entry(parser, "schedule.default", PAPERLIKE_LANE_GAINS),
    )

    try:
        cfg.limit = SpeedLimit(_float(parser, "limit", "v_max", cfg.limit.v_max))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"limit.v_max: {exc}") from exc

    cfg.monitor_threshold = _float(parser, "monitor", "threshold", cfg.monitor_threshold)
    cfg.monitor_window = _int(parser, "monitor", "window", cfg.monitor_window)
    if not 0.0 < cfg.monitor_threshold <= 1.0:
        raise ConfigError(f"monitor.threshold: must lie in (0, 1], got {cfg.monitor_threshold!r}")

    cfg.eval_runs = _int(parser, "eval", "runs", cfg.eval_runs)
    if cfg.eval_runs < 1:
        raise ConfigError(f"eval.runs: must be >= 1, got {cfg.eval_runs!r}")
    if parser.has_option("eval", "duration"):
        cfg.eval_duration = _float(parser, "eval", "duration", -1.0)
        if cfg.eval_duration <= 0.0:
            raise ConfigError(f"eval.duration: must be positive, got {cfg.eval_duration!r}")
    cfg.eval_start_offset = _float(parser, "eval", "start_offset", cfg.eval_start_offset)
    if cfg.eval_start_offset < 0.0:
        raise ConfigError(f"eval.start_offset: must be >= 0, got {cfg.eval_start_offset!r}")

    if parser.has_section("zones"):
        zones = []
        for name in parser.options("zones"):
            try:
                zones.append(_parse_zone(name, parser.get("zones", name)))
            except ValueError as exc:
                raise ConfigError(f"zones.{name}: {exc}") from exc
        if not zones_disjoint(zones):
            raise ConfigError("zones: zone regions overlap")
        cfg.zones = zones

    return cfg
