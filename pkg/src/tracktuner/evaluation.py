"""Tracking-quality evaluation: MSE protocol, gain comparisons, circuit runs."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence, Union

from .controller import GainSet
from .paths import Maneuver, ReferencePath, TimedProgress, Zone, make_full_circuit, maneuver_path
from .sim import NoiseModel, Outcome, SimConfig, TrajectoryLog, run_simulation, start_state
from .supervisor import GainSchedule, MonitorStatus, RewardMonitor, SpeedLimit, Supervisor, monitor_reward
from .tuner import ErrorState, weighted_distance

DEFAULT_RUNS = 10
DEFAULT_REF_SPEED = 4.0
CIRCUIT_REF_SPEED = 3.5  # kept under the speed limit so the vehicle can close gaps


def trajectory_mse(log: TrajectoryLog) -> float:
    """Mean of (bex^2 + bey^2) / 2 over all samples."""
    if not log.samples:
        raise ValueError("cannot compute MSE of an empty trajectory")
    total = math.fsum(s.bex * s.bex + s.bey * s.bey for s in log.samples)
    return total / (2.0 * len(log.samples))


def eval_duration(path: ReferencePath, ref_speed: float) -> float:
    """Time budget: nominal traversal time plus margin for the takeoff transient."""
    return path.length / ref_speed * 1.2 + 2.0


@dataclass
class MseReport:
    gains: GainSet
    maneuver: str
    noise_enabled: bool
    seeds: list[int]
    per_run_mse: list[float]
    outcomes: list[Outcome]
    reported_mse: float  # the worst (largest) per-run MSE
    logs: list[TrajectoryLog] | None = None

    @property
    def runs(self) -> int:
        return len(self.per_run_mse)


def evaluate_gains(
    gains: GainSet,
    maneuver: Maneuver,
    noise: NoiseModel,
    runs: int = DEFAULT_RUNS,
    seeds: Sequence[int] | None = None,
    sim_cfg: SimConfig | None = None,
    ref_speed: float = DEFAULT_REF_SPEED,
    start_offset: float = 1.0,
    duration: float | None = None,
    keep_logs: bool = False,
) -> MseReport:
    """Run the MSE protocol for one gain set.

    Executes `runs` simulations with per-run noise seeds derived from the
    noise model's seed by unit increments, and reports the worst per-run
    MSE. With noise disabled the runs are identical by construction.
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs!r}")
    if seeds is None:
        seeds = [noise.seed + i for i in range(runs)]
    seeds = [int(s) for s in seeds]
    if len(seeds) != runs or len(set(seeds)) != runs:
        raise ValueError("need one distinct seed per run")
    if sim_cfg is None:
        sim_cfg = SimConfig(seed=seeds[0])
    path = maneuver_path(maneuver)
    if duration is None:
        duration = eval_duration(path, ref_speed)

    per_run: list[float] = []
    outcomes: list[Outcome] = []
    logs: list[TrajectoryLog] = []
    for seed in seeds:
        run_noise = replace(noise, seed=seed)
        log = run_simulation(
            sim_cfg,
            gains,
            path,
            run_noise,
            duration,
            reference=TimedProgress(ref_speed),
            start=start_state(path, start_offset),
        )
        per_run.append(trajectory_mse(log))
        outcomes.append(log.outcome)
        if keep_logs:
            logs.append(log)

    return MseReport(
        gains=gains,
        maneuver=maneuver.value,
        noise_enabled=noise.enabled,
        seeds=seeds,
        per_run_mse=per_run,
        outcomes=outcomes,
        reported_mse=max(per_run),
        logs=logs if keep_logs else None,
    )


@dataclass(frozen=True)
class ComparisonEntry:
    gains: GainSet
    report_off: MseReport
    report_on: MseReport


def grid_compare(
    gain_sets: Sequence[GainSet],
    maneuver: Maneuver,
    runs: int = DEFAULT_RUNS,
    base_seed: int = 0,
    duration: float | None = None,
    sim_cfg: SimConfig | None = None,
) -> list[ComparisonEntry]:
    """Evaluate each gain set with noise off and on, sorted by noise-off MSE."""
    if not gain_sets:
        raise ValueError("gain_sets must not be empty")
    entries = []
    for gains in gain_sets:
        off = evaluate_gains(
            gains, maneuver, NoiseModel(enabled=False, seed=base_seed),
            runs=runs, duration=duration, sim_cfg=sim_cfg,
        )
        on = evaluate_gains(
            gains, maneuver, NoiseModel(enabled=True, seed=base_seed),
            runs=runs, duration=duration, sim_cfg=sim_cfg,
        )
        entries.append(ComparisonEntry(gains, off, on))
    entries.sort(key=lambda e: e.report_off.reported_mse)
    return entries


def run_circuit(
    schedule: GainSchedule,
    limit: SpeedLimit | None,
    noise: NoiseModel,
    sim_cfg: SimConfig | None = None,
    ref_speed: float = CIRCUIT_REF_SPEED,
    duration: float | None = None,
    monitor: RewardMonitor | None = None,
    circuit: tuple[ReferencePath, Sequence[Zone]] | None = None,
) -> tuple[TrajectoryLog, MseReport]:
    """Drive the benchmark circuit under the zone supervisor.

    Returns the trajectory log (with the advisory monitor status attached
    when a monitor is supplied) and a single-run MSE report.
    """
    if circuit is None:
        path, zones = make_full_circuit()
    else:
        path, zones = circuit
    if sim_cfg is None:
        sim_cfg = SimConfig(seed=noise.seed)
    if duration is None:
        duration = path.length / ref_speed * 1.3 + 5.0

    pilot = Supervisor(schedule=schedule, zones=tuple(zones), limit=limit, monitor=monitor)
    log = run_simulation(
        sim_cfg, pilot, path, noise, duration, reference=TimedProgress(ref_speed)
    )
    if monitor is not None and log.samples:
        log.monitor_status = _advisory_status(log, monitor, duration, sim_cfg.dt).value

    report = MseReport(
        gains=schedule.default,
        maneuver="circuit",
        noise_enabled=noise.enabled,
        seeds=[noise.seed],
        per_run_mse=[trajectory_mse(log)],
        outcomes=[log.outcome],
        reported_mse=trajectory_mse(log),
    )
    return log, report


def _advisory_status(
    log: TrajectoryLog, monitor: RewardMonitor, duration: float, dt: float
) -> MonitorStatus:
    # Telescoped running sum of per-sample improvement rewards: only the
    # first and last instantaneous error distances survive the sum.
    first = log.samples[0]
    last = log.samples[-1]
    d_first = weighted_distance(ErrorState(abs(first.bey), abs(first.betheta)))
    d_last = weighted_distance(ErrorState(abs(last.bey), abs(last.betheta)))
    observed = 1.0 / (1.0 + d_last) - 1.0 / (1.0 + d_first)
    fraction = min(1.0, (len(log.samples) * dt) / duration)
    return monitor_reward(monitor, observed, fraction)


# --- report serialization ---------------------------------------------------

REPORT_HEADER = ("kv", "kl", "ks", "ki", "maneuver", "noise", "run_index", "mse", "outcome")


def write_mse_report_csv(
    reports: Sequence[MseReport],
    destination: Union[str, Path],
    meta: Mapping[str, object] | None = None,
) -> None:
    """Per-run rows, then one summary row per report carrying the reported MSE."""
    with open(destination, "w", newline="") as handle:
        for key, value in (meta or {}).items():
            handle.write(f"# {key}={value}\n")
        writer = csv.writer(handle)
        writer.writerow(REPORT_HEADER)
        for report in reports:
            kv, kl, ks, ki = (repr(v) for v in report.gains.as_tuple())
            noise = "on" if report.noise_enabled else "off"
            for i, (mse, outcome) in enumerate(zip(report.per_run_mse, report.outcomes)):
                writer.writerow([kv, kl, ks, ki, report.maneuver, noise, i, repr(mse), outcome.value])
            writer.writerow([kv, kl, ks, ki, report.maneuver, noise, "", repr(report.reported_mse), ""])


def report_as_dict(report: MseReport) -> dict:
    return {
        "gains": dict(zip(("kv", "kl", "ks", "ki"), report.gains.as_tuple())),
        "maneuver": report.maneuver,
        "noise": report.noise_enabled,
        "seeds": report.seeds,
        "per_run_mse": report.per_run_mse,
        "outcomes": [o.value for o in report.outcomes],
        "reported_mse": report.reported_mse,
    }


def write_mse_report_json(
    reports: Sequence[MseReport],
    destination: Union[str, Path],
    meta: Mapping[str, object] | None = None,
) -> None:
    payload = {"meta": dict(meta or {}), "reports": [report_as_dict(r) for r in reports]}
    with open(destination, "w") as handle:
        json.dump(payload, handle, indent=1, sort_keys=True)
        handle.write("\n")


def write_comparison_csv(
    entries: Sequence[ComparisonEntry],
    destination: Union[str, Path],
    meta: Mapping[str, object] | None = None,
) -> None:
    """One summary row per gain set per noise setting, noise-off row first."""
    with open(destination, "w", newline="") as handle:
        for key, value in (meta or {}).items():
            handle.write(f"# {key}={value}\n")
        writer = csv.writer(handle)
        writer.writerow(("kv", "kl", "ks", "ki", "maneuver", "noise", "reported_mse", "worst_outcome"))
        for entry in entries:
            kv, kl, ks, ki = (repr(v) for v in entry.gains.as_tuple())
            for report in (entry.report_off, entry.report_on):
                worst = max(report.outcomes, key=lambda o: (o is Outcome.COLLISION, o is Outcome.TIME_UP))
                writer.writerow([
                    kv, kl, ks, ki, report.maneuver,
                    "on" if report.noise_enabled else "off",
                    repr(report.reported_mse), worst.value,
                ])
