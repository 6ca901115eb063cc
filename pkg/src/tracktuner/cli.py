"""Command line interface: train, eval, circuit, and compare subcommands.

Every command reads an optional config file, derives all randomness from a
single base seed, and writes CSV/JSON artifacts plus rendered figures under
the output directory tree (learning_curves/, qtables/, trajectories/,
reports/).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, load_run_config
from .controller import ControlInputError, GainSet
from .evaluation import (
    evaluate_gains,
    grid_compare,
    run_circuit,
    write_comparison_csv,
    write_mse_report_csv,
    write_mse_report_json,
)
from .paths import Maneuver, ReferencePath, make_full_circuit, maneuver_path
from .sim import Outcome
from .supervisor import GainSchedule, RewardMonitor
from .tuner import (
    EpisodeResult,
    TerminalRecord,
    most_frequent_terminal_gains,
    save_q_table,
    train,
)

DEFAULT_ALPHAS = (0.1, 0.3, 0.5, 0.7, 0.9)


def _parse_maneuver(raw: str) -> Maneuver:
    return Maneuver(raw.replace("-", "_").lower())


def _parse_gains(raw: str) -> GainSet:
    return GainSet.from_iterable(raw.split(","))


def _out_dirs(out: str) -> dict[str, Path]:
    root = Path(out)
    dirs = {
        "learning_curves": root / "learning_curves",
        "qtables": root / "qtables",
        "trajectories": root / "trajectories",
        "reports": root / "reports",
    }
    for directory in dirs.values():
        directory.mkdir(parents=True, exist_ok=True)
    return dirs


def _apply_common_overrides(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Returns the base seed after folding CLI overrides into the config."""
    base_seed = cfg.sim.seed
    if args.seed is not None:
        base_seed = args.seed
        cfg.sim = replace(cfg.sim, seed=base_seed)
        cfg.noise = replace(cfg.noise, seed=base_seed, _rng=None)
        for tcfg in cfg.training.values():
            tcfg.seed = base_seed
    if getattr(args, "noise", False):
        cfg.noise = replace(cfg.noise, enabled=True, _rng=None)
    return base_seed


def _write_learning_curve_csv(
    curve: list[EpisodeResult], destination: Path, meta: dict
) -> None:
    with open(destination, "w", newline="") as handle:
        for key, value in meta.items():
            handle.write(f"# {key}={value}\n")
        writer = csv.writer(handle)
        writer.writerow(("episode", "reward_sum", "steps", "terminal", "kv", "kl", "ks", "ki"))
        for result in curve:
            gains = result.terminal_gains
            row = [result.index, repr(result.reward_sum), result.steps, int(gains is not None)]
            if gains is not None:
                row.extend(repr(v) for v in gains.as_tuple())
            else:
                row.extend(["", "", "", ""])
            writer.writerow(row)


def _write_terminal_history_csv(
    history: list[TerminalRecord], destination: Path, meta: dict
) -> None:
    with open(destination, "w", newline="") as handle:
        for key, value in meta.items():
            handle.write(f"# {key}={value}\n")
        writer = csv.writer(handle)
        writer.writerow(("episode", "kv", "kl", "ks", "ki", "distance"))
        for record in history:
            kv, kl, ks, ki = (repr(v) for v in record.gains.as_tuple())
            writer.writerow([record.episode, kv, kl, ks, ki, repr(record.distance)])


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    base_seed = _apply_common_overrides(cfg, args)
    maneuver = _parse_maneuver(args.maneuver)
    if maneuver is Maneuver.DEFAULT:
        raise ConfigError("train: maneuver must be lane-change or roundabout")
    dirs = _out_dirs(args.out)
    alphas = [float(a) for a in args.alphas.split(",")] if args.alphas else list(DEFAULT_ALPHAS)

    from . import plots

    curves: dict[float, list[EpisodeResult]] = {}
    histories: list[list[TerminalRecord]] = []
    for i, alpha in enumerate(alphas):
        tcfg = replace(
            cfg.training[maneuver],
            alpha=alpha,
            seed=base_seed + i,
            ref_speed=cfg.ref_speed,
        )
        if args.episodes is not None:
            tcfg.episodes = args.episodes
        q, curve, history = train(tcfg, sim_cfg=cfg.sim)
        curves[alpha] = curve
        histories.append(history)
        meta = {"base_seed": base_seed, "alpha": f"{alpha:g}", "maneuver": maneuver.value}
        stem = f"{maneuver.value}_alpha{alpha:g}"
        _write_learning_curve_csv(curve, dirs["learning_curves"] / f"{stem}.csv", meta)
        save_q_table(q, dirs["qtables"] / f"{stem}.qtab")
        _write_terminal_history_csv(history, dirs["reports"] / f"{stem}_terminals.csv", meta)

    chosen = most_frequent_terminal_gains(histories)
    chosen_payload = {
        "maneuver": maneuver.value,
        "base_seed": base_seed,
        "alphas": alphas,
        "gains": dict(zip(("kv", "kl", "ks", "ki"), chosen.as_tuple())),
    }
    with open(dirs["reports"] / f"{maneuver.value}_chosen_gains.json", "w") as handle:
        json.dump(chosen_payload, handle, indent=1, sort_keys=True)
        handle.write("\n")

    plots.save_learning_curves(
        curves,
        dirs["learning_curves"] / f"{maneuver.value}_curves.png",
        title=f"{maneuver.value} training",
    )
    print(f"chosen gains for {maneuver.value}: "
          f"({chosen.kv:g}, {chosen.kl:g}, {chosen.ks:g}, {chosen.ki:g})")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    base_seed = _apply_common_overrides(cfg, args)
    maneuver = _parse_maneuver(args.maneuver)
    if maneuver is Maneuver.DEFAULT:
        raise ConfigError("eval: maneuver must be lane-change or roundabout")
    dirs = _out_dirs(args.out)
    gains = _parse_gains(args.gains)

    tcfg = cfg.training[maneuver]
    for name, value, lo, hi in zip(
        ("kv", "kl", "ks", "ki"), gains.as_tuple(), tcfg.k_min.as_tuple(), tcfg.k_max.as_tuple()
    ):
        if not lo <= value <= hi:
            print(
                f"warning: {name}={value:g} lies outside the training range [{lo:g}, {hi:g}]",
                file=sys.stderr,
            )

    runs = args.runs if args.runs is not None else cfg.eval_runs
    report = evaluate_gains(
        gains,
        maneuver,
        cfg.noise,
        runs=runs,
        sim_cfg=cfg.sim,
        ref_speed=cfg.ref_speed,
        start_offset=cfg.eval_start_offset,
        duration=cfg.eval_duration,
        keep_logs=True,
    )

    from . import plots

    noise_tag = "noise_on" if cfg.noise.enabled else "noise_off"
    stem = f"eval_{maneuver.value}_{noise_tag}"
    meta = {"base_seed": base_seed, "maneuver": maneuver.value, "noise": noise_tag}
    write_mse_report_csv([report], dirs["reports"] / f"{stem}.csv", meta)
    write_mse_report_json([report], dirs["reports"] / f"{stem}.json", meta)
    path = maneuver_path(maneuver)
    assert report.logs is not None
    for i, log in enumerate(report.logs):
        log.to_csv(dirs["trajectories"] / f"{stem}_run{i}.csv", {**meta, "run": i})
    plots.save_trajectory(
        report.logs[0], path, dirs["trajectories"] / f"{stem}.png", title=stem
    )
    print(f"{stem}: reported MSE {report.reported_mse:.6g} over {report.runs} runs")
    return 0


def _circuit_schedule(cfg: RunConfig, args: argparse.Namespace) -> GainSchedule:
    schedule = cfg.schedule
    if args.gains is not None:
        everywhere = _parse_gains(args.gains)
        schedule = GainSchedule(
            entries={m: everywhere for m in (Maneuver.LANE_CHANGE, Maneuver.ROUNDABOUT)},
            default=everywhere,
        )
    return schedule


def cmd_circuit(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    base_seed = _apply_common_overrides(cfg, args)
    dirs = _out_dirs(args.out)

    if cfg.circuit_csv is not None:
        path = ReferencePath.from_csv(cfg.circuit_csv)
        zones = cfg.zones or []
        circuit = (path, zones)
    else:
        circuit = make_full_circuit()
        if cfg.zones is not None:
            circuit = (circuit[0], cfg.zones)

    monitor = None
    if args.monitor_curve is not None:
        with open(args.monitor_curve) as handle:
            curve = [float(line) for line in handle if line.strip()]
        monitor = RewardMonitor(curve, cfg.monitor_window, cfg.monitor_threshold)

    log, report = run_circuit(
        _circuit_schedule(cfg, args),
        cfg.limit,
        cfg.noise,
        sim_cfg=cfg.sim,
        ref_speed=cfg.circuit_ref_speed,
        monitor=monitor,
        circuit=circuit,
    )

    from . import plots

    noise_tag = "noise_on" if cfg.noise.enabled else "noise_off"
    stem = f"circuit_{noise_tag}"
    meta = {"base_seed": base_seed, "noise": noise_tag}
    log.to_csv(dirs["trajectories"] / f"{stem}.csv", meta)
    log.to_json(dirs["trajectories"] / f"{stem}.json", meta)
    write_mse_report_csv([report], dirs["reports"] / f"{stem}.csv", meta)
    plots.save_trajectory(log, circuit[0], dirs["trajectories"] / f"{stem}.png",
                          zones=circuit[1], title=stem)
    status = f", monitor {log.monitor_status}" if log.monitor_status else ""
    print(f"{stem}: outcome {log.outcome.value}, MSE {report.reported_mse:.6g}{status}")
    return 0 if log.outcome is not Outcome.COLLISION else 1


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    base_seed = _apply_common_overrides(cfg, args)
    maneuver = _parse_maneuver(args.maneuver)
    dirs = _out_dirs(args.out)

    gain_sets: list[GainSet] = []
    with open(args.gains_file) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                gain_sets.append(_parse_gains(line))
            except (ValueError, ControlInputError) as exc:
                print(f"warning: {args.gains_file}:{lineno}: skipped ({exc})", file=sys.stderr)
    if not gain_sets:
        print(f"error: no usable gain sets in {args.gains_file}", file=sys.stderr)
        return 2

    runs = args.runs if args.runs is not None else cfg.eval_runs
    entries = grid_compare(
        gain_sets,
        maneuver,
        runs=runs,
        base_seed=base_seed,
        duration=cfg.eval_duration,
        sim_cfg=cfg.sim,
    )

    from . import plots

    stem = f"comparison_{maneuver.value}"
    meta = {"base_seed": base_seed, "maneuver": maneuver.value}
    write_comparison_csv(entries, dirs["reports"] / f"{stem}.csv", meta)
    plots.save_comparison(entries, dirs["reports"] / f"{stem}.png", title=stem)
    best = entries[0]
    print(f"{stem}: best noise-off MSE {best.report_off.reported_mse:.6g} from gains "
          f"({best.gains.kv:g}, {best.gains.kl:g}, {best.gains.ks:g}, {best.gains.ki:g})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracktuner",
        description="Train, evaluate, and compare tracking-controller gains on a desk-scale simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="run config file (sectioned key-value)")
        p.add_argument("--seed", type=int, default=None, help="base seed override")
        p.add_argument("--out", default="out", help="output directory (default: out)")

    p_train = sub.add_parser("train", help="run the Q-learning gain tuner")
    common(p_train)
    p_train.add_argument("--maneuver", required=True, help="lane-change or roundabout")
    p_train.add_argument("--episodes", type=int, default=None, help="episode count override")
    p_train.add_argument(
        "--alphas", default=None,
        help="comma-separated learning rates (default: 0.1,0.3,0.5,0.7,0.9)",
    )
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="run the MSE protocol for one gain set")
    common(p_eval)
    p_eval.add_argument("--maneuver", required=True, help="lane-change or roundabout")
    p_eval.add_argument("--gains", required=True, help="kv,kl,ks,ki")
    p_eval.add_argument("--noise", action="store_true", help="enable odometry noise")
    p_eval.add_argument("--runs", type=int, default=None, help="number of runs (default: 10)")
    p_eval.set_defaults(func=cmd_eval)

    p_circuit = sub.add_parser("circuit", help="drive the full circuit under the supervisor")
    common(p_circuit)
    p_circuit.add_argument("--noise", action="store_true", help="enable odometry noise")
    p_circuit.add_argument("--gains", default=None, help="override every zone with one gain set")
    p_circuit.add_argument(
        "--monitor-curve", default=None,
        help="file with one training reward sum per line, enables the advisory monitor",
    )
    p_circuit.set_defaults(func=cmd_circuit)

    p_compare = sub.add_parser("compare", help="rank gain sets from a file by MSE")
    common(p_compare)
    p_compare.add_argument("--maneuver", required=True, help="lane-change or roundabout")
    p_compare.add_argument("--gains-file", required=True, help="one kv,kl,ks,ki per line")
    p_compare.add_argument("--runs", type=int, default=None, help="runs per setting (default: 10)")
    p_compare.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ControlInputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
