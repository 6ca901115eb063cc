"""Figure rendering for run artifacts, saved next to the CSV files."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import ComparisonEntry
from .paths import CircleRegion, RectRegion, ReferencePath, Zone
from .sim import TrajectoryLog
from .tuner import EpisodeResult


def _style() -> None:
    plt.rcParams.update(
        {
            "figure.dpi": 120,
            "axes.grid": True,
            "grid.alpha": 0.3,
            "font.size": 9,
        }
    )


def save_learning_curves(
    curves: Mapping[float, Sequence[EpisodeResult]],
    destination: Union[str, Path],
    title: str = "learning curves",
) -> None:
    """Reward sum per episode, one line per learning rate."""
    _style()
    fig, ax = plt.subplots(figsize=(6, 4))
    for alpha in sorted(curves):
        results = curves[alpha]
        episodes = [r.index + 1 for r in results]
        rewards = [r.reward_sum for r in results]
        ax.plot(episodes, rewards, marker="o", markersize=3, label=f"alpha={alpha:g}")
    ax.set_xlabel("episode")
    ax.set_ylabel("reward sum")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(destination)
    plt.close(fig)


def _draw_zone(ax: plt.Axes, zone: Zone) -> None:
    region = zone.region
    if isinstance(region, RectRegion):
        patch = plt.Rectangle(
            (region.x_min, region.y_min),
            region.x_max - region.x_min,
            region.y_max - region.y_min,
            alpha=0.15,
            label=zone.maneuver.value,
        )
    elif isinstance(region, CircleRegion):
        patch = plt.Circle((region.cx, region.cy), region.radius, alpha=0.15, color="tab:red")
    else:
        return
    ax.add_patch(patch)


def save_trajectory(
    log: TrajectoryLog,
    path: ReferencePath,
    destination: Union[str, Path],
    zones: Sequence[Zone] = (),
    title: str = "trajectory",
) -> None:
    """Reference path and driven trajectory, plus speed and steering traces."""
    _style()
    fig, (ax_xy, ax_v, ax_phi) = plt.subplots(
        3, 1, figsize=(6.5, 8), gridspec_kw={"height_ratios": [3, 1, 1]}
    )
    for zone in zones:
        _draw_zone(ax_xy, zone)
    ax_xy.plot(path.xs, path.ys, "k--", linewidth=1, label="reference")
    if log.samples:
        xs = np.array([s.x for s in log.samples])
        ys = np.array([s.y for s in log.samples])
        ax_xy.plot(xs, ys, "tab:blue", linewidth=1.2, label="vehicle")
    ax_xy.set_xlabel("x (m)")
    ax_xy.set_ylabel("y (m)")
    ax_xy.set_aspect("equal", adjustable="datalim")
    ax_xy.legend(loc="best")
    ax_xy.set_title(f"{title} ({log.outcome.value})")

    ts = [s.t for s in log.samples]
    ax_v.plot(ts, [s.v for s in log.samples], "tab:green", linewidth=1)
    ax_v.set_ylabel("v cmd (m/s)")
    ax_phi.plot(ts, [s.phi for s in log.samples], "tab:orange", linewidth=1)
    ax_phi.set_ylabel("phi (rad)")
    ax_phi.set_xlabel("t (s)")
    fig.tight_layout()
    fig.savefig(destination)
    plt.close(fig)


def save_comparison(
    entries: Sequence[ComparisonEntry],
    destination: Union[str, Path],
    title: str = "gain comparison",
) -> None:
    """Reported MSE per gain set, noise off vs on; log scale spans the spread."""
    _style()
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(entries)), 4))
    idx = np.arange(len(entries))
    off = [e.report_off.reported_mse for e in entries]
    on = [e.report_on.reported_mse for e in entries]
    width = 0.38
    ax.bar(idx - width / 2, off, width, label="noise off")
    ax.bar(idx + width / 2, on, width, label="noise on")
    labels = [
        "({:g}, {:g}, {:g}, {:g})".format(*e.gains.as_tuple()) for e in entries
    ]
    ax.set_xticks(idx)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=7)
    ax.set_yscale("log")
    ax.set_ylabel("reported MSE (m^2)")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(destination)
    plt.close(fig)
