"""Tabular Q-learning gain tuner.

The agent's state is the discretized pair of run-averaged error magnitudes
(lateral, heading), an action nudges each of the four controller gains down,
nowhere, or up by one step, and an episode ends as soon as a run lands closer
to the zero-error state than any run before it. Gains whose terminal value
stops moving get locked for the rest of the training, shrinking the search
space as the tuner converges.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .controller import GainSet
from .paths import Maneuver, ReferencePath, TimedProgress, maneuver_path
from .sim import NoiseModel, Outcome, SimConfig, run_simulation, start_state

NUM_BINS = 40
NUM_ACTIONS = 81  # 3 choices for each of the 4 gains
NULL_ACTION = 40  # the (0, 0, 0, 0) adjustment
THETA_WEIGHT = 10.0  # heading term weight inside the state distance
GAIN_DECIMALS = 9  # canonical grid so exact-equality locking is float-safe


class TrainingError(RuntimeError):
    """Raised when a training run produces unusable values."""


@dataclass(frozen=True, slots=True)
class ErrorState:
    """Run-averaged absolute lateral and heading errors."""

    ey: float  # mean |lateral error| (m)
    etheta: float  # mean |heading error| (rad)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.ey) and math.isfinite(self.etheta)):
            raise ValueError(f"error components must be finite, got {self!r}")
        if self.ey < 0.0 or self.etheta < 0.0:
            raise ValueError(f"error components must be >= 0, got {self!r}")


@dataclass(frozen=True, slots=True)
class StateBin:
    iy: int
    itheta: int

    def __post_init__(self) -> None:
        for v in (self.iy, self.itheta):
            if not 0 <= v < NUM_BINS:
                raise ValueError(f"bin index out of range: {self!r}")


def _bin_one(value: float, low: float, high: float) -> int:
    if low >= high:
        raise ValueError(f"bin range must satisfy low < high, got [{low!r}, {high!r}]")
    i = int(math.floor(NUM_BINS * (value - low) / (high - low)))
    if i < 0:
        return 0
    if i >= NUM_BINS:
        return NUM_BINS - 1
    return i


def discretize(
    errors: ErrorState, e_low: tuple[float, float], e_high: tuple[float, float]
) -> StateBin:
    """Map an error pair onto the 40x40 state grid; out-of-range values clamp to the edge bins."""
    return StateBin(
        _bin_one(errors.ey, e_low[0], e_high[0]),
        _bin_one(errors.etheta, e_low[1], e_high[1]),
    )


def decode_action(index: int) -> tuple[int, int, int, int]:
    """Base-3 decode of an action index into per-gain adjustments from {-1, 0, +1}."""
    if not 0 <= index < NUM_ACTIONS:
        raise ValueError(f"action index must lie in [0, {NUM_ACTIONS}), got {index!r}")
    return (
        index // 27 % 3 - 1,
        index // 9 % 3 - 1,
        index // 3 % 3 - 1,
        index % 3 - 1,
    )


def encode_action(adjustments: Sequence[int]) -> int:
    if len(adjustments) != 4 or any(a not in (-1, 0, 1) for a in adjustments):
        raise ValueError(f"adjustments must be four values from {{-1, 0, 1}}, got {adjustments!r}")
    a0, a1, a2, a3 = adjustments
    return (a0 + 1) * 27 + (a1 + 1) * 9 + (a2 + 1) * 3 + (a3 + 1)


def apply_action(
    gains: GainSet,
    adjustments: Sequence[int],
    h_consts: Sequence[float],
    k_min: GainSet,
    k_max: GainSet,
    locked: Sequence[bool] = (False, False, False, False),
) -> GainSet:
    """Nudge each unlocked gain by its step size, clamped to the search range."""
    new = []
    for g, a, h, lo, hi, lk in zip(
        gains.as_tuple(), adjustments, h_consts, k_min.as_tuple(), k_max.as_tuple(), locked
    ):
        if lk:
            new.append(g)
            continue
        v = g + h * a
        if v < lo:
            v = lo
        elif v > hi:
            v = hi
        new.append(round(v, GAIN_DECIMALS))
    return GainSet(*new)


def weighted_distance(errors: ErrorState) -> float:
    """Distance from the zero-error state, with the heading term upweighted."""
    return math.sqrt(errors.ey * errors.ey + THETA_WEIGHT * errors.etheta * errors.etheta)


def reward(d_new: float, d_old: float, collided: bool = False, penalty: float = 1.0) -> float:
    """Positive when the new state sits closer to zero error than the old one."""
    if d_new < 0.0 or d_old < 0.0:
        raise ValueError("distances must be >= 0")
    r = 1.0 / (1.0 + d_new) - 1.0 / (1.0 + d_old)
    if collided:
        r -= penalty
    return r


QTable = np.ndarray


def new_q_table() -> QTable:
    return np.zeros((NUM_BINS, NUM_BINS, NUM_ACTIONS))


def q_update(
    q: QTable,
    state: StateBin,
    action: int,
    r: float,
    next_state: StateBin,
    alpha: float,
    gamma: float,
) -> QTable:
    """One-step Q-learning update, in place; only the (state, action) entry changes."""
    current = q[state.iy, state.itheta, action]
    target = r + gamma * float(np.max(q[next_state.iy, next_state.itheta]))
    q[state.iy, state.itheta, action] = current + alpha * (target - current)
    return q


def epsilon_greedy(q: QTable, state: StateBin, epsilon: float, rng: np.random.Generator) -> int:
    """Pick a random action with probability epsilon, else the greedy one.

    When the do-nothing action ties the row maximum it wins the tie; an
    unvisited row must hold the gains rather than drag them all downward.
    Other ties resolve to the smallest action index.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon!r}")
    if rng.random() < epsilon:
        return int(rng.integers(NUM_ACTIONS))
    row = q[state.iy, state.itheta]
    best = float(np.max(row))
    if row[NULL_ACTION] == best:
        return NULL_ACTION
    return int(np.argmax(row))


def save_q_table(q: QTable, destination: Union[str, Path]) -> None:
    """Text snapshot: a dimensions header line, then values in row-major order."""
    with open(destination, "w") as handle:
        handle.write(" ".join(str(d) for d in q.shape) + "\n")
        for value in q.ravel():
            handle.write(f"{value:.12g}\n")


def load_q_table(source: Union[str, Path]) -> QTable:
    with open(source) as handle:
        dims = tuple(int(tok) for tok in handle.readline().split())
        values = np.loadtxt(handle)
    if int(np.prod(dims)) != values.size:
        raise ValueError(f"{source}: header {dims} does not match {values.size} values")
    return values.reshape(dims)


# --- training ---------------------------------------------------------------


@dataclass
class TrainingConfig:
    """Everything one training needs; defaults come from `for_maneuver`."""

    maneuver: Maneuver
    loop_time: float  # duration of each training run (s)
    e_high: tuple[float, float]
    k_min: GainSet
    k_max: GainSet
    h_consts: tuple[float, float, float, float]
    episodes: int
    step_limit: int
    e_low: tuple[float, float] = (0.0, 0.0)
    gamma: float = 0.9
    alpha: float = 0.5
    epsilon_start: float = 1.0
    epsilon_decay: float | None = None  # None: reach zero halfway through the episodes
    collision_penalty: float = 1.0
    seed: int = 0
    start_offset: float = 1.0  # initial lateral offset of each run (m)
    ref_speed: float = 4.0  # arc-length progress speed of the reference (m/s)

    def resolved_epsilon_decay(self) -> float:
        if self.epsilon_decay is not None:
            return self.epsilon_decay
        return 1.0 / (self.episodes / 2.0)

    def validate(self) -> None:
        if self.loop_time <= 0.0:
            raise ValueError(f"loop_time must be positive, got {self.loop_time!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not 0.0 <= self.epsilon_start <= 1.0:
            raise ValueError(f"epsilon_start must lie in [0, 1], got {self.epsilon_start!r}")
        if self.episodes < 1 or self.step_limit < 1:
            raise ValueError("episodes and step_limit must be >= 1")
        if self.resolved_epsilon_decay() < 0.0:
            raise ValueError("epsilon_decay must be >= 0")
        for lo, hi, label in zip(self.e_low, self.e_high, ("lateral", "heading")):
            if not lo < hi:
                raise ValueError(f"{label} error range must satisfy low < high, got [{lo!r}, {hi!r}]")
        for lo, hi in zip(self.k_min.as_tuple(), self.k_max.as_tuple()):
            if lo > hi:
                raise ValueError(f"gain range must satisfy k_min <= k_max, got [{lo!r}, {hi!r}]")
        if any(h <= 0.0 for h in self.h_consts):
            raise ValueError(f"gain step sizes must be positive, got {self.h_consts!r}")
        if self.collision_penalty < 0.0:
            raise ValueError("collision_penalty must be >= 0")
        if self.start_offset < 0.0:
            raise ValueError("start_offset must be >= 0")
        if self.ref_speed <= 0.0:
            raise ValueError("ref_speed must be positive")

    @classmethod
    def for_maneuver(cls, maneuver: Maneuver, **overrides: object) -> "TrainingConfig":
        if maneuver is Maneuver.LANE_CHANGE:
            base = dict(
                maneuver=maneuver,
                loop_time=5.0,
                e_high=(3.0, 0.4),
                k_min=GainSet(0.1, 1.0, 1.0, 0.7),
                k_max=GainSet(3.0, 21.0, 21.0, 0.98),
                h_consts=(0.58, 5.0, 5.0, 0.07),
                episodes=30,
                step_limit=130,
            )
        elif maneuver is Maneuver.ROUNDABOUT:
            base = dict(
                maneuver=maneuver,
                loop_time=30.0,
                e_high=(1.0, 0.1),
                k_min=GainSet(1.0, 1.0, 1.0, 0.7),
                k_max=GainSet(5.8, 21.0, 21.0, 0.98),
                h_consts=(1.2, 5.0, 5.0, 0.07),
                episodes=20,
                step_limit=100,
            )
        else:
            raise ValueError(f"no training defaults for {maneuver!r}")
        base.update(overrides)
        return cls(**base)  # type: ignore[arg-type]


@dataclass
class TerminalTracker:
    """Best distance so far plus the recent terminal gain sets and lock flags."""

    best_distance: float = math.inf
    recent: deque[GainSet] = field(default_factory=lambda: deque(maxlen=5))
    locked: list[bool] = field(default_factory=lambda: [False, False, False, False])
    locked_values: list[float | None] = field(default_factory=lambda: [None, None, None, None])

    def record(self, gains: GainSet, distance: float) -> None:
        self.best_distance = distance
        self.recent.append(gains)

    def evaluate_locks(self) -> None:
        """Lock any gain that held one value across the last five terminal sets."""
        if len(self.recent) < 5:
            return
        for j in range(4):
            if self.locked[j]:
                continue
            values = {g.as_tuple()[j] for g in self.recent}
            if len(values) == 1:
                self.locked[j] = True
                self.locked_values[j] = values.pop()


@dataclass(frozen=True, slots=True)
class TerminalRecord:
    episode: int
    gains: GainSet
    distance: float


@dataclass(frozen=True, slots=True)
class EpisodeResult:
    index: int
    reward_sum: float
    steps: int
    terminal_gains: GainSet | None  # None when the step limit cut the episode
    final_error: ErrorState


def initial_gains(cfg: TrainingConfig, tracker: TerminalTracker | None = None) -> GainSet:
    """Episode-start gains: the midpoint of each range, overridden by locks."""
    values = []
    for j, (lo, hi) in enumerate(zip(cfg.k_min.as_tuple(), cfg.k_max.as_tuple())):
        if tracker is not None and tracker.locked[j]:
            values.append(tracker.locked_values[j])
        else:
            values.append(round((lo + hi) / 2.0, GAIN_DECIMALS))
    return GainSet(*values)


def run_step(
    gains: GainSet,
    cfg: TrainingConfig,
    sim_cfg: SimConfig,
    path: ReferencePath,
) -> tuple[ErrorState, bool]:
    """One training run: simulate loop_time seconds and average the error magnitudes."""
    log = run_simulation(
        sim_cfg,
        gains,
        path,
        NoiseModel(enabled=False),
        cfg.loop_time,
        reference=TimedProgress(cfg.ref_speed),
        start=start_state(path, cfg.start_offset),
    )
    if not log.samples:
        raise TrainingError("training run produced no samples")
    ey = math.fsum(abs(s.bey) for s in log.samples) / len(log.samples)
    etheta = math.fsum(abs(s.betheta) for s in log.samples) / len(log.samples)
    return ErrorState(ey, etheta), log.outcome is Outcome.COLLISION


def train(
    cfg: TrainingConfig,
    sim_cfg: SimConfig | None = None,
    path: ReferencePath | None = None,
) -> tuple[QTable, list[EpisodeResult], list[TerminalRecord]]:
    """Run the full training.

    Each episode resets the gains to the range midpoints (locked gains keep
    their value), seeds the state with one run, then alternates action
    selection, gain adjustment, a fresh run, and a Q update. The episode
    ends as soon as a run lands closer to zero error than every run in the
    whole training so far, or at the step limit. Exploration decays after
    every episode and locks are re-evaluated on the last five terminal
    gain sets.

    Deterministic for a fixed config: the only randomness is the
    epsilon-greedy draw, seeded from cfg.seed.
    """
    cfg.validate()
    if sim_cfg is None:
        sim_cfg = SimConfig(seed=cfg.seed)
    if path is None:
        path = maneuver_path(cfg.maneuver)

    rng = np.random.default_rng(cfg.seed)
    q = new_q_table()
    tracker = TerminalTracker()
    curve: list[EpisodeResult] = []
    history: list[TerminalRecord] = []
    epsilon = cfg.epsilon_start
    decay = cfg.resolved_epsilon_decay()

    for episode in range(cfg.episodes):
        gains = initial_gains(cfg, tracker)
        errors, _ = run_step(gains, cfg, sim_cfg, path)
        state = discretize(errors, cfg.e_low, cfg.e_high)
        d_prev = weighted_distance(errors)

        reward_sum = 0.0
        steps = 0
        terminal: GainSet | None = None
        while steps < cfg.step_limit:
            action = epsilon_greedy(q, state, epsilon, rng)
            gains = apply_action(
                gains, decode_action(action), cfg.h_consts, cfg.k_min, cfg.k_max, tracker.locked
            )
            errors, collided = run_step(gains, cfg, sim_cfg, path)
            d_new = weighted_distance(errors)
            r = reward(d_new, d_prev, collided, cfg.collision_penalty)
            if not math.isfinite(r):
                raise TrainingError(f"non-finite reward at episode {episode}, step {steps}")
            next_state = discretize(errors, cfg.e_low, cfg.e_high)
            q_update(q, state, action, r, next_state, cfg.alpha, cfg.gamma)
            reward_sum += r
            steps += 1
            state = next_state
            d_prev = d_new
            if d_new < tracker.best_distance:
                tracker.record(gains, d_new)
                history.append(TerminalRecord(episode, gains, d_new))
                terminal = gains
                break

        epsilon = max(0.0, epsilon - decay)
        tracker.evaluate_locks()
        curve.append(EpisodeResult(episode, reward_sum, steps, terminal, errors))

    return q, curve, history


def most_frequent_terminal_gains(histories: Iterable[Sequence[TerminalRecord]]) -> GainSet:
    """The modal terminal gain set across several trainings.

    Count ties break toward the set with the lowest total recorded
    distance, then toward the componentwise-smallest set.
    """
    counts: dict[GainSet, int] = {}
    totals: dict[GainSet, float] = {}
    for history in histories:
        for record in history:
            counts[record.gains] = counts.get(record.gains, 0) + 1
            totals[record.gains] = totals.get(record.gains, 0.0) + record.distance
    if not counts:
        raise ValueError("no terminal gain sets recorded")
    return min(counts, key=lambda g: (-counts[g], totals[g], g.as_tuple()))
