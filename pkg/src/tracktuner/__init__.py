"""Desk-scale path tracking: a four-gain trajectory controller, a zone-based
supervisor, and a Q-learning gain tuner, all running on a deterministic
kinematic simulator."""

from .config import (
    PAPERLIKE_LANE_GAINS,
    PAPERLIKE_ROUNDABOUT_GAINS,
    ConfigError,
    RunConfig,
    load_run_config,
)
from .controller import (
    BodyError,
    ControlCommand,
    ControlInputError,
    ControllerState,
    GainSet,
    WorldError,
    body_error,
    control_step,
    world_error,
)
from .evaluation import (
    ComparisonEntry,
    MseReport,
    eval_duration,
    evaluate_gains,
    grid_compare,
    run_circuit,
    trajectory_mse,
    write_comparison_csv,
    write_mse_report_csv,
    write_mse_report_json,
)
from .geometry import Pose, wrap_angle
from .paths import (
    CircleRegion,
    LookaheadPolicy,
    LookaheadProgress,
    Maneuver,
    PathPoint,
    RectRegion,
    ReferencePath,
    TimedProgress,
    Zone,
    make_full_circuit,
    make_lane_change_path,
    make_roundabout_path,
    maneuver_path,
    reference_pose,
    zone_of,
    zones_disjoint,
)
from .sim import (
    NoiseModel,
    Outcome,
    SimConfig,
    SimulationError,
    TrajectoryLog,
    VehicleState,
    read_odometry,
    run_simulation,
    start_state,
    step_vehicle,
)
from .supervisor import (
    GainSchedule,
    MonitorStatus,
    RewardMonitor,
    SpeedLimit,
    Supervisor,
    enforce_speed_limit,
    monitor_reward,
    select_gains,
)
from .tuner import (
    EpisodeResult,
    ErrorState,
    StateBin,
    TerminalRecord,
    TrainingConfig,
    TrainingError,
    apply_action,
    decode_action,
    discretize,
    encode_action,
    epsilon_greedy,
    load_q_table,
    most_frequent_terminal_gains,
    new_q_table,
    q_update,
    reward,
    save_q_table,
    train,
    weighted_distance,
)

__version__ = "0.1.0"

__all__ = [
    "BodyError",
    "CircleRegion",
    "ComparisonEntry",
    "ConfigError",
    "ControlCommand",
    "ControlInputError",
    "ControllerState",
    "EpisodeResult",
    "ErrorState",
    "GainSchedule",
    "GainSet",
    "LookaheadPolicy",
    "LookaheadProgress",
    "Maneuver",
    "MonitorStatus",
    "MseReport",
    "NoiseModel",
    "Outcome",
    "PAPERLIKE_LANE_GAINS",
    "PAPERLIKE_ROUNDABOUT_GAINS",
    "PathPoint",
    "Pose",
    "RectRegion",
    "ReferencePath",
    "RewardMonitor",
    "RunConfig",
    "SimConfig",
    "SimulationError",
    "SpeedLimit",
    "StateBin",
    "Supervisor",
    "TerminalRecord",
    "TimedProgress",
    "TrainingConfig",
    "TrainingError",
    "TrajectoryLog",
    "VehicleState",
    "WorldError",
    "Zone",
    "apply_action",
    "body_error",
    "control_step",
    "decode_action",
    "discretize",
    "encode_action",
    "enforce_speed_limit",
    "epsilon_greedy",
    "eval_duration",
    "evaluate_gains",
    "grid_compare",
    "load_q_table",
    "load_run_config",
    "make_full_circuit",
    "make_lane_change_path",
    "make_roundabout_path",
    "maneuver_path",
    "monitor_reward",
    "most_frequent_terminal_gains",
    "new_q_table",
    "q_update",
    "read_odometry",
    "reference_pose",
    "reward",
    "run_circuit",
    "run_simulation",
    "save_q_table",
    "select_gains",
    "start_state",
    "step_vehicle",
    "train",
    "trajectory_mse",
    "weighted_distance",
    "world_error",
    "wrap_angle",
    "zone_of",
    "zones_disjoint",
]
