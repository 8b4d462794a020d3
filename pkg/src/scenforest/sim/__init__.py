"""Deterministic, seeded microscopic highway traffic simulation."""

from .config import (
    GRAVITY,
    MAX_DECEL,
    MAX_STEER,
    VEHICLE_LENGTH,
    VEHICLE_WIDTH,
    WHEELBASE,
    BehaviorProfile,
    RoadConfig,
    SimConfigError,
    SimParams,
    VehicleState,
)
from .dynamics import (
    braking_decel,
    follower_accel,
    gompertz_follower_accel,
    gompertz_leader_accel,
    lateral_accel,
    lateral_control,
    one_track_step,
    regulate_speed,
)
from .engine import (
    LaneChangeState,
    Trace,
    init_scene,
    lane_change_decision,
    run_scene,
    run_simulation,
)
from .io import load_trace, meta_path, save_trace

__all__ = [
    "GRAVITY",
    "MAX_DECEL",
    "MAX_STEER",
    "VEHICLE_LENGTH",
    "VEHICLE_WIDTH",
    "WHEELBASE",
    "BehaviorProfile",
    "RoadConfig",
    "SimConfigError",
    "SimParams",
    "VehicleState",
    "braking_decel",
    "follower_accel",
    "gompertz_follower_accel",
    "gompertz_leader_accel",
    "lateral_accel",
    "lateral_control",
    "one_track_step",
    "regulate_speed",
    "LaneChangeState",
    "Trace",
    "init_scene",
    "lane_change_decision",
    "run_scene",
    "run_simulation",
    "load_trace",
    "meta_path",
    "save_trace",
]
