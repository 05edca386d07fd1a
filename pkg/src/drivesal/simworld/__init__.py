"""Toy top-down driving world: dynamics, rendering, oracle driver, gaze."""

from drivesal.simworld.dynamics import step_dynamics
from drivesal.simworld.gaze import gaze_anchor_point, synth_gaze
from drivesal.simworld.oracle import lookahead_point, oracle_action, target_speed
from drivesal.simworld.render import (
    frame_to_uint8,
    pixel_to_world,
    render_frame,
    world_to_pixel,
)
from drivesal.simworld.session import (
    SessionWriter,
    load_frame,
    load_session,
    run_session,
    save_session,
    start_state,
)
from drivesal.simworld.track import (
    build_default_track,
    track_from_name,
    curvature_at,
    distance_to_centerline,
    nearest_station,
    point_at,
    tangent_at,
)
from drivesal.simworld.types import (
    DEFAULT_WORLD,
    REFERENCE_FRAME_EDGE,
    CarState,
    DrivingAction,
    Frame,
    GazeSample,
    Obstacle,
    SessionLog,
    SessionMeta,
    TrackSpec,
    WorldConfig,
    normalize_heading,
    validate_session,
)

__all__ = [
    "CarState",
    "DEFAULT_WORLD",
    "DrivingAction",
    "Frame",
    "GazeSample",
    "Obstacle",
    "REFERENCE_FRAME_EDGE",
    "SessionLog",
    "SessionMeta",
    "SessionWriter",
    "TrackSpec",
    "WorldConfig",
    "build_default_track",
    "track_from_name",
    "curvature_at",
    "distance_to_centerline",
    "frame_to_uint8",
    "gaze_anchor_point",
    "load_frame",
    "load_session",
    "lookahead_point",
    "nearest_station",
    "normalize_heading",
    "oracle_action",
    "pixel_to_world",
    "point_at",
    "render_frame",
    "run_session",
    "save_session",
    "start_state",
    "step_dynamics",
    "synth_gaze",
    "target_speed",
    "tangent_at",
    "validate_session",
    "world_to_pixel",
]
