"""Domain types for the toy top-down driving world."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from drivesal.errors import SessionFormatError

CAR_WIDTH = 1.8

OBSTACLE_CATEGORIES = ("building", "roadside-object", "parked-car")


@dataclass(frozen=True)
class WorldConfig:
    """Physical and controller constants; all SI unless noted."""

    wheelbase: float = 2.5
    max_steer_rad: float = 0.5
    max_accel: float = 4.0
    max_brake: float = 8.0
    drag: float = 0.4
    cruise_speed: float = 9.5
    lateral_accel: float = 2.0
    # rendering: pixels per meter at the reference 227-px frame edge
    pixels_per_meter: float = 5.0
    edge_band_m: float = 0.45
    # oracle
    steer_lookahead_base: float = 2.5
    steer_lookahead_gain: float = 0.9
    steer_lookahead_max: float = 11.0
    speed_deadband: float = 0.4
    throttle_gain: float = 0.5
    brake_gain: float = 0.25
    # synthetic gaze
    gaze_lookahead_gain: float = 2.2
    gaze_lookahead_min: float = 6.0
    gaze_lookahead_max: float = 30.0
    gaze_noise_px: float = 5.0
    saccade_prob: float = 0.1
    # per-frame action dither in closed-loop data collection
    steer_dither: float = 0.015
    throttle_dither: float = 0.01

    @property
    def top_speed(self) -> float:
        """Terminal speed under full throttle (drag-limited)."""
        return self.max_accel / self.drag

    def to_dict(self):
        return asdict(self)


DEFAULT_WORLD = WorldConfig()

REFERENCE_FRAME_EDGE = 227


def normalize_heading(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    r = math.fmod(theta, 2.0 * math.pi)
    if r <= -math.pi:
        r += 2.0 * math.pi
    elif r > math.pi:
        r -= 2.0 * math.pi
    return r


@dataclass(frozen=True)
class DrivingAction:
    """Control triple; fields are clamped into range on construction."""

    steering: float
    throttle: float
    brake: float

    def __post_init__(self):
        object.__setattr__(self, "steering", float(min(1.0, max(-1.0, self.steering))))
        object.__setattr__(self, "throttle", float(min(1.0, max(0.0, self.throttle))))
        object.__setattr__(self, "brake", float(min(1.0, max(0.0, self.brake))))

    def as_vector(self):
        return np.array([self.steering, self.throttle, self.brake], dtype=np.float64)


@dataclass
class CarState:
    x: float
    y: float
    heading: float
    speed: float

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        self.heading = normalize_heading(float(self.heading))
        self.x = float(self.x)
        self.y = float(self.y)
        self.speed = float(self.speed)

    @property
    def position(self):
        return np.array([self.x, self.y], dtype=np.float64)

    @property
    def forward(self):
        """Unit travel direction (world x east, y south)."""
        return np.array([math.cos(self.heading), math.sin(self.heading)])

    @property
    def rightward(self):
        """Unit vector to the car's right; positive steering turns this way."""
        return np.array([-math.sin(self.heading), math.cos(self.heading)])


@dataclass(frozen=True)
class Obstacle:
    category: str
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.category not in OBSTACLE_CATEGORIES:
            raise ValueError(f"unknown obstacle category {self.category!r}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("obstacle rectangle has non-positive extent")

    @property
    def center(self):
        return np.array([(self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0])


class TrackSpec:
    """Closed centerline loop with a road half-width and static obstacles.

    Segment geometry (lengths, cumulative stations) is precomputed; the
    rasterized distance field used by the renderer is built lazily.
    """

    def __init__(self, waypoints, half_width, obstacles=()):
        pts = np.asarray(waypoints, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
            raise ValueError(f"waypoints must be (N>=4, 2), got {pts.shape}")
        if not np.allclose(pts[0], pts[-1], atol=1e-9):
            raise ValueError("waypoint loop must be closed (first == last)")
        seg_vec = pts[1:] - pts[:-1]
        seg_len = np.linalg.norm(seg_vec, axis=1)
        if (seg_len < 1e-9).any():
            raise ValueError("consecutive waypoints must be distinct")
        if half_width <= CAR_WIDTH / 2.0:
            raise ValueError(f"half_width must exceed {CAR_WIDTH / 2.0}, got {half_width}")
        self.waypoints = pts
        self.half_width = float(half_width)
        self.obstacles = tuple(obstacles)
        self.segment_lengths = seg_len
        self.cum_lengths = np.concatenate([[0.0], np.cumsum(seg_len)])
        self.total_length = float(self.cum_lengths[-1])
        self._distance_field = None


@dataclass(frozen=True)
class GazeSample:
    t_ms: int
    x: float
    y: float


@dataclass
class Frame:
    width: int
    height: int
    rgb: np.ndarray
    t_ms: int

    def __post_init__(self):
        if self.width != self.height:
            raise ValueError(f"frames must be square, got {self.width}x{self.height}")
        if self.rgb.shape != (self.height, self.width, 3):
            raise ValueError(f"rgb shape {self.rgb.shape} does not match {self.width}")


@dataclass
class SessionMeta:
    resolution: int
    frame_rate_hz: float
    gaze_rate_hz: float
    source: str
    seed: int
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in ("oracle", "human"):
            raise ValueError(f"source must be oracle|human, got {self.source!r}")


@dataclass
class SessionLog:
    """A completed run: per-frame timestamps/actions plus the gaze stream.

    Pixel data is optional; long sessions stream frames to disk instead of
    holding them here.
    """

    meta: SessionMeta
    frame_times: list
    gaze: list
    actions: list
    frames: list | None = None


def validate_session(log: SessionLog) -> None:
    """Check SessionLog invariants; raise SessionFormatError on violation."""
    if log.meta.gaze_rate_hz < log.meta.frame_rate_hz:
        raise SessionFormatError("gaze rate must be >= frame rate")
    if len(log.actions) != len(log.frame_times):
        raise SessionFormatError(
            f"{len(log.actions)} actions for {len(log.frame_times)} frames")
    for name, times in (("frame", log.frame_times), ("gaze", [g.t_ms for g in log.gaze])):
        for a, b in zip(times, times[1:]):
            if b <= a:
                raise SessionFormatError(f"{name} timestamps not strictly increasing: {a} -> {b}")
    w = log.meta.resolution
    for g in log.gaze:
        if not (0 <= g.x < w and 0 <= g.y < w):
            raise SessionFormatError(f"gaze ({g.x}, {g.y}) outside {w}x{w} frame")
    if log.frames is not None and len(log.frames) != len(log.frame_times):
        raise SessionFormatError("frame pixel list does not match frame index")
