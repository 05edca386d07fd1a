"""Driver-centric top-down renderer.

The car sits exactly at the bottom-center pixel and the view is rotated so
the heading points up. Road/edge/off-road classification samples a
precomputed distance-to-centerline grid, so per-frame cost is independent
of track complexity. Lane markings live outside the pavement band, which
makes "on the road implies road-colored pixel underfoot" true by
construction.
"""

from __future__ import annotations

import numpy as np

from drivesal.simworld.types import (
    DEFAULT_WORLD,
    REFERENCE_FRAME_EDGE,
    CarState,
    Frame,
    TrackSpec,
    WorldConfig,
)


def _c(r, g, b):
    return np.array([r, g, b], dtype=np.float32) / np.float32(255.0)


COLOR_GRASS = _c(60, 96, 56)
COLOR_ROAD = _c(90, 90, 92)
COLOR_EDGE = _c(218, 218, 222)
COLOR_BAR_BG = _c(30, 30, 34)
COLOR_BAR_FILL = _c(240, 240, 245)
OBSTACLE_COLORS = {
    "building": _c(120, 72, 60),
    "roadside-object": _c(210, 140, 40),
    "parked-car": _c(50, 80, 160),
}

GRID_STEP = 0.25
GRID_MARGIN = 56.0


class DistanceField:
    """Distance to the centerline, rasterized over the track's bounding box."""

    def __init__(self, track: TrackSpec):
        lo = track.waypoints.min(axis=0) - GRID_MARGIN
        hi = track.waypoints.max(axis=0) + GRID_MARGIN
        self.x0, self.y0 = float(lo[0]), float(lo[1])
        self.xs = np.arange(self.x0, hi[0] + GRID_STEP, GRID_STEP)
        self.ys = np.arange(self.y0, hi[1] + GRID_STEP, GRID_STEP)
        gx, gy = np.meshgrid(self.xs.astype(np.float32), self.ys.astype(np.float32))
        px = gx.reshape(-1)
        py = gy.reshape(-1)
        best = np.full(px.shape, np.inf, dtype=np.float32)
        for a, b in zip(track.waypoints[:-1], track.waypoints[1:]):
            ab = (b - a).astype(np.float32)
            denom = max(float(ab @ ab), 1e-18)
            t = np.clip(((px - np.float32(a[0])) * ab[0] + (py - np.float32(a[1])) * ab[1])
                        / np.float32(denom), 0.0, 1.0)
            dx = np.float32(a[0]) + t * ab[0] - px
            dy = np.float32(a[1]) + t * ab[1] - py
            np.minimum(best, dx * dx + dy * dy, out=best)
        self.values = np.sqrt(best).reshape(len(self.ys), len(self.xs))

    def sample(self, wx, wy):
        """Bilinear sample; queries outside the grid clamp to the border."""
        u = np.clip((wx - self.x0) / GRID_STEP, 0.0, len(self.xs) - 1.0)
        v = np.clip((wy - self.y0) / GRID_STEP, 0.0, len(self.ys) - 1.0)
        i0 = np.minimum(v.astype(np.int64), len(self.ys) - 2)
        j0 = np.minimum(u.astype(np.int64), len(self.xs) - 2)
        fv = (v - i0).astype(np.float32)
        fu = (u - j0).astype(np.float32)
        g = self.values
        top = g[i0, j0] * (1 - fu) + g[i0, j0 + 1] * fu
        bot = g[i0 + 1, j0] * (1 - fu) + g[i0 + 1, j0 + 1] * fu
        return top * (1 - fv) + bot * fv


_FIELD_CACHE: dict = {}


def distance_field(track: TrackSpec) -> DistanceField:
    if track._distance_field is None:
        # tracks with identical centerlines share one field across instances
        key = hash(track.waypoints.tobytes())
        if key not in _FIELD_CACHE:
            _FIELD_CACHE[key] = DistanceField(track)
        track._distance_field = _FIELD_CACHE[key]
    return track._distance_field


def pixel_scale(size: int, cfg: WorldConfig = DEFAULT_WORLD) -> float:
    """Pixels per meter, scaled so world extent is resolution-independent."""
    return cfg.pixels_per_meter * size / REFERENCE_FRAME_EDGE


def camera_anchor(size: int):
    """Pixel (cx, cy) that maps to the car's position."""
    return (size - 1) / 2.0, float(size - 1)


def world_to_pixel(state: CarState, size: int, points, cfg: WorldConfig = DEFAULT_WORLD):
    """Project world points into the car-anchored frame (x right, y down)."""
    pts = np.asarray(points, dtype=np.float64)
    rel = pts - state.position
    fwd = rel @ state.forward
    right = rel @ state.rightward
    s = pixel_scale(size, cfg)
    cx, cy = camera_anchor(size)
    return np.stack([cx + s * right, cy - s * fwd], axis=-1)


def pixel_to_world(state: CarState, size: int, px, py, cfg: WorldConfig = DEFAULT_WORLD):
    s = pixel_scale(size, cfg)
    cx, cy = camera_anchor(size)
    right = (np.asarray(px, dtype=np.float64) - cx) / s
    fwd = (cy - np.asarray(py, dtype=np.float64)) / s
    wx = state.x + fwd * state.forward[0] + right * state.rightward[0]
    wy = state.y + fwd * state.forward[1] + right * state.rightward[1]
    return wx, wy


def render_frame(track: TrackSpec, state: CarState, t_ms: int, size: int = REFERENCE_FRAME_EDGE,
                 cfg: WorldConfig = DEFAULT_WORLD) -> Frame:
    u = np.arange(size, dtype=np.float64)
    wx, wy = pixel_to_world(state, size, u[None, :], u[:, None], cfg)
    dist = distance_field(track).sample(wx, wy)

    rgb = np.empty((size, size, 3), dtype=np.float32)
    rgb[:] = COLOR_GRASS
    rgb[dist <= track.half_width + cfg.edge_band_m] = COLOR_EDGE
    rgb[dist <= track.half_width] = COLOR_ROAD

    for obs in track.obstacles:
        inside = (wx >= obs.x_min) & (wx <= obs.x_max) & (wy >= obs.y_min) & (wy <= obs.y_max)
        rgb[inside] = OBSTACLE_COLORS[obs.category]

    _draw_speed_bar(rgb, state.speed, cfg)
    return Frame(width=size, height=size, rgb=rgb, t_ms=int(t_ms))


def _draw_speed_bar(rgb, speed, cfg):
    """Symmetric speed readout: without it, throttle/brake labels would be
    unlearnable from a single still frame."""
    size = rgb.shape[0]
    bar_h = max(2, int(round(4 * size / REFERENCE_FRAME_EDGE)))
    rows = slice(2, 2 + bar_h)
    rgb[rows, :] = COLOR_BAR_BG
    frac = min(1.0, max(0.0, speed / cfg.top_speed))
    half = frac * (size / 2.0 - 6.0)
    cx = (size - 1) / 2.0
    cols = np.abs(np.arange(size) - cx) <= half
    rgb[rows, cols] = COLOR_BAR_FILL


def frame_to_uint8(frame: Frame) -> np.ndarray:
    return np.clip(np.round(frame.rgb * 255.0), 0, 255).astype(np.uint8)
