"""Track construction and centerline geometry queries.

All queries work on the waypoint polyline, so they apply to any closed
loop, not just the built-in rounded rectangle.
"""

from __future__ import annotations

import numpy as np

from drivesal.errors import ConfigError
from drivesal.simworld.types import Obstacle, TrackSpec


def _rounded_rect_outline(half_x, half_y, radius, spacing):
    """Sample a rounded-rectangle outline at roughly uniform arclength."""
    cx, cy = half_x - radius, half_y - radius
    pieces = []
    # straights and quarter arcs, traversed in one consistent direction
    corners = [
        ((cx, cy), 0.0),
        ((-cx, cy), 0.5 * np.pi),
        ((-cx, -cy), np.pi),
        ((cx, -cy), 1.5 * np.pi),
    ]
    for i, ((ax, ay), phase) in enumerate(corners):
        (bx, by), _ = corners[(i + 1) % 4]
        # arc around (ax, ay) from phase to phase + 90 degrees
        arc_len = 0.5 * np.pi * radius
        n_arc = max(2, int(round(arc_len / spacing)))
        angles = phase + np.linspace(0.0, 0.5 * np.pi, n_arc, endpoint=False)
        arc = np.stack([ax + radius * np.cos(angles), ay + radius * np.sin(angles)], axis=1)
        pieces.append(arc)
        # straight from end of this arc toward the next corner's arc start
        start = np.array([ax + radius * np.cos(phase + 0.5 * np.pi),
                          ay + radius * np.sin(phase + 0.5 * np.pi)])
        end = np.array([bx + radius * np.cos(phase + 0.5 * np.pi),
                        by + radius * np.sin(phase + 0.5 * np.pi)])
        seg_len = float(np.linalg.norm(end - start))
        n_seg = max(1, int(round(seg_len / spacing)))
        ts = np.linspace(0.0, 1.0, n_seg, endpoint=False)
        pieces.append(start[None, :] + ts[:, None] * (end - start)[None, :])
    loop = np.concatenate(pieces, axis=0)
    return np.concatenate([loop, loop[:1]], axis=0)


def default_obstacles():
    """Static scenery for the built-in track: every category appears."""
    return (
        Obstacle("building", 58.0, 38.0, 70.0, 50.0),
        Obstacle("building", -70.0, 38.0, -58.0, 50.0),
        Obstacle("building", -70.0, -50.0, -58.0, -38.0),
        Obstacle("building", 58.0, -50.0, 70.0, -38.0),
        Obstacle("roadside-object", 66.0, -0.5, 67.0, 0.5),
        Obstacle("roadside-object", -67.0, -0.5, -66.0, 0.5),
        Obstacle("roadside-object", -0.5, 46.0, 0.5, 47.0),
        Obstacle("parked-car", 64.8, -8.0, 66.8, -3.5),
        Obstacle("parked-car", -10.0, 44.8, -5.5, 46.8),
    )


def build_default_track(half_width=4.0, with_obstacles=True):
    """Rounded-rectangle loop, 120x80 m with 28 m corners, ~2 m waypoints."""
    waypoints = _rounded_rect_outline(60.0, 40.0, 28.0, spacing=2.0)
    return TrackSpec(waypoints, half_width,
                     default_obstacles() if with_obstacles else ())


TRACK_BUILDERS = {
    "default": build_default_track,
    "open": lambda: build_default_track(with_obstacles=False),
}


def track_from_name(name: str) -> TrackSpec:
    """Named tracks, for the CLI and the capture service."""
    try:
        builder = TRACK_BUILDERS[name]
    except KeyError:
        raise ConfigError(
            f"unknown track {name!r}, expected one of {sorted(TRACK_BUILDERS)}") from None
    return builder()


def nearest_station(track: TrackSpec, point) -> float:
    """Arclength station of the closest centerline point to `point`."""
    p = np.asarray(point, dtype=np.float64)
    a = track.waypoints[:-1]
    b = track.waypoints[1:]
    ab = b - a
    denom = np.maximum((ab * ab).sum(axis=1), 1e-18)
    t = np.clip(((p - a) * ab).sum(axis=1) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    d2 = ((proj - p) ** 2).sum(axis=1)
    i = int(np.argmin(d2))
    return float(track.cum_lengths[i] + t[i] * track.segment_lengths[i])


def distance_to_centerline(track: TrackSpec, point) -> float:
    p = np.asarray(point, dtype=np.float64)
    return float(np.linalg.norm(point_at(track, nearest_station(track, p)) - p))


def point_at(track: TrackSpec, station):
    """Centerline point(s) at arclength station(s), wrapping around the loop."""
    s = np.mod(np.asarray(station, dtype=np.float64), track.total_length)
    idx = np.clip(np.searchsorted(track.cum_lengths, s, side="right") - 1,
                  0, len(track.segment_lengths) - 1)
    frac = (s - track.cum_lengths[idx]) / track.segment_lengths[idx]
    a = track.waypoints[:-1][idx]
    ab = track.waypoints[1:][idx] - a
    out = a + np.expand_dims(frac, -1) * ab
    return out


def tangent_at(track: TrackSpec, station) -> np.ndarray:
    s = float(np.mod(station, track.total_length))
    idx = int(np.clip(np.searchsorted(track.cum_lengths, s, side="right") - 1,
                      0, len(track.segment_lengths) - 1))
    v = track.waypoints[idx + 1] - track.waypoints[idx]
    return v / np.linalg.norm(v)


def curvature_at(track: TrackSpec, station, chord=2.0) -> float:
    """Unsigned Menger curvature from three centerline points chord apart."""
    p0 = point_at(track, station - chord)
    p1 = point_at(track, station)
    p2 = point_at(track, station + chord)
    a = np.linalg.norm(p1 - p0)
    b = np.linalg.norm(p2 - p1)
    c = np.linalg.norm(p2 - p0)
    if a < 1e-9 or b < 1e-9 or c < 1e-9:
        return 0.0
    cross = abs((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]))
    return float(2.0 * cross / (a * b * c))


def max_curvature_ahead(track: TrackSpec, station, preview, step=2.0) -> float:
    stations = station + np.arange(0.0, max(preview, step), step)
    return max(curvature_at(track, float(s)) for s in stations)
