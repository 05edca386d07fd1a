"""Synthetic gaze: look where the controller is steering, plus noise and
occasional saccades to scenery."""

from __future__ import annotations

import numpy as np

from drivesal.simworld import oracle, render
from drivesal.simworld.types import DEFAULT_WORLD, CarState, GazeSample, TrackSpec, WorldConfig


def gaze_anchor_point(track: TrackSpec, state: CarState,
                      cfg: WorldConfig = DEFAULT_WORLD) -> np.ndarray:
    """World point the synthetic driver fixates: a horizon further out than
    the steering controller's own lookahead."""
    distance = min(cfg.gaze_lookahead_max,
                   max(cfg.gaze_lookahead_min, cfg.gaze_lookahead_gain * state.speed))
    return oracle.lookahead_point(track, state, distance)


def synth_gaze(track: TrackSpec, state: CarState, t_ms: int, size: int, rng,
               noise_px: float | None = None,
               saccade_prob: float | None = None,
               cfg: WorldConfig = DEFAULT_WORLD) -> GazeSample:
    noise = cfg.gaze_noise_px if noise_px is None else noise_px
    p_saccade = cfg.saccade_prob if saccade_prob is None else saccade_prob

    target = gaze_anchor_point(track, state, cfg)
    if p_saccade > 0 and track.obstacles and rng.random() < p_saccade:
        centers = np.stack([o.center for o in track.obstacles])
        nearest = int(np.argmin(((centers - state.position) ** 2).sum(axis=1)))
        target = centers[nearest]

    px = render.world_to_pixel(state, size, target, cfg)
    x, y = float(px[0]), float(px[1])
    if noise > 0:
        x += noise * rng.standard_normal()
        y += noise * rng.standard_normal()
    x = min(float(size - 1), max(0.0, x))
    y = min(float(size - 1), max(0.0, y))
    return GazeSample(t_ms=int(t_ms), x=x, y=y)
