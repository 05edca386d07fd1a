"""Pure-pursuit path follower with curvature-aware speed control."""

from __future__ import annotations

import math

import numpy as np

from drivesal.simworld import track as trk
from drivesal.simworld.types import DEFAULT_WORLD, CarState, DrivingAction, TrackSpec, WorldConfig


def steer_lookahead(speed: float, cfg: WorldConfig) -> float:
    return min(cfg.steer_lookahead_max,
               cfg.steer_lookahead_base + cfg.steer_lookahead_gain * speed)


def lookahead_point(track: TrackSpec, state: CarState, distance: float) -> np.ndarray:
    station = trk.nearest_station(track, state.position)
    return trk.point_at(track, station + distance)


def target_speed(track: TrackSpec, state: CarState, cfg: WorldConfig = DEFAULT_WORLD) -> float:
    station = trk.nearest_station(track, state.position)
    preview = 6.0 + 1.2 * state.speed
    kappa = trk.max_curvature_ahead(track, station, preview)
    if kappa < 1e-6:
        return cfg.cruise_speed
    return min(cfg.cruise_speed, math.sqrt(cfg.lateral_accel / kappa))


def oracle_action(track: TrackSpec, state: CarState,
                  cfg: WorldConfig = DEFAULT_WORLD) -> DrivingAction:
    ld = steer_lookahead(state.speed, cfg)
    goal = lookahead_point(track, state, ld)
    rel = goal - state.position
    # angle to the goal, positive toward the car's right
    alpha = math.atan2(float(rel @ state.rightward), float(rel @ state.forward))
    curvature = 2.0 * math.sin(alpha) / ld
    steer = math.atan(cfg.wheelbase * curvature) / cfg.max_steer_rad

    err = target_speed(track, state, cfg) - state.speed
    if err < -cfg.speed_deadband:
        throttle = 0.0
        brake = cfg.brake_gain * (-err - cfg.speed_deadband)
    else:
        # feed-forward exactly cancels drag at the current speed
        throttle = cfg.drag * state.speed / cfg.max_accel + cfg.throttle_gain * max(0.0, err)
        brake = 0.0
    return DrivingAction(steering=steer, throttle=throttle, brake=brake)
