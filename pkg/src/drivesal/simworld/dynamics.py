"""Kinematic bicycle step."""

from __future__ import annotations

import math

from drivesal.simworld.types import DEFAULT_WORLD, CarState, DrivingAction, WorldConfig


def step_dynamics(state: CarState, action: DrivingAction, dt: float = 0.1,
                  cfg: WorldConfig = DEFAULT_WORLD) -> CarState:
    """Advance one tick: turn, move along the new heading, then change speed.

    The position update uses the pre-update speed, so one tick at speed v
    covers exactly v*dt meters.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    v = state.speed
    heading = state.heading + (v / cfg.wheelbase) * math.tan(
        action.steering * cfg.max_steer_rad) * dt
    x = state.x + v * dt * math.cos(heading)
    y = state.y + v * dt * math.sin(heading)
    accel = cfg.max_accel * action.throttle - cfg.max_brake * action.brake - cfg.drag * v
    new_speed = max(0.0, v + accel * dt)
    return CarState(x=x, y=y, heading=heading, speed=new_speed)
