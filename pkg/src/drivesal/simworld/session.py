"""Closed-loop session generation and the on-disk session format.

Directory layout:
    meta.json     resolution, rates, source, seed, world constants
    frames/000000.png ...
    frames.jsonl  {"frame_idx": i, "t_ms": t}
    gaze.jsonl    {"t_ms": t, "x": x, "y": y}
    actions.jsonl {"frame_idx": i, "steering": s, "throttle": t, "brake": b}

This layout is the shared contract between the simulator, the capture UI
service, and the dataset builder.
"""

from __future__ import annotations

import json
import os

import numpy as np

from drivesal.errors import SessionFormatError
from drivesal.imio import atomic_write_bytes, read_png, write_png
from drivesal.simworld import track as trk
from drivesal.simworld.dynamics import step_dynamics
from drivesal.simworld.gaze import synth_gaze
from drivesal.simworld.oracle import oracle_action
from drivesal.simworld.render import frame_to_uint8, render_frame
from drivesal.simworld.types import (
    DEFAULT_WORLD,
    CarState,
    DrivingAction,
    GazeSample,
    SessionLog,
    SessionMeta,
    TrackSpec,
    WorldConfig,
    validate_session,
)


def _dump(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class SessionWriter:
    """Incremental writer for the session directory format."""

    def __init__(self, directory, meta: SessionMeta):
        self.dir = os.fspath(directory)
        os.makedirs(os.path.join(self.dir, "frames"), exist_ok=True)
        meta_obj = {
            "resolution": meta.resolution,
            "frame_rate_hz": meta.frame_rate_hz,
            "gaze_rate_hz": meta.gaze_rate_hz,
            "source": meta.source,
            "seed": meta.seed,
            "constants": meta.constants,
        }
        atomic_write_bytes(os.path.join(self.dir, "meta.json"),
                           (json.dumps(meta_obj, sort_keys=True, indent=2) + "\n").encode())
        self._frames = open(os.path.join(self.dir, "frames.jsonl"), "w")
        self._gaze = open(os.path.join(self.dir, "gaze.jsonl"), "w")
        self._actions = open(os.path.join(self.dir, "actions.jsonl"), "w")
        self.n_frames = 0

    def append_frame(self, rgb_uint8, t_ms: int):
        idx = self.n_frames
        write_png(os.path.join(self.dir, "frames", f"{idx:06d}.png"), rgb_uint8)
        self._frames.write(_dump({"frame_idx": idx, "t_ms": int(t_ms)}) + "\n")
        self.n_frames += 1
        return idx

    def append_gaze(self, sample: GazeSample):
        self._gaze.write(_dump({"t_ms": sample.t_ms, "x": sample.x, "y": sample.y}) + "\n")

    def append_action(self, frame_idx: int, action: DrivingAction):
        self._actions.write(_dump({
            "frame_idx": frame_idx,
            "steering": action.steering,
            "throttle": action.throttle,
            "brake": action.brake,
        }) + "\n")

    def finish(self):
        for f in (self._frames, self._gaze, self._actions):
            f.flush()
            f.close()


def start_state(track: TrackSpec, rng, cfg: WorldConfig = DEFAULT_WORLD) -> CarState:
    """Randomized on-road start so different seeds give different runs."""
    station = rng.uniform(0.0, track.total_length)
    lateral = rng.uniform(-1.5, 1.5)
    dheading = rng.uniform(-0.08, 0.08)
    speed = rng.uniform(4.0, 8.0)
    p = trk.point_at(track, station)
    t = trk.tangent_at(track, station)
    normal = np.array([-t[1], t[0]])
    pos = p + lateral * normal
    return CarState(x=pos[0], y=pos[1], heading=float(np.arctan2(t[1], t[0])) + dheading,
                    speed=speed)


def _frame_time(i: int, frame_rate_hz: float) -> int:
    return int(round(1000.0 * i / frame_rate_hz))


def _gaze_times(n_frames: int, frame_rate_hz: float, gaze_rate_hz: float, rng):
    """Jittered integer-ms gaze clock, independent of the frame clock."""
    period = 1000.0 / gaze_rate_hz
    end = 1000.0 * n_frames / frame_rate_hz
    times = []
    k = 0
    while True:
        t = int(round(period * k + 0.15 * period + 0.35 * period * rng.random()))
        if t >= end:
            break
        times.append(t)
        k += 1
    return times


def run_session(track: TrackSpec, n_frames: int, frame_rate_hz: float = 10.0,
                gaze_rate_hz: float = 50.0, gaze_source: str = "oracle", seed: int = 0,
                resolution: int = 227, out_dir=None, cfg: WorldConfig = DEFAULT_WORLD,
                keep_frames: bool | None = None) -> SessionLog:
    """Drive the oracle for n_frames, recording frames, actions and gaze.

    With out_dir set, frames stream to disk as they render; otherwise they
    are kept in memory (fine for short runs only).
    """
    if gaze_rate_hz < frame_rate_hz:
        raise ValueError("gaze_rate_hz must be >= frame_rate_hz")
    if gaze_source not in ("oracle", "none"):
        raise ValueError(f"gaze_source must be oracle|none, got {gaze_source!r}")
    rng = np.random.default_rng(seed)
    dt = 1.0 / frame_rate_hz
    meta = SessionMeta(resolution=resolution, frame_rate_hz=frame_rate_hz,
                       gaze_rate_hz=gaze_rate_hz, source="oracle", seed=seed,
                       constants=cfg.to_dict())

    # pass 1: roll the closed loop; keep the per-frame states for gaze
    states = [start_state(track, rng, cfg)]
    actions = []
    for _ in range(n_frames):
        s = states[-1]
        base = oracle_action(track, s, cfg)
        action = DrivingAction(
            steering=base.steering + cfg.steer_dither * rng.standard_normal(),
            throttle=base.throttle + cfg.throttle_dither * rng.standard_normal(),
            brake=base.brake,
        )
        actions.append(action)
        states.append(step_dynamics(s, action, dt, cfg))

    # pass 2: render and (optionally) stream frames
    writer = None
    if out_dir is not None:
        writer = SessionWriter(out_dir, meta)
    keep = (out_dir is None) if keep_frames is None else keep_frames
    frames = [] if keep else None
    frame_times = [_frame_time(i, frame_rate_hz) for i in range(n_frames)]
    for i in range(n_frames):
        frame = render_frame(track, states[i], frame_times[i], resolution, cfg)
        if writer is not None:
            writer.append_frame(frame_to_uint8(frame), frame.t_ms)
            writer.append_action(i, actions[i])
        if frames is not None:
            frames.append(frame)

    # pass 3: the gaze stream, sampled on its own clock against held states
    gaze = []
    if gaze_source == "oracle":
        for t in _gaze_times(n_frames, frame_rate_hz, gaze_rate_hz, rng):
            j = min(int(t * frame_rate_hz / 1000.0), n_frames - 1)
            gaze.append(synth_gaze(track, states[j], t, resolution, rng, cfg=cfg))
    if writer is not None:
        for g in gaze:
            writer.append_gaze(g)
        writer.finish()

    log = SessionLog(meta=meta, frame_times=frame_times, gaze=gaze, actions=actions,
                     frames=frames)
    validate_session(log)
    return log


def save_session(log: SessionLog, directory) -> None:
    """Write an in-memory SessionLog (with pixel data) to a directory."""
    if log.frames is None:
        raise ValueError("SessionLog holds no pixel data; use run_session(out_dir=...)")
    writer = SessionWriter(directory, log.meta)
    for frame, action in zip(log.frames, log.actions):
        idx = writer.append_frame(frame_to_uint8(frame), frame.t_ms)
        writer.append_action(idx, action)
    for g in log.gaze:
        writer.append_gaze(g)
    writer.finish()


def _read_jsonl(path, required_keys):
    rows = []
    try:
        with open(path) as f:
            for lineno, line in enumerate(f):
                if not line.strip():
                    continue
                row = json.loads(line)
                missing = required_keys - row.keys()
                if missing:
                    raise SessionFormatError(
                        f"{os.path.basename(path)}:{lineno}: missing keys {sorted(missing)}")
                rows.append(row)
    except FileNotFoundError:
        raise SessionFormatError(f"missing {os.path.basename(path)}") from None
    except json.JSONDecodeError as exc:
        raise SessionFormatError(f"malformed JSON in {os.path.basename(path)}: {exc}") from None
    return rows


def load_session(directory) -> SessionLog:
    """Read a session directory back into a SessionLog (no pixel data)."""
    directory = os.fspath(directory)
    try:
        with open(os.path.join(directory, "meta.json")) as f:
            meta_obj = json.load(f)
    except FileNotFoundError:
        raise SessionFormatError(f"missing meta.json in {directory}") from None
    except json.JSONDecodeError as exc:
        raise SessionFormatError(f"malformed meta.json: {exc}") from None
    try:
        meta = SessionMeta(resolution=int(meta_obj["resolution"]),
                           frame_rate_hz=float(meta_obj["frame_rate_hz"]),
                           gaze_rate_hz=float(meta_obj["gaze_rate_hz"]),
                           source=str(meta_obj["source"]),
                           seed=int(meta_obj["seed"]),
                           constants=meta_obj.get("constants", {}))
    except (KeyError, ValueError) as exc:
        raise SessionFormatError(f"bad meta.json: {exc!r}") from None

    frame_rows = _read_jsonl(os.path.join(directory, "frames.jsonl"), {"frame_idx", "t_ms"})
    gaze_rows = _read_jsonl(os.path.join(directory, "gaze.jsonl"), {"t_ms", "x", "y"})
    action_rows = _read_jsonl(os.path.join(directory, "actions.jsonl"),
                              {"frame_idx", "steering", "throttle", "brake"})

    for i, row in enumerate(frame_rows):
        if row["frame_idx"] != i:
            raise SessionFormatError(f"frames.jsonl index gap at {i}")
    for i, row in enumerate(action_rows):
        if row["frame_idx"] != i:
            raise SessionFormatError(f"actions.jsonl index gap at {i}")

    log = SessionLog(
        meta=meta,
        frame_times=[int(r["t_ms"]) for r in frame_rows],
        gaze=[GazeSample(t_ms=int(r["t_ms"]), x=float(r["x"]), y=float(r["y"]))
              for r in gaze_rows],
        actions=[DrivingAction(steering=float(r["steering"]), throttle=float(r["throttle"]),
                               brake=float(r["brake"])) for r in action_rows],
        frames=None,
    )
    validate_session(log)
    return log


def load_frame(directory, frame_idx: int) -> np.ndarray:
    """One frame as uint8 (H,W,3)."""
    path = os.path.join(os.fspath(directory), "frames", f"{frame_idx:06d}.png")
    try:
        return read_png(path)
    except FileNotFoundError:
        raise SessionFormatError(f"missing frame image {frame_idx:06d}.png") from None
