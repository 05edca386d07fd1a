"""HTTP capture service: a human drives the simulator through a browser.

One live session at a time. The simulator advances lazily on the server's
monotonic clock: whenever a request arrives, every frame tick that has
elapsed since the last request is stepped (using the most recently posted
action), rendered, and streamed to the session directory. Gaze batches are
receipt-stamped onto the same server clock — the last sample of a batch
gets the receipt time, earlier ones keep their relative spacing, and
strict monotonicity is enforced — so the finished directory is a valid
session in the standard on-disk format, directly consumable by gaze-prep.
"""

from __future__ import annotations

import os
import threading
import time
import uuid

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field, model_validator

from drivesal.errors import ConfigError
from drivesal.imio import encode_png
from drivesal.simworld import (
    DEFAULT_WORLD,
    DrivingAction,
    GazeSample,
    SessionMeta,
    SessionWriter,
    frame_to_uint8,
    render_frame,
    start_state,
    step_dynamics,
    track_from_name,
)

GAZE_NOMINAL_HZ = 50.0  # the capture UI's design rate, recorded in meta


class StartRequest(BaseModel):
    track: str = "default"
    frame_rate_hz: float = Field(10.0, gt=0.0, le=GAZE_NOMINAL_HZ)
    resolution: int = Field(227, ge=32, le=512)


class StartResponse(BaseModel):
    session_id: str
    track: str
    frame_rate_hz: float
    resolution: int
    t_ms: int


class ActionRequest(BaseModel):
    t_ms: float = Field(ge=0, allow_inf_nan=False)
    steering: float = Field(ge=-1.0, le=1.0, allow_inf_nan=False)
    throttle: float = Field(ge=0.0, le=1.0, allow_inf_nan=False)
    brake: float = Field(ge=0.0, le=1.0, allow_inf_nan=False)


class ActionReceipt(BaseModel):
    received_t_ms: int
    applies_from_frame: int


class GazeSampleIn(BaseModel):
    t_ms: float = Field(ge=0, allow_inf_nan=False)
    x: float = Field(allow_inf_nan=False)
    y: float = Field(allow_inf_nan=False)


class GazeBatch(BaseModel):
    samples: list[GazeSampleIn] = Field(min_length=1)

    @model_validator(mode="after")
    def _ordered(self):
        ts = [s.t_ms for s in self.samples]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("gaze samples must be in nondecreasing t_ms order")
        return self


class GazeReceipt(BaseModel):
    accepted: int
    received_t_ms: int


class FinishResponse(BaseModel):
    directory: str
    frames: int
    gaze_samples: int


class LiveSession:
    """Simulator state plus the incremental session writer."""

    def __init__(self, session_id, directory, track_name, frame_rate_hz,
                 resolution, clock, seed: int = 0):
        self.id = session_id
        self.directory = os.fspath(directory)
        self.clock = clock
        self.t0 = clock()
        self.frame_rate = float(frame_rate_hz)
        self.resolution = int(resolution)
        self.track = track_from_name(track_name)
        self.cfg = DEFAULT_WORLD
        self.state = start_state(self.track, np.random.default_rng(seed), self.cfg)
        self.writer = SessionWriter(self.directory, SessionMeta(
            resolution=self.resolution, frame_rate_hz=self.frame_rate,
            gaze_rate_hz=GAZE_NOMINAL_HZ, source="human", seed=seed,
            constants=self.cfg.to_dict()))
        self.pending = DrivingAction(0.0, 0.0, 0.0)
        self.tick = -1
        self.latest_png = b""
        self.latest_t_ms = 0
        self.gaze_count = 0
        self.last_gaze_t = -1
        self.lock = threading.Lock()
        self._advance_to(0)  # frame 0 exists as soon as the session starts

    def now_ms(self) -> int:
        return int((self.clock() - self.t0) * 1000.0)

    def _frame_t(self, i: int) -> int:
        return int(round(1000.0 * i / self.frame_rate))

    def _advance_to(self, target: int):
        while self.tick < target:
            i = self.tick + 1
            if i > 0:
                self.state = step_dynamics(self.state, self.pending,
                                           1.0 / self.frame_rate, self.cfg)
            frame = render_frame(self.track, self.state, self._frame_t(i),
                                 self.resolution, self.cfg)
            rgb8 = frame_to_uint8(frame)
            self.writer.append_frame(rgb8, self._frame_t(i))
            self.writer.append_action(i, self.pending)
            self.latest_png = encode_png(rgb8)
            self.latest_t_ms = self._frame_t(i)
            self.tick = i

    def advance(self):
        """Catch the simulation up to the server clock."""
        self._advance_to(int(self.now_ms() * self.frame_rate / 1000.0))

    def set_action(self, action: DrivingAction) -> int:
        self.advance()  # ticks before receipt keep the old action
        self.pending = action
        return self.tick + 1

    def add_gaze(self, samples) -> tuple:
        """Receipt-stamp a batch: the newest sample lands on the receipt
        time, older ones keep their spacing, monotonicity is enforced."""
        received = self.now_ms()
        newest = samples[-1].t_ms
        limit = self.resolution - 1e-3  # session format wants x,y in [0, res)
        for s in samples:
            t = max(int(round(received - (newest - s.t_ms))), self.last_gaze_t + 1)
            self.writer.append_gaze(GazeSample(
                t_ms=t,
                x=float(min(max(s.x, 0.0), limit)),
                y=float(min(max(s.y, 0.0), limit))))
            self.last_gaze_t = t
        self.gaze_count += len(samples)
        return len(samples), received

    def finish(self) -> FinishResponse:
        self.advance()
        self.writer.finish()
        return FinishResponse(directory=self.directory,
                              frames=self.writer.n_frames,
                              gaze_samples=self.gaze_count)


def create_app(sessions_dir="sessions", clock=time.monotonic) -> FastAPI:
    """The service app; `clock` (seconds, monotonic) is injectable so tests
    can drive simulated time."""
    app = FastAPI(title="drivesal capture service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"], expose_headers=["X-T-Ms", "X-Frame-Index"])
    registry = {"live": None}
    registry_lock = threading.Lock()

    def _live(session_id: str) -> LiveSession:
        live = registry["live"]
        if live is None or live.id != session_id:
            raise HTTPException(status_code=404, detail=f"no live session {session_id!r}")
        return live

    @app.post("/session/start", response_model=StartResponse)
    def start_session(req: StartRequest):
        with registry_lock:
            if registry["live"] is not None:
                raise HTTPException(
                    status_code=409,
                    detail="a capture session is already live; finish it first")
            session_id = uuid.uuid4().hex[:12]
            try:
                live = LiveSession(session_id, os.path.join(sessions_dir, session_id),
                                   req.track, req.frame_rate_hz, req.resolution, clock)
            except ConfigError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            registry["live"] = live
        return StartResponse(session_id=session_id, track=req.track,
                             frame_rate_hz=live.frame_rate,
                             resolution=live.resolution, t_ms=live.now_ms())

    @app.get("/session/{session_id}/frame")
    def get_frame(session_id: str):
        live = _live(session_id)
        with live.lock:
            live.advance()
            return Response(content=live.latest_png, media_type="image/png",
                            headers={"X-T-Ms": str(live.latest_t_ms),
                                     "X-Frame-Index": str(live.tick),
                                     "Cache-Control": "no-store"})

    @app.post("/session/{session_id}/action", response_model=ActionReceipt)
    def post_action(session_id: str, req: ActionRequest):
        live = _live(session_id)
        with live.lock:
            applies_from = live.set_action(
                DrivingAction(steering=req.steering, throttle=req.throttle,
                              brake=req.brake))
            return ActionReceipt(received_t_ms=live.now_ms(),
                                 applies_from_frame=applies_from)

    @app.post("/session/{session_id}/gaze", response_model=GazeReceipt)
    def post_gaze(session_id: str, batch: GazeBatch):
        live = _live(session_id)
        with live.lock:
            accepted, received = live.add_gaze(batch.samples)
            return GazeReceipt(accepted=accepted, received_t_ms=received)

    @app.post("/session/{session_id}/finish", response_model=FinishResponse)
    def finish_session(session_id: str):
        with registry_lock:
            live = _live(session_id)
            with live.lock:
                summary = live.finish()
            registry["live"] = None
        return summary

    return app
