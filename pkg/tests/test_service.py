"""Capture service: one live session, server-clock ticks, receipt stamping."""

import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from drivesal.diffcore.optim import SgdConfig
from drivesal.gazeprep.dataset import DatasetConfig, SessionSource, build_dataset
from drivesal.nets import RoadSalSpec
from drivesal.service.app import create_app
from drivesal.simworld import load_frame, load_session, validate_session
from drivesal.trainer import TrainConfig, train_roadsal


class FakeClock:
    def __init__(self):
        self.t = 1000.0  # arbitrary nonzero origin

    def __call__(self):
        return self.t

    def advance(self, seconds):
        self.t += seconds


@pytest.fixture()
def service(tmp_path):
    clock = FakeClock()
    client = TestClient(create_app(sessions_dir=str(tmp_path / "sessions"), clock=clock))
    return client, clock


def start(client, **overrides):
    body = {"track": "default", "frame_rate_hz": 10.0, "resolution": 64}
    body.update(overrides)
    r = client.post("/session/start", json=body)
    assert r.status_code == 200, r.text
    return r.json()["session_id"]


class TestLifecycle:
    def test_start_serves_frame_zero_immediately(self, service):
        client, _ = service
        sid = start(client)
        r = client.get(f"/session/{sid}/frame")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert r.headers["x-t-ms"] == "0"
        assert r.headers["x-frame-index"] == "0"
        img = Image.open(io.BytesIO(r.content))
        assert img.size == (64, 64)

    def test_single_live_session_enforced(self, service):
        client, _ = service
        sid = start(client)
        r = client.post("/session/start", json={})
        assert r.status_code == 409
        assert "already live" in r.json()["detail"]
        client.post(f"/session/{sid}/finish")
        start(client)  # slot freed

    def test_unknown_session_is_404(self, service):
        client, _ = service
        start(client)
        assert client.get("/session/nope/frame").status_code == 404
        assert client.post("/session/nope/finish").status_code == 404

    def test_finished_session_no_longer_live(self, service):
        client, _ = service
        sid = start(client)
        assert client.post(f"/session/{sid}/finish").status_code == 200
        assert client.get(f"/session/{sid}/frame").status_code == 404

    def test_schema_validation(self, service):
        client, clock = service
        r = client.post("/session/start", json={"track": "mars"})
        assert r.status_code == 422
        sid = start(client)
        bad_actions = [
            {"t_ms": 0, "steering": 2.0, "throttle": 0, "brake": 0},
            {"t_ms": 0, "steering": 0.0, "throttle": -0.1, "brake": 0},
            {"t_ms": -5, "steering": 0.0, "throttle": 0, "brake": 0},
            {"steering": 0.0, "throttle": 0, "brake": 0},
        ]
        for body in bad_actions:
            assert client.post(f"/session/{sid}/action", json=body).status_code == 422
        assert client.post(f"/session/{sid}/gaze", json={"samples": []}).status_code == 422
        out_of_order = {"samples": [{"t_ms": 30, "x": 1, "y": 1},
                                    {"t_ms": 10, "x": 1, "y": 1}]}
        assert client.post(f"/session/{sid}/gaze", json=out_of_order).status_code == 422


class TestServerClockTicks:
    def test_frames_advance_with_the_clock_only(self, service):
        client, clock = service
        sid = start(client)  # 10 fps -> 100 ms per tick
        r = client.get(f"/session/{sid}/frame")
        assert r.headers["x-frame-index"] == "0"
        clock.advance(0.35)
        r = client.get(f"/session/{sid}/frame")
        assert r.headers["x-frame-index"] == "3"
        assert r.headers["x-t-ms"] == "300"
        r = client.get(f"/session/{sid}/frame")  # no time passed, same frame
        assert r.headers["x-frame-index"] == "3"

    def test_action_applies_at_next_tick(self, service, tmp_path):
        client, clock = service
        sid = start(client)
        clock.advance(0.05)  # mid-tick-0
        r = client.post(f"/session/{sid}/action",
                        json={"t_ms": 50, "steering": 0.5, "throttle": 1.0, "brake": 0.0})
        assert r.status_code == 200
        assert r.json()["applies_from_frame"] == 1
        clock.advance(0.2)  # ticks 1 and 2 elapse under the new action
        done = client.post(f"/session/{sid}/finish").json()
        assert done["frames"] == 3
        log = load_session(done["directory"])
        applied = [(a.steering, a.throttle, a.brake) for a in log.actions]
        assert applied[0] == (0.0, 0.0, 0.0)
        assert applied[1] == (0.5, 1.0, 0.0)
        assert applied[2] == (0.5, 1.0, 0.0)

    def test_held_action_moves_the_car(self, service):
        client, clock = service
        sid = start(client)
        client.post(f"/session/{sid}/action",
                    json={"t_ms": 0, "steering": 0.0, "throttle": 1.0, "brake": 0.0})
        clock.advance(1.0)
        done = client.post(f"/session/{sid}/finish").json()
        first = load_frame(done["directory"], 0).astype(int)
        last = load_frame(done["directory"], done["frames"] - 1).astype(int)
        assert np.abs(first - last).mean() > 1.0  # the view actually changed


class TestGazeReceiptStamping:
    def test_batch_keeps_spacing_ends_at_receipt(self, service):
        client, clock = service
        sid = start(client)
        clock.advance(1.0)
        batch = {"samples": [{"t_ms": 10, "x": 5, "y": 6},
                             {"t_ms": 30, "x": 7, "y": 8},
                             {"t_ms": 50, "x": 9, "y": 10}]}
        r = client.post(f"/session/{sid}/gaze", json=batch)
        assert r.json() == {"accepted": 3, "received_t_ms": 1000}
        done = client.post(f"/session/{sid}/finish").json()
        log = load_session(done["directory"])
        assert [g.t_ms for g in log.gaze] == [960, 980, 1000]
        assert [(g.x, g.y) for g in log.gaze] == [(5, 6), (7, 8), (9, 10)]

    def test_overlapping_batches_stay_strictly_increasing(self, service):
        client, clock = service
        sid = start(client)
        clock.advance(0.5)
        one = {"samples": [{"t_ms": k * 20, "x": 1, "y": 1} for k in range(3)]}
        client.post(f"/session/{sid}/gaze", json=one)
        # same receipt instant: backdated times collide with the first batch
        client.post(f"/session/{sid}/gaze", json=one)
        done = client.post(f"/session/{sid}/finish").json()
        times = [g.t_ms for g in load_session(done["directory"]).gaze]
        assert times == sorted(set(times))  # strictly increasing
        assert len(times) == 6

    def test_gaze_clamped_to_canvas(self, service):
        client, clock = service
        sid = start(client)  # resolution 64
        clock.advance(0.2)
        batch = {"samples": [{"t_ms": 0, "x": -3.0, "y": 900.0}]}
        client.post(f"/session/{sid}/gaze", json=batch)
        done = client.post(f"/session/{sid}/finish").json()
        g = load_session(done["directory"]).gaze[0]
        assert g.x == 0.0
        assert 63 <= g.y < 64


@pytest.mark.slow
def test_scripted_ui_session_produces_valid_training_input(service):
    """A 10 fps client posting one action per frame and 50 Hz gaze batches
    yields a session that validates and feeds the dataset builder."""
    client, clock = service
    sid = start(client, resolution=96)
    steering = 0.3
    for frame in range(20):
        r = client.get(f"/session/{sid}/frame")
        t_frame = int(r.headers["x-t-ms"])
        client.post(f"/session/{sid}/action",
                    json={"t_ms": t_frame, "steering": steering,
                          "throttle": 0.6, "brake": 0.0})
        samples = [{"t_ms": t_frame + 20 * k, "x": 48 + frame % 5, "y": 40 + k}
                   for k in range(5)]
        client.post(f"/session/{sid}/gaze", json={"samples": samples})
        clock.advance(0.1)
    done = client.post(f"/session/{sid}/finish").json()
    assert done["frames"] == 21
    assert done["gaze_samples"] == 100

    log = load_session(done["directory"])
    validate_session(log)
    times = [g.t_ms for g in log.gaze]
    assert all(b > a for a, b in zip(times, times[1:]))
    span_s = (times[-1] - times[0]) / 1000.0
    rate = (len(times) - 1) / span_s
    assert rate >= 3 * log.meta.frame_rate_hz

    source = SessionSource.from_dir(done["directory"])
    dataset = build_dataset([source],
                            DatasetConfig(input_size=48, target_size=24,
                                          augment=False))
    assert len(dataset.train) + len(dataset.test) > 10

    # and the recorded session trains the coarse saliency net without error
    cfg = TrainConfig(sgd=SgdConfig(learning_rate=0.05, momentum=0.9,
                                    decay=0.0, batch_size=8),
                      epochs=1, seed=0, micro_batch=8)
    report = train_roadsal(dataset, cfg, spec=RoadSalSpec(input_size=48))
    assert len(report.train_losses) == 1 and np.isfinite(report.train_losses[0])
