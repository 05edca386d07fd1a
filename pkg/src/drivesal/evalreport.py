"""Open-loop evaluation of the trained agents and the model comparison.

Each model's test frames are routed through the same input pipeline it was
trained with (raw frames, coarse-saliency multiply, or attention-net
multiply), predictions are compared to the recorded oracle actions, and the
per-actuator mean squared errors are averaged into one score. Predictions
are also clamped to actuator range first (deployment semantics); both the
clamped and raw scores are reported.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from drivesal.errors import ConfigError, DriveSalError
from drivesal.imio import write_png
from drivesal.nets.checkpoint import load_checkpoint
from drivesal.nets.forward import agent_forward
from drivesal.nets.saliency_ops import upsample_map
from drivesal.trainer.train import (
    _load_net,
    _precompute_net1_inputs,
    _precompute_roadsal_inputs,
)

ACTION_NAMES = ("steering", "throttle", "brake")
ACTION_LOW = np.array([-1.0, 0.0, 0.0])
ACTION_HIGH = np.array([1.0, 1.0, 1.0])
PIPELINES = ("raw", "roadsal", "net1")
EXPECTED_ORDERING = ("model2", "model1", "model3")  # the published ranking


@dataclass(frozen=True)
class EvalResult:
    model: str
    pipeline: str
    per_action_mse: dict
    combined_mse: float
    per_action_mse_unclamped: dict
    combined_mse_unclamped: float
    frame_count: int
    dataset_digest: str


@dataclass
class ComparisonReport:
    rows: list
    ordering: list  # model names, best (lowest combined) first
    published_ordering_flag: str  # matches-paper | differs-from-paper | indeterminate
    table_text: str
    csv_text: str
    notes: list = field(default_factory=list)


def dataset_digest(images: np.ndarray, actions: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(images).tobytes())
    h.update(np.ascontiguousarray(actions).tobytes())
    return h.hexdigest()[:16]


def _mse_by_action(pred: np.ndarray, truth: np.ndarray) -> dict:
    per = ((pred - truth) ** 2).mean(axis=0)
    return {name: float(v) for name, v in zip(ACTION_NAMES, per)}


def evaluate_mse(agent, pipeline: str, images: np.ndarray, actions: np.ndarray,
                 attention=None, model: str = "", micro: int = 30) -> EvalResult:
    """Score one agent on held-out (frame, action) pairs.

    `attention` is the saliency checkpoint the pipeline needs: a roadsal
    checkpoint for "roadsal", a net1 checkpoint for "net1", nothing for
    "raw". Passing the wrong kind (or none) is rejected before any forward
    pass runs.
    """
    if pipeline not in PIPELINES:
        raise ConfigError(f"unknown pipeline {pipeline!r}, expected one of {PIPELINES}")
    agent_spec, agent_params = _load_net(agent, "agent")
    if pipeline == "raw":
        if attention is not None:
            raise ConfigError("raw pipeline takes no attention checkpoint")
        inputs = images
    elif pipeline == "roadsal":
        if attention is None:
            raise ConfigError("roadsal pipeline requires a roadsal checkpoint")
        spec, params = _load_net(attention, "roadsal")
        inputs = _precompute_roadsal_inputs(spec, params, images, micro)
    else:
        if attention is None:
            raise ConfigError("net1 pipeline requires a net1 checkpoint")
        spec, params = _load_net(attention, "net1")
        inputs = _precompute_net1_inputs(spec, params, images, micro)

    n = len(images)
    if n == 0:
        raise ConfigError("no test frames to evaluate")
    if len(actions) != n:
        raise ConfigError(f"{n} frames vs {len(actions)} actions")
    raw_pred = np.empty((n, 3), dtype=np.float64)
    for start in range(0, n, micro):
        chunk = inputs[start:start + micro]
        raw_pred[start:start + len(chunk)] = agent_forward(
            agent_spec, agent_params, chunk).values
    truth = np.asarray(actions, dtype=np.float64)
    clamped = np.clip(raw_pred, ACTION_LOW, ACTION_HIGH)

    per = _mse_by_action(clamped, truth)
    per_raw = _mse_by_action(raw_pred, truth)
    return EvalResult(
        model=model or pipeline,
        pipeline=pipeline,
        per_action_mse=per,
        combined_mse=float(np.mean(list(per.values()))),
        per_action_mse_unclamped=per_raw,
        combined_mse_unclamped=float(np.mean(list(per_raw.values()))),
        frame_count=n,
        dataset_digest=dataset_digest(images, truth),
    )


def constant_baseline_mse(train_actions: np.ndarray, test_actions: np.ndarray) -> float:
    """Combined MSE of the predictor that always answers the training-set
    mean action — the bar every learned model must clear."""
    mean_action = np.asarray(train_actions, dtype=np.float64).mean(axis=0)
    per = _mse_by_action(np.broadcast_to(mean_action, np.asarray(test_actions).shape),
                         np.asarray(test_actions, dtype=np.float64))
    return float(np.mean(list(per.values())))


def compare_models(results) -> ComparisonReport:
    """Table + ordering over the three model rows; the published ordering is
    reported as an informational flag, never enforced."""
    rows = dict(results) if isinstance(results, dict) else {r.model: r for r in results}
    expected = set(EXPECTED_ORDERING)
    if set(rows) != expected:
        raise ConfigError(f"compare_models needs rows {sorted(expected)}, got {sorted(rows)}")
    digests = {r.dataset_digest for r in rows.values()}
    if len(digests) != 1:
        raise ConfigError(f"rows were computed on different datasets: {sorted(digests)}")
    counts = {r.frame_count for r in rows.values()}
    if len(counts) != 1:
        raise ConfigError(f"rows cover different frame counts: {sorted(counts)}")

    ordering = sorted(rows, key=lambda m: (rows[m].combined_mse, m))
    scores = [rows[m].combined_mse for m in ordering]
    if len(set(scores)) < len(scores):
        flag = "indeterminate"
    elif tuple(ordering) == EXPECTED_ORDERING:
        flag = "matches-paper"
    else:
        flag = "differs-from-paper"

    header = f"{'model':8s} {'steering':>12s} {'throttle':>12s} {'brake':>12s} " \
             f"{'combined':>12s} {'raw combined':>13s}"
    lines = [header, "-" * len(header)]
    csv_lines = ["model,steering_mse,throttle_mse,brake_mse,combined_mse,combined_mse_unclamped"]
    for name in sorted(rows):
        r = rows[name]
        p = r.per_action_mse
        lines.append(f"{name:8s} {p['steering']:12.6f} {p['throttle']:12.6f} "
                     f"{p['brake']:12.6f} {r.combined_mse:12.6f} "
                     f"{r.combined_mse_unclamped:13.6f}")
        csv_lines.append(f"{name},{p['steering']!r},{p['throttle']!r},{p['brake']!r},"
                         f"{r.combined_mse!r},{r.combined_mse_unclamped!r}")
    lines.append("")
    lines.append(f"ordering (best first): {' < '.join(ordering)}")
    lines.append(f"published-ordering flag: {flag} (informational only)")
    return ComparisonReport(
        rows=[rows[m] for m in sorted(rows)],
        ordering=ordering,
        published_ordering_flag=flag,
        table_text="\n".join(lines) + "\n",
        csv_text="\n".join(csv_lines) + "\n",
    )


def export_saliency_pairs(images, maps, out_dir, prefix: str = "pair") -> list:
    """One PNG per frame: original | attention map | multiplied image."""
    images = np.asarray(images, dtype=np.float64)
    maps = np.asarray(maps, dtype=np.float64)
    if len(images) != len(maps):
        raise ConfigError(f"{len(images)} images vs {len(maps)} maps")
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i, (image, sal) in enumerate(zip(images, maps)):
        height, width = image.shape[:2]
        if sal.shape != (height, width):
            sal = upsample_map(sal, height, width)
        sal = np.clip(sal, 0.0, 1.0)
        panel = np.concatenate([
            image,
            np.repeat(sal[:, :, None], 3, axis=2),
            image * sal[:, :, None],
        ], axis=1)
        path = os.path.join(out_dir, f"{prefix}_{i:06d}.png")
        try:
            write_png(path, np.round(panel * 255.0).astype(np.uint8))
        except OSError as exc:
            raise DriveSalError(f"failed to write {path}: {exc}") from exc
        paths.append(path)
    return paths
