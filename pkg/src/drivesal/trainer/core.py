"""Training machinery shared by all four procedures: config, report,
deterministic epoch loop with micro-batched gradient accumulation.

Batches follow the configured SGD batch size; each batch's gradient is
assembled from fixed-size micro-batches so peak memory stays bounded by the
micro-batch im2col buffers, not the logical batch. The accumulation order is
fixed, so runs are reproducible to the bit.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from drivesal.diffcore.optim import ParamSet, SgdConfig, sgd_step
from drivesal.errors import ConfigError, TrainingDiverged
from drivesal.imio import atomic_write_bytes


@dataclass(frozen=True)
class TrainConfig:
    sgd: SgdConfig = SgdConfig()
    epochs: int = 10
    seed: int = 0
    lambda1: float = 0.1
    lambda2: float = 1.0
    sparsity_variant: str = "squared"
    micro_batch: int = 30
    curve_path: str | None = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError("lambda weights must be nonnegative")
        if self.lambda1 == 0 and self.lambda2 == 0:
            raise ConfigError("lambda1 and lambda2 must not both be zero")
        if self.sparsity_variant not in ("squared", "linear"):
            raise ConfigError(f"unknown sparsity variant {self.sparsity_variant!r}")
        if self.micro_batch < 1:
            raise ConfigError(f"micro_batch must be positive, got {self.micro_batch}")

    def to_dict(self):
        return {
            "sgd": {
                "learning_rate": self.sgd.learning_rate,
                "momentum": self.sgd.momentum,
                "decay": self.sgd.decay,
                "batch_size": self.sgd.batch_size,
            },
            "epochs": self.epochs,
            "seed": self.seed,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "sparsity_variant": self.sparsity_variant,
            "micro_batch": self.micro_batch,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class TrainReport:
    train_losses: list
    heldout_losses: list
    wall_time_s: float
    checkpoint_path: str | None
    config: dict
    notes: list = field(default_factory=list)
    diverged: bool = False
    extra: dict = field(default_factory=dict)
    params: ParamSet | None = None

    def curve_csv(self) -> str:
        lines = ["epoch,train_loss,heldout_loss"]
        for i, (tr, he) in enumerate(zip(self.train_losses, self.heldout_losses)):
            lines.append(f"{i},{float(tr)!r},{float(he)!r}")
        return "\n".join(lines) + "\n"

    def report_text(self) -> str:
        # wall time is deliberately absent: written artifacts must rerun
        # byte-identically, and timing is available on the object itself
        lines = ["training report", "==============="]
        lines.append(f"epochs completed: {len(self.train_losses)}")
        if self.train_losses:
            lines.append(f"final train loss: {float(self.train_losses[-1])!r}")
            lines.append(f"final held-out loss: {float(self.heldout_losses[-1])!r}")
        lines.append(f"diverged: {self.diverged}")
        # basename only: the absolute path would vary with the output
        # directory and the report must rerun byte-identically
        saved = os.path.basename(self.checkpoint_path) if self.checkpoint_path else "(not saved)"
        lines.append(f"checkpoint: {saved}")
        for key in sorted(self.extra):
            lines.append(f"{key}: {self.extra[key]!r}")
        for note in self.notes:
            lines.append(f"note: {note}")
        lines.append("config: " + json.dumps(self.config, sort_keys=True))
        return "\n".join(lines) + "\n"

    def write_artifacts(self, out_dir) -> None:
        out_dir = os.fspath(out_dir)
        os.makedirs(out_dir, exist_ok=True)
        atomic_write_bytes(os.path.join(out_dir, "loss_curve.csv"), self.curve_csv().encode())
        atomic_write_bytes(os.path.join(out_dir, "report.txt"), self.report_text().encode())


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """The deterministic sample order for one epoch."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def accumulate_batch(params: ParamSet, forward_loss, indices, micro: int):
    """Mean loss and gradients over `indices`, assembled micro-batch-wise.

    forward_loss(idx_array) must return (scalar DiffTensor, aux dict of
    floats); the loss is the mean over the chunk, so chunks re-weight by
    their size. Returns (loss, grads, aux means).
    """
    total = len(indices)
    grads = {}
    loss_acc = 0.0
    aux_acc = {}
    for start in range(0, total, micro):
        chunk = indices[start:start + micro]
        weight = np.float32(len(chunk) / total)
        params.zero_grad()
        loss, aux = forward_loss(chunk)
        value = float(loss.values)
        if not np.isfinite(value):
            raise TrainingDiverged(f"non-finite training loss {value}")
        loss.backward()
        loss_acc += value * float(weight)
        for key, v in aux.items():
            aux_acc[key] = aux_acc.get(key, 0.0) + float(v) * float(weight)
        for name, t in params.items():
            if t.grad is None:
                continue
            scaled = t.grad * weight
            grads[name] = scaled if name not in grads else grads[name] + scaled
    return loss_acc, grads, aux_acc


def evaluate_in_chunks(forward_loss, n: int, micro: int) -> float:
    """Mean loss over a fixed split without keeping one giant tape."""
    if n == 0:
        return float("nan")
    total = 0.0
    for start in range(0, n, micro):
        idx = np.arange(start, min(start + micro, n))
        loss, _ = forward_loss(idx)
        total += float(loss.values) * len(idx)
    return total / n


def fit(params: ParamSet, forward_loss, n_train: int, cfg: TrainConfig,
        heldout_loss=None, epoch_hook=None, notes=None):
    """The shared loop. Returns a TrainReport without checkpoint fields set.

    forward_loss(idx) -> (scalar DiffTensor, aux dict) over training indices.
    heldout_loss() -> float, evaluated at each epoch end (defaults to the
    epoch's train loss when no held-out split exists).
    epoch_hook(epoch, aux_means) may record extras.
    On divergence the partial report rides on the TrainingDiverged exception.
    """
    if n_train < 1:
        raise ConfigError("training split is empty")
    notes = list(notes or [])
    batch = cfg.sgd.batch_size
    if batch > n_train:
        batch = n_train
        notes.append(f"batch size clamped {cfg.sgd.batch_size} -> {n_train} (train-set size)")
    sgd_cfg = SgdConfig(learning_rate=cfg.sgd.learning_rate, momentum=cfg.sgd.momentum,
                        decay=cfg.sgd.decay, batch_size=batch)

    train_losses = []
    heldout_losses = []
    start_time = time.perf_counter()

    def partial_report(diverged):
        return TrainReport(
            train_losses=train_losses, heldout_losses=heldout_losses,
            wall_time_s=time.perf_counter() - start_time, checkpoint_path=None,
            config=cfg.to_dict(), notes=notes, diverged=diverged, params=params)

    try:
        for epoch in range(cfg.epochs):
            order = epoch_order(cfg.seed, epoch, n_train)
            epoch_loss = 0.0
            aux_means = {}
            for start in range(0, n_train, batch):
                idx = order[start:start + batch]
                loss, grads, aux = accumulate_batch(params, forward_loss, idx, cfg.micro_batch)
                sgd_step(params, grads, sgd_cfg)
                w = len(idx) / n_train
                epoch_loss += loss * w
                for key, v in aux.items():
                    aux_means[key] = aux_means.get(key, 0.0) + v * w
            train_losses.append(epoch_loss)
            heldout = heldout_loss() if heldout_loss is not None else epoch_loss
            if not np.isfinite(heldout):
                raise TrainingDiverged(f"non-finite held-out loss {heldout}")
            heldout_losses.append(heldout)
            if epoch_hook is not None:
                epoch_hook(epoch, aux_means)
    except (TrainingDiverged, FloatingPointError) as exc:
        wrapped = TrainingDiverged(f"{exc} (after {len(train_losses)} full epochs)")
        wrapped.report = partial_report(diverged=True)
        raise wrapped from exc
    return partial_report(diverged=False)
