"""The four training procedures.

All of them share the deterministic loop in core.fit; they differ only in
the forward graph and in which parameters the optimizer may touch. The
attention step freezes the driver net: its parameters are excluded from the
update set (and marked requires_grad=False), so they are bitwise identical
before and after.
"""

from __future__ import annotations

import os

import numpy as np

from drivesal.diffcore.losses import action_mse, attention_sparsity, cosine_loss, total_loss
from drivesal.diffcore.ops import reshape
from drivesal.diffcore.tensor import DiffTensor
from drivesal.errors import ConfigError
from drivesal.nets.checkpoint import load_checkpoint, save_checkpoint
from drivesal.nets.forward import agent_forward, net1_forward, roadsal_forward
from drivesal.nets.saliency_ops import incorporate_saliency, normalize_map, upsample_map
from drivesal.nets.specs import AgentSpec, Net1Spec, RoadSalSpec, init_params
from drivesal.trainer.core import TrainConfig, evaluate_in_chunks, fit
from drivesal.trainer.data import DriverData, saliency_arrays


def _finalize(report, out_dir, spec, role, cfg):
    if out_dir is not None:
        out_dir = os.fspath(out_dir)
        ckpt = os.path.join(out_dir, "checkpoint")
        meta = {"role": role, "seed": cfg.seed, "train_config_digest": cfg.digest()}
        save_checkpoint(spec, report.params, ckpt, meta)
        report.checkpoint_path = ckpt
        report.write_artifacts(out_dir)
        if cfg.curve_path:
            from drivesal.imio import atomic_write_bytes

            atomic_write_bytes(cfg.curve_path, report.curve_csv().encode())
    return report


def _load_net(source, expected_kind: str):
    """A checkpoint path or an in-memory (spec, params) pair."""
    if isinstance(source, tuple):
        spec, params = source
    else:
        spec, params, _meta = load_checkpoint(source)
    if spec.kind != expected_kind:
        raise ConfigError(f"expected a {expected_kind} checkpoint, got {spec.kind}")
    return spec, params


def train_roadsal(dataset, cfg: TrainConfig = TrainConfig(), out_dir=None,
                  spec: RoadSalSpec = None):
    """Supervised saliency: minimize cosine loss against gaze-derived maps."""
    spec = spec or RoadSalSpec()
    train_images, train_targets, test_images, test_targets = saliency_arrays(dataset)
    if train_targets.size and train_targets.shape[1] != spec.head_size:
        raise ConfigError(
            f"targets have {train_targets.shape[1]} values, predictor emits {spec.head_size}")
    params = init_params(spec, cfg.seed)

    def forward(idx, images=train_images, targets=train_targets):
        out = roadsal_forward(spec, params, images[idx])
        flat = reshape(out, (len(idx), -1))
        return cosine_loss(flat, DiffTensor(targets[idx])), {}

    heldout = None
    if len(test_images):
        def heldout():
            return evaluate_in_chunks(
                lambda idx: forward(idx, test_images, test_targets),
                len(test_images), cfg.micro_batch)

    report = fit(params, forward, len(train_images), cfg, heldout_loss=heldout)
    return _finalize(report, out_dir, spec, "roadsal", cfg)


def train_driver(data: DriverData, cfg: TrainConfig = TrainConfig(), out_dir=None,
                 spec: AgentSpec = None, role: str = "net2"):
    """Behavioral cloning: frames in, recorded oracle actions out."""
    spec = spec or AgentSpec()
    params = init_params(spec, cfg.seed)

    def forward(idx, images=data.images, actions=data.actions):
        out = agent_forward(spec, params, images[idx])
        return action_mse(out, DiffTensor(actions[idx])), {}

    heldout = None
    if data.heldout_images is not None and len(data.heldout_images):
        def heldout():
            return evaluate_in_chunks(
                lambda idx: forward(idx, data.heldout_images, data.heldout_actions),
                len(data.heldout_images), cfg.micro_batch)

    report = fit(params, forward, len(data.images), cfg, heldout_loss=heldout)
    return _finalize(report, out_dir, spec, role, cfg)


def train_attention_unsupervised(net2, data: DriverData,
                                 cfg: TrainConfig = TrainConfig(), out_dir=None,
                                 net1_spec: Net1Spec = None):
    """Sparse-attention step: only the attention net trains; the driver net
    is frozen and gradients flow through it into the attention map."""
    net2_spec, net2_params = _load_net(net2, "agent")
    for t in net2_params.tensors():
        t.requires_grad = False
    net1_spec = net1_spec or Net1Spec()
    params = init_params(net1_spec, cfg.seed)

    def forward(idx, images=data.images, actions=data.actions):
        imgs = images[idx]
        attention = net1_forward(net1_spec, params, imgs)
        masked = incorporate_saliency(DiffTensor(imgs), attention)
        predicted = agent_forward(net2_spec, net2_params, masked)
        loss1 = attention_sparsity(attention, cfg.sparsity_variant)
        loss2 = action_mse(predicted, DiffTensor(actions[idx]))
        combined = total_loss(loss1, loss2, cfg.lambda1, cfg.lambda2)
        aux = {"mean_attention": float(attention.values.mean()),
               "action_mse": float(loss2.values),
               "sparsity": float(loss1.values)}
        return combined, aux

    heldout = None
    if data.heldout_images is not None and len(data.heldout_images):
        def heldout():
            return evaluate_in_chunks(
                lambda idx: forward(idx, data.heldout_images, data.heldout_actions),
                len(data.heldout_images), cfg.micro_batch)

    per_epoch = {"mean_attention": [], "action_mse": [], "sparsity": []}

    def hook(_epoch, aux_means):
        for key, acc in per_epoch.items():
            acc.append(aux_means.get(key, float("nan")))

    report = fit(params, forward, len(data.images), cfg,
                 heldout_loss=heldout, epoch_hook=hook)
    report.extra.update({f"epoch_{k}": v for k, v in per_epoch.items()})

    # fresh pass with the final parameters, for the report and for tests
    final_att = 0.0
    final_mse = 0.0
    n = len(data.images)
    for start in range(0, n, cfg.micro_batch):
        idx = np.arange(start, min(start + cfg.micro_batch, n))
        _loss, aux = forward(idx)
        final_att += aux["mean_attention"] * len(idx) / n
        final_mse += aux["action_mse"] * len(idx) / n
    report.extra["final_mean_attention"] = final_att
    report.extra["final_action_mse"] = final_mse
    return _finalize(report, out_dir, net1_spec, "net1", cfg)


def _precompute_roadsal_inputs(roadsal_spec, roadsal_params, images, micro):
    """Model2 inputs: image x (normalized, upsampled) coarse saliency."""
    out = np.empty_like(images)
    size = images.shape[1]
    if roadsal_spec.input_size != size:
        raise ConfigError(
            f"saliency predictor expects {roadsal_spec.input_size}px frames, "
            f"agent data is {size}px")
    for start in range(0, len(images), micro):
        chunk = images[start:start + micro]
        raw = roadsal_forward(roadsal_spec, roadsal_params, chunk).values
        for j in range(len(chunk)):
            up = upsample_map(normalize_map(raw[j]), size, size).astype(np.float32)
            out[start + j] = chunk[j] * up[:, :, None]
    return out


def _precompute_net1_inputs(net1_spec, net1_params, images, micro):
    """Model3 inputs: image x attention map (already in (0,1))."""
    out = np.empty_like(images)
    for start in range(0, len(images), micro):
        chunk = images[start:start + micro]
        maps = net1_forward(net1_spec, net1_params, chunk).values.astype(np.float32)
        out[start:start + len(chunk)] = chunk * maps[:, :, :, None]
    return out


def train_agents(roadsal, net1, data: DriverData, cfg: TrainConfig = TrainConfig(),
                 out_dir=None, spec: AgentSpec = None):
    """Model1 (raw), Model2 (supervised saliency), Model3 (task attention):
    identical specs, seeds, and batch schedules; only the inputs differ."""
    roadsal_spec, roadsal_params = _load_net(roadsal, "roadsal")
    net1_spec, net1_params = _load_net(net1, "net1")
    spec = spec or AgentSpec()

    pipelines = {
        "model1": lambda imgs: imgs,
        "model2": lambda imgs: _precompute_roadsal_inputs(
            roadsal_spec, roadsal_params, imgs, cfg.micro_batch),
        "model3": lambda imgs: _precompute_net1_inputs(
            net1_spec, net1_params, imgs, cfg.micro_batch),
    }

    reports = {}
    for name, transform in pipelines.items():
        model_data = DriverData(
            images=transform(data.images),
            actions=data.actions,
            heldout_images=(transform(data.heldout_images)
                            if data.heldout_images is not None else None),
            heldout_actions=data.heldout_actions,
        )
        model_out = os.path.join(os.fspath(out_dir), name) if out_dir is not None else None
        reports[name] = train_driver(model_data, cfg, out_dir=model_out,
                                     spec=spec, role=name)
    return reports
