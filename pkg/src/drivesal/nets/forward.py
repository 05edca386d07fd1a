"""Forward passes. All three accept a single image (H, W, C) or a batch
(N, H, W, C), as numpy arrays or DiffTensors, and return a DiffTensor so
gradients can flow when the input participates in a larger graph."""

from __future__ import annotations

import numpy as np

from drivesal.diffcore.ops import (
    conv2d,
    dense,
    flatten_spatial,
    maxpool2x2,
    pairwise_max,
    relu,
    reshape,
    sigmoid,
)
from drivesal.diffcore.tensor import DiffTensor
from drivesal.errors import ShapeError
from drivesal.nets.specs import check_params
from drivesal.simworld.types import DrivingAction


def _as_input(image, spec, fixed_size=True) -> DiffTensor:
    t = image if isinstance(image, DiffTensor) else DiffTensor(image, requires_grad=False)
    v = t.values
    if v.ndim not in (3, 4):
        raise ShapeError(f"image must be (H, W, C) or (N, H, W, C), got {v.shape}")
    h, w, c = v.shape[-3], v.shape[-2], v.shape[-1]
    if h != w:
        raise ShapeError(f"images must be square, got {v.shape}")
    if c != spec.in_channels:
        raise ShapeError(f"expected {spec.in_channels} channels, got {v.shape}")
    if fixed_size and h != spec.input_size:
        raise ShapeError(f"{spec.kind} expects {spec.input_size}px input, got {v.shape}")
    return t


def roadsal_forward(spec, params, image) -> DiffTensor:
    """Raw coarse saliency, (48, 48) per image; linear head, unbounded."""
    check_params(spec, params)
    x = _as_input(image, spec)
    batched = x.values.ndim == 4
    for i in range(1, 4):
        x = conv2d(x, params[f"conv{i}_w"], params[f"conv{i}_b"], padding="same")
        x = relu(x)
        x = maxpool2x2(x)
    x = flatten_spatial(x)
    x = pairwise_max(x)
    x = dense(x, params["dense_w"], params["dense_b"])
    s = spec.output_size
    return reshape(x, (-1, s, s)) if batched else reshape(x, (s, s))


def net1_forward(spec, params, image) -> DiffTensor:
    """Attention map in (0,1), same spatial size as the input."""
    check_params(spec, params)
    x = _as_input(image, spec, fixed_size=False)
    batched = x.values.ndim == 4
    size = x.values.shape[-2]
    n_layers = len(spec.widths)
    for i in range(1, n_layers + 1):
        x = conv2d(x, params[f"conv{i}_w"], params[f"conv{i}_b"], padding=spec.padding)
        x = relu(x) if i < n_layers else sigmoid(x)
    return reshape(x, (-1, size, size)) if batched else reshape(x, (size, size))


def agent_forward(spec, params, image) -> DiffTensor:
    """Raw action triple(s): (3,) per image, unclamped."""
    check_params(spec, params)
    x = _as_input(image, spec)
    for i in range(1, 4):
        x = conv2d(x, params[f"conv{i}_w"], params[f"conv{i}_b"], padding="same")
        x = relu(x)
        x = maxpool2x2(x)
    x = flatten_spatial(x)
    x = relu(dense(x, params["dense1_w"], params["dense1_b"]))
    return dense(x, params["dense2_w"], params["dense2_b"])


def action_from_output(vec) -> DrivingAction:
    """Deployment semantics: clamp the raw network output into actuator range."""
    v = np.asarray(vec.values if isinstance(vec, DiffTensor) else vec, dtype=np.float64)
    if v.shape != (3,):
        raise ShapeError(f"action vector must have 3 entries, got {v.shape}")
    return DrivingAction(steering=float(v[0]), throttle=float(v[1]), brake=float(v[2]))
