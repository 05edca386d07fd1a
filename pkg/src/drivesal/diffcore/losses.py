"""Loss functions. Each returns a scalar DiffTensor; batched inputs are
averaged over the batch so gradients match the single-sample definitions."""

from __future__ import annotations

import numpy as np

from drivesal.diffcore.tensor import DiffTensor, as_tensor
from drivesal.errors import ShapeError

ZERO_NORM_EPS = 1e-12


def cosine_loss(psm, asm):
    """Negative cosine similarity between flattened predicted and target maps.

    Value lies in [-1, 1]; -1 means the prediction is a positive multiple of
    the target. A prediction with near-zero norm (< 1e-12) contributes loss 0
    with zero gradient; a zero-norm *target* is an ill-posed sample and is
    rejected.
    """
    psm = as_tensor(psm)
    asm = as_tensor(asm)
    p = psm.values.reshape(1, -1) if psm.values.ndim == 1 else psm.values
    a = asm.values.reshape(1, -1) if asm.values.ndim == 1 else asm.values
    if p.shape != a.shape:
        raise ShapeError(f"cosine_loss shapes differ: {psm.values.shape} vs {asm.values.shape}")
    n = p.shape[0]

    a_norm = np.linalg.norm(a, axis=1)
    if np.any(a_norm <= 0):
        raise ValueError("cosine_loss: target map has zero norm (ill-posed)")
    p_norm = np.linalg.norm(p, axis=1)
    live = p_norm >= ZERO_NORM_EPS
    safe_p_norm = np.where(live, p_norm, 1.0)

    dots = np.einsum("ij,ij->i", p, a)
    per_sample = np.where(live, -dots / (safe_p_norm * a_norm), 0.0)
    value = per_sample.mean()

    def backward(g):
        scale = g.reshape(()) / n
        # d/dp [-p.a/(|p||a|)] = -a/(|p||a|) + (p.a) p / (|p|^3 |a|)
        coef_a = -1.0 / (safe_p_norm * a_norm)
        coef_p = dots / (safe_p_norm ** 3 * a_norm)
        gp = coef_a[:, None] * a + coef_p[:, None] * p
        gp = np.where(live[:, None], gp, 0.0) * scale
        return (gp.reshape(psm.values.shape), None)

    return DiffTensor(np.asarray(value), _parents=(psm, asm), _backward_fn=backward)


def action_mse(pred, truth):
    """Mean squared error over the three actuator values, batch-averaged."""
    pred = as_tensor(pred)
    truth = as_tensor(truth)
    p = pred.values.reshape(1, -1) if pred.values.ndim == 1 else pred.values
    t = truth.values.reshape(1, -1) if truth.values.ndim == 1 else truth.values
    if p.shape != t.shape:
        raise ShapeError(f"action_mse shapes differ: {pred.values.shape} vs {truth.values.shape}")
    n, width = p.shape
    diff = p - t
    value = (diff ** 2).sum() / (n * width)

    def backward(g):
        gp = (2.0 / (n * width)) * diff * g.reshape(())
        return (gp.reshape(pred.values.shape), None)

    return DiffTensor(np.asarray(value), _parents=(pred, truth), _backward_fn=backward)


def attention_sparsity(attention_map, variant="squared"):
    """Attention-volume penalty: mean of squared (default) or raw map values.

    Map values must already lie in [0, 1] (tolerance 1e-6); both variants are
    minimized by the all-zero map.
    """
    if variant not in ("squared", "linear"):
        raise ValueError(f"unknown sparsity variant {variant!r}")
    attention_map = as_tensor(attention_map)
    v = attention_map.values
    if v.min() < -1e-6 or v.max() > 1.0 + 1e-6:
        raise ValueError(
            f"attention_sparsity: map values outside [0, 1] (range [{v.min()}, {v.max()}])")
    size = v.size
    if variant == "squared":
        value = (v ** 2).sum() / size

        def backward(g):
            return ((2.0 / size) * v * g.reshape(()), )
    else:
        value = v.sum() / size

        def backward(g):
            return (np.full_like(v, 1.0 / size) * g.reshape(()), )

    return DiffTensor(np.asarray(value), _parents=(attention_map,), _backward_fn=backward)


def total_loss(loss1, loss2, weight1, weight2):
    """Weighted sum of the sparsity and action losses."""
    if weight1 < 0 or weight2 < 0:
        raise ValueError("loss weights must be nonnegative")
    if weight1 == 0 and weight2 == 0:
        raise ValueError("loss weights must not both be zero")
    loss1 = as_tensor(loss1)
    loss2 = as_tensor(loss2)
    value = weight1 * loss1.values + weight2 * loss2.values

    def backward(g):
        return (weight1 * g, weight2 * g)

    return DiffTensor(value, _parents=(loss1, loss2), _backward_fn=backward)
