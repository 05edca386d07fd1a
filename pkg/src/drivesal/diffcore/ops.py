"""Differentiable operators: convolution, pooling, dense, activations.

All spatial operators accept either a single sample (H, W, C) or a batch
(N, H, W, C); vector operators accept (n,) or (N, n). Stride is fixed at 1
and pooling windows at 2x2. Tie-breaking in max operations is first element
in scan order, so backward is deterministic.
"""

from __future__ import annotations

import numpy as np

from drivesal.diffcore.tensor import DiffTensor
from drivesal.errors import ShapeError

_PADDINGS = ("valid", "same", "same_periodic")


def _batched(values, rank):
    """Return (array with leading batch axis, had_batch flag)."""
    if values.ndim == rank:
        return values[None, ...], False
    if values.ndim == rank + 1:
        return values, True
    raise ShapeError(f"expected rank {rank} or {rank + 1}, got shape {values.shape}")


def _pad_amounts(kh, kw):
    pt = (kh - 1) // 2
    pl = (kw - 1) // 2
    return pt, kh - 1 - pt, pl, kw - 1 - pl


def _im2col(xp, kh, kw):
    """(N, Hp, Wp, C) -> (N*OH*OW, kh*kw*C) patch matrix, plus (OH, OW)."""
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    n, oh, ow = win.shape[:3]
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(n * oh * ow, kh * kw * xp.shape[3])
    return cols, oh, ow


def _conv_valid(xp, k):
    kh, kw, c, f = k.shape
    cols, oh, ow = _im2col(xp, kh, kw)
    out = cols @ k.reshape(kh * kw * c, f)
    return out.reshape(xp.shape[0], oh, ow, f)


def conv2d(x, kernels, bias, padding="valid"):
    """2D convolution (cross-correlation), stride 1.

    Args:
        x: DiffTensor (H, W, C) or (N, H, W, C), kernels (kh, kw, C, F),
           bias (F,).
        padding: "valid", "same" (zero pad), or "same_periodic" (wrap pad,
            a test mode used to check shift equivariance exactly).
    """
    if padding not in _PADDINGS:
        raise ValueError(f"unknown padding {padding!r}")
    kv = kernels.values
    if kv.ndim != 4:
        raise ShapeError(f"kernels must be (kh, kw, C, F), got {kv.shape}")
    kh, kw, kc, f = kv.shape
    bv = bias.values
    if bv.shape != (f,):
        raise ShapeError(f"bias shape {bv.shape} does not match kernel count ({f},)")
    xb, had_batch = _batched(x.values, 3)
    n, h, w, c = xb.shape
    if c != kc:
        raise ShapeError(f"input channels {xb.shape} do not match kernels {kv.shape}")

    if padding == "valid":
        pt = pb = pl = pr = 0
        xp = xb
    else:
        pt, pb, pl, pr = _pad_amounts(kh, kw)
        mode = "constant" if padding == "same" else "wrap"
        xp = np.pad(xb, ((0, 0), (pt, pb), (pl, pr), (0, 0)), mode=mode)
    if kh > xp.shape[1] or kw > xp.shape[2]:
        raise ShapeError(f"kernel {kv.shape} larger than padded input {xp.shape}")

    out = _conv_valid(xp, kv) + bv
    if not had_batch:
        out = out[0]

    def backward(g):
        gb = g if had_batch else g[None, ...]
        grad_bias = gb.sum(axis=(0, 1, 2))
        # kernel gradient: correlate stored padded input with output grad
        cols, oh, ow = _im2col(xp, kh, kw)
        grad_k = (cols.T @ gb.reshape(n * oh * ow, f)).reshape(kh, kw, c, f)
        # input gradient: full conv of output grad with flipped kernels
        gp = np.pad(gb, ((0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1), (0, 0)))
        kf = kv[::-1, ::-1].transpose(0, 1, 3, 2)  # (kh, kw, F, C)
        gx_pad = _conv_valid(gp, np.ascontiguousarray(kf))
        gx = _unpad_grad(gx_pad, pt, pb, pl, pr, h, w, periodic=(padding == "same_periodic"))
        if not had_batch:
            gx = gx[0]
        return gx, grad_k, grad_bias

    return DiffTensor(out, _parents=(x, kernels, bias), _backward_fn=backward)


def _unpad_grad(gp, pt, pb, pl, pr, h, w, periodic):
    """Crop a padded-input gradient; fold wrapped borders back for periodic."""
    if pt == pb == pl == pr == 0:
        return gp
    if not periodic:
        return gp[:, pt:pt + h, pl:pl + w, :]
    tmp = gp[:, pt:pt + h, :, :].copy()
    if pt:
        tmp[:, h - pt:, :, :] += gp[:, :pt, :, :]
    if pb:
        tmp[:, :pb, :, :] += gp[:, pt + h:, :, :]
    out = tmp[:, :, pl:pl + w, :].copy()
    if pl:
        out[:, :, w - pl:, :] += tmp[:, :, :pl, :]
    if pr:
        out[:, :, :pr, :] += tmp[:, :, pl + w:, :]
    return out


def maxpool2x2(x):
    """2x2 max pooling; backward routes to the first-scan-order argmax."""
    xb, had_batch = _batched(x.values, 3)
    n, h, w, c = xb.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2x2 requires even spatial dims, got {x.values.shape}")
    oh, ow = h // 2, w // 2
    windows = xb.reshape(n, oh, 2, ow, 2, c).transpose(0, 1, 3, 2, 4, 5).reshape(n, oh, ow, 4, c)
    winner = windows.argmax(axis=3)
    out = np.take_along_axis(windows, winner[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    if not had_batch:
        out = out[0]

    def backward(g):
        gb = g if had_batch else g[None, ...]
        scattered = np.zeros((n, oh, ow, 4, c), dtype=gb.dtype)
        np.put_along_axis(scattered, winner[:, :, :, None, :], gb[:, :, :, None, :], axis=3)
        gx = scattered.reshape(n, oh, ow, 2, 2, c).transpose(0, 1, 3, 2, 4, 5).reshape(n, h, w, c)
        if not had_batch:
            gx = gx[0]
        return (gx,)

    return DiffTensor(out, _parents=(x,), _backward_fn=backward)


def relu(x):
    mask = x.values > 0
    return DiffTensor(np.where(mask, x.values, 0.0), _parents=(x,),
                      _backward_fn=lambda g: (g * mask,))


def sigmoid(x):
    v = x.values
    s = np.empty_like(v)
    pos = v >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    s[~pos] = ev / (1.0 + ev)
    return DiffTensor(s, _parents=(x,), _backward_fn=lambda g: (g * s * (1.0 - s),))


def apply_activation(kind, x):
    """Elementwise activation: relu, sigmoid, or linear (identity)."""
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "linear":
        return DiffTensor(x.values, _parents=(x,), _backward_fn=lambda g: (g,))
    raise ValueError(f"unknown activation {kind!r}")


def dense(x, weights, bias):
    """Affine map: out_j = sum_i x_i W_ij + b_j."""
    wv, bv = weights.values, bias.values
    if wv.ndim != 2 or bv.shape != (wv.shape[1],):
        raise ShapeError(f"dense weights {wv.shape} / bias {bv.shape} inconsistent")
    xb, had_batch = _batched(x.values, 1)
    if xb.shape[1] != wv.shape[0]:
        raise ShapeError(f"dense input {x.values.shape} does not match weights {wv.shape}")
    out = xb @ wv + bv
    if not had_batch:
        out = out[0]

    def backward(g):
        gb = g if had_batch else g[None, ...]
        gx = gb @ wv.T
        gw = xb.T @ gb
        gbias = gb.sum(axis=0)
        if not had_batch:
            gx = gx[0]
        return gx, gw, gbias

    return DiffTensor(out, _parents=(x, weights, bias), _backward_fn=backward)


def pairwise_max(x):
    """Max over adjacent disjoint pairs (2i, 2i+1) in flatten order."""
    xb, had_batch = _batched(x.values, 1)
    n, length = xb.shape
    if length % 2:
        raise ShapeError(f"pairwise_max requires even length, got {x.values.shape}")
    pairs = xb.reshape(n, length // 2, 2)
    winner = pairs.argmax(axis=2)
    out = np.take_along_axis(pairs, winner[:, :, None], axis=2)[:, :, 0]
    if not had_batch:
        out = out[0]

    def backward(g):
        gb = g if had_batch else g[None, ...]
        scattered = np.zeros_like(pairs)
        np.put_along_axis(scattered, winner[:, :, None], gb[:, :, None], axis=2)
        gx = scattered.reshape(n, length)
        if not had_batch:
            gx = gx[0]
        return (gx,)

    return DiffTensor(out, _parents=(x,), _backward_fn=backward)


def elementwise_mul(a, b):
    """Elementwise product; a saliency map (H, W) broadcasts across the
    channel axis of an image (H, W, C), batched or not."""
    av, bv = a.values, b.values
    if av.shape == bv.shape:
        out = av * bv

        def backward(g):
            return g * bv, g * av
    elif av.ndim == bv.ndim + 1 and av.shape[:-1] == bv.shape:
        out = av * bv[..., None]

        def backward(g):
            return g * bv[..., None], (g * av).sum(axis=-1)
    else:
        raise ShapeError(f"elementwise_mul shapes incompatible: {av.shape} vs {bv.shape}")

    return DiffTensor(out, _parents=(a, b), _backward_fn=backward)


def reshape(x, shape):
    old = x.values.shape
    return DiffTensor(x.values.reshape(shape), _parents=(x,),
                      _backward_fn=lambda g: (g.reshape(old),))


def flatten_spatial(x):
    """(H, W, C) -> (H*W*C,) in row-major order; batched keeps axis 0."""
    v = x.values
    if v.ndim == 4:
        return reshape(x, (v.shape[0], -1))
    return reshape(x, (-1,))
