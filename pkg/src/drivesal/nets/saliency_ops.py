"""Map plumbing between the saliency predictors and the driving agents:
normalization of raw linear outputs, upsampling to agent resolution, and
the multiplicative incorporation into an image."""

from __future__ import annotations

import numpy as np

from drivesal.diffcore.ops import elementwise_mul
from drivesal.diffcore.tensor import DiffTensor
from drivesal.errors import ShapeError
from drivesal.imio import bilinear_resize

NORMALIZE_EPS = 1e-6


def normalize_map(raw) -> np.ndarray:
    """Clamp negatives to zero, scale so the max is 1 (epsilon-guarded)."""
    v = np.asarray(raw, dtype=np.float64)
    clipped = np.maximum(v, 0.0)
    return clipped / max(float(clipped.max()), NORMALIZE_EPS)


def upsample_map(saliency, target_h: int, target_w: int) -> np.ndarray:
    """Bilinear upsample; shrinking is refused (targets are never coarser
    than the predictor output in this pipeline)."""
    v = np.asarray(saliency, dtype=np.float64)
    if v.ndim != 2:
        raise ShapeError(f"saliency map must be 2D, got {v.shape}")
    h, w = v.shape
    if target_h < h or target_w < w:
        raise ShapeError(f"cannot upsample {v.shape} down to ({target_h}, {target_w})")
    if (target_h, target_w) == (h, w):
        return v.copy()
    return bilinear_resize(v, target_h, target_w)


def incorporate_saliency(image, saliency) -> DiffTensor:
    """Per-channel multiply of an image by a saliency map; differentiable
    through both operands."""
    img = image if isinstance(image, DiffTensor) else DiffTensor(image, requires_grad=False)
    sal = saliency if isinstance(saliency, DiffTensor) else DiffTensor(saliency, requires_grad=False)
    iv, sv = img.values, sal.values
    if not (iv.ndim == sv.ndim + 1 and iv.shape[:-1] == sv.shape):
        raise ShapeError(f"image {iv.shape} and saliency {sv.shape} do not align")
    return elementwise_mul(img, sal)
