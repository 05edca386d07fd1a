"""Gaussian saliency targets and the central-region test."""

from __future__ import annotations

import numpy as np

SIGMA_REF_PX = 20.0
REFERENCE_EDGE = 227


def scaled_sigma(frame_width: int, sigma_ref: float = SIGMA_REF_PX) -> float:
    """Saliency spread in pixels at a given resolution."""
    return sigma_ref * frame_width / REFERENCE_EDGE


def gaussian_saliency_map(gaze_xy, sigma: float, width: int, height: int) -> np.ndarray:
    """Unnormalized Gaussian bump centered on the gaze point.

    Pixel (x, y) carries exp(-((x-mu_x)^2 + (y-mu_y)^2) / (2 sigma^2));
    the peak is 1 only when the gaze sits exactly on a pixel.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    mx, my = float(gaze_xy[0]), float(gaze_xy[1])
    dx2 = (np.arange(width, dtype=np.float64) - mx) ** 2
    dy2 = (np.arange(height, dtype=np.float64) - my) ** 2
    return np.exp(-(dx2[None, :] + dy2[:, None]) / (2.0 * sigma * sigma))


def is_central(gaze_xy, sigma: float, width: int, height: int) -> bool:
    """Inside (inclusive) the square of side 2*sigma centered on the frame."""
    cx, cy = width / 2.0, height / 2.0
    return abs(float(gaze_xy[0]) - cx) <= sigma and abs(float(gaze_xy[1]) - cy) <= sigma
