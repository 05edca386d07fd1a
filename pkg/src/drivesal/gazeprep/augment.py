"""Central-bias correction: corner crops of centrally-fixated frames.

A frame whose gaze falls in the central square spawns four corner-anchored
square crops of side S = width - 2*sigma, each rescaled back to the full
resolution. The same affine map moves the gaze point, which by
construction lands outside the central square, so the augmented set no
longer over-represents central fixations.
"""

from __future__ import annotations

import numpy as np

from drivesal.imio import bilinear_resize
from drivesal.gazeprep.saliency import is_central

CROP_TAGS = ("crop-corner-0", "crop-corner-1", "crop-corner-2", "crop-corner-3")


def crop_side(width: int, sigma: float) -> int:
    side = int(round(width - 2.0 * sigma))
    if side <= 0:
        raise ValueError(f"crop side {side} <= 0 for width {width}, sigma {sigma}")
    return side


def crop_anchors(width: int, height: int, side: int):
    """Top-left corners of the four corner-anchored crops."""
    return ((0, 0), (width - side, 0), (0, height - side), (width - side, height - side))


def transform_gaze(gaze_xy, anchor, side: int, width: int, height: int):
    """Crop+rescale affine map applied to a gaze point."""
    ox, oy = anchor
    return ((gaze_xy[0] - ox) * width / side, (gaze_xy[1] - oy) * height / side)


def inverse_transform_gaze(gaze_xy, anchor, side: int, width: int, height: int):
    ox, oy = anchor
    return (gaze_xy[0] * side / width + ox, gaze_xy[1] * side / height + oy)


def central_bias_augment(image: np.ndarray, gaze_xy, sigma: float):
    """Corner crops for a centrally-fixated frame.

    Returns a list of (image, gaze_xy, tag) at the original resolution;
    empty when the gaze is not central. Crops that would lose the gaze
    point are skipped.
    """
    height, width = image.shape[:2]
    if not is_central(gaze_xy, sigma, width, height):
        return []
    side = crop_side(width, sigma)
    out = []
    for tag, (ox, oy) in zip(CROP_TAGS, crop_anchors(width, height, side)):
        gx, gy = gaze_xy[0] - ox, gaze_xy[1] - oy
        if not (0 <= gx < side and 0 <= gy < side):
            continue
        crop = image[oy:oy + side, ox:ox + side]
        rescaled = bilinear_resize(crop, height, width)
        out.append((rescaled, transform_gaze(gaze_xy, (ox, oy), side, width, height), tag))
    return out
