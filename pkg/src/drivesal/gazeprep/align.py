"""Gaze-to-frame alignment: one fused gaze point per frame.

The reference is the most recent gaze sample at or before the frame
timestamp. The four samples immediately preceding the reference are
candidates; each is accepted iff it lies within a pixel threshold of the
reference. The result is a weighted mean with linearly decaying slot
weights, renormalized over the accepted slots.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from drivesal.errors import FrameDropped

ALIGN_WEIGHTS = (5.0, 4.0, 3.0, 2.0, 1.0)
THRESHOLD_REF_PX = 10.0
REFERENCE_EDGE = 227


@dataclass(frozen=True)
class AlignedGaze:
    frame_idx: int
    x: float
    y: float
    accepted_count: int

    def __post_init__(self):
        if not 1 <= self.accepted_count <= len(ALIGN_WEIGHTS):
            raise ValueError(f"accepted_count out of range: {self.accepted_count}")


def alignment_threshold(frame_width: int, threshold_ref: float = THRESHOLD_REF_PX) -> float:
    """Acceptance radius in pixels, scaled from the reference resolution."""
    return threshold_ref * frame_width / REFERENCE_EDGE


def align_gaze_to_frame(frame_t_ms: int, gaze_stream, frame_width: int,
                        frame_idx: int = 0,
                        weights=ALIGN_WEIGHTS,
                        threshold_ref: float = THRESHOLD_REF_PX) -> AlignedGaze:
    """Fuse the gaze samples leading up to one frame.

    gaze_stream must be sorted by t_ms ascending. Raises FrameDropped when
    no sample exists at or before frame_t_ms.
    """
    times = [g.t_ms for g in gaze_stream]
    xs = np.array([g.x for g in gaze_stream], dtype=np.float64)
    ys = np.array([g.y for g in gaze_stream], dtype=np.float64)
    return _align(frame_t_ms, np.asarray(times), xs, ys, frame_width, frame_idx,
                  weights, threshold_ref)


def _align(frame_t_ms, times, xs, ys, frame_width, frame_idx, weights, threshold_ref):
    ref = bisect.bisect_right(times, frame_t_ms) - 1
    if ref < 0:
        raise FrameDropped(f"frame {frame_idx} at t={frame_t_ms} ms precedes all gaze samples")
    threshold = alignment_threshold(frame_width, threshold_ref)
    acc_x, acc_y, acc_w = xs[ref] * weights[0], ys[ref] * weights[0], weights[0]
    count = 1
    for slot in range(1, len(weights)):
        i = ref - slot
        if i < 0:
            break
        dist = float(np.hypot(xs[i] - xs[ref], ys[i] - ys[ref]))
        if dist <= threshold:
            acc_x += xs[i] * weights[slot]
            acc_y += ys[i] * weights[slot]
            acc_w += weights[slot]
            count += 1
    return AlignedGaze(frame_idx=frame_idx, x=float(acc_x / acc_w), y=float(acc_y / acc_w),
                       accepted_count=count)


class GazeIndex:
    """Precomputed arrays for aligning many frames against one stream."""

    def __init__(self, gaze_stream):
        self.times = np.array([g.t_ms for g in gaze_stream], dtype=np.int64)
        self.xs = np.array([g.x for g in gaze_stream], dtype=np.float64)
        self.ys = np.array([g.y for g in gaze_stream], dtype=np.float64)

    def align(self, frame_t_ms, frame_width, frame_idx=0,
              weights=ALIGN_WEIGHTS, threshold_ref=THRESHOLD_REF_PX) -> AlignedGaze:
        return _align(frame_t_ms, self.times, self.xs, self.ys, frame_width,
                      frame_idx, weights, threshold_ref)
