"""Turning recorded sessions into saliency training data.

Pipeline per frame: pick the gaze samples that precede the frame, reject the
frame if none landed close enough together, place a Gaussian at the weighted
gaze point, and emit (input image, coarse saliency map) pairs. Frames whose
gaze sits near the image center additionally yield four corner crops with the
gaze re-expressed in crop coordinates, which keeps the trained predictor from
collapsing onto the central bias of forward driving.
"""

from drivesal.gazeprep.align import (
    ALIGN_WEIGHTS,
    THRESHOLD_REF_PX,
    AlignedGaze,
    GazeIndex,
    align_gaze_to_frame,
    alignment_threshold,
)
from drivesal.gazeprep.augment import (
    CROP_TAGS,
    central_bias_augment,
    crop_anchors,
    crop_side,
    inverse_transform_gaze,
    transform_gaze,
)
from drivesal.gazeprep.dataset import (
    DatasetConfig,
    SaliencyDataset,
    SaliencySample,
    SessionSource,
    build_dataset,
    build_dataset_to_dir,
    generate_samples,
    load_sample,
    read_ids,
    read_manifest,
    split_groups,
    write_dataset,
)
from drivesal.gazeprep.saliency import (
    SIGMA_REF_PX,
    gaussian_saliency_map,
    is_central,
    scaled_sigma,
)

__all__ = [
    "ALIGN_WEIGHTS",
    "CROP_TAGS",
    "SIGMA_REF_PX",
    "THRESHOLD_REF_PX",
    "AlignedGaze",
    "DatasetConfig",
    "GazeIndex",
    "SaliencyDataset",
    "SaliencySample",
    "SessionSource",
    "align_gaze_to_frame",
    "alignment_threshold",
    "build_dataset",
    "build_dataset_to_dir",
    "central_bias_augment",
    "crop_anchors",
    "crop_side",
    "gaussian_saliency_map",
    "generate_samples",
    "inverse_transform_gaze",
    "is_central",
    "load_sample",
    "read_ids",
    "read_manifest",
    "scaled_sigma",
    "split_groups",
    "transform_gaze",
    "write_dataset",
]
