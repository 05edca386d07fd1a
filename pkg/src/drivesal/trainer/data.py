"""Array views of sessions and saliency datasets for the training loops."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from drivesal.gazeprep.dataset import SaliencyDataset, load_sample, read_ids
from drivesal.imio import bilinear_resize
from drivesal.simworld.session import load_frame, load_session


@dataclass
class DriverData:
    """Paired (frame, oracle action) arrays, with an optional held-out split."""

    images: np.ndarray  # (N, S, S, 3) float32 in [0, 1]
    actions: np.ndarray  # (N, 3) float32
    heldout_images: np.ndarray | None = None
    heldout_actions: np.ndarray | None = None

    def __post_init__(self):
        if len(self.images) != len(self.actions):
            raise ValueError(f"{len(self.images)} images vs {len(self.actions)} actions")
        if (self.heldout_images is None) != (self.heldout_actions is None):
            raise ValueError("held-out images and actions must come together")


def session_arrays(directory, input_size: int = 96):
    """All frames of an on-disk session as (images, actions) float32 arrays."""
    log = load_session(directory)
    n = len(log.frame_times)
    images = np.empty((n, input_size, input_size, 3), dtype=np.float32)
    actions = np.empty((n, 3), dtype=np.float32)
    for i in range(n):
        frame = load_frame(directory, i).astype(np.float32) / np.float32(255.0)
        if frame.shape[0] != input_size:
            frame = bilinear_resize(frame, input_size, input_size).astype(np.float32)
        images[i] = np.clip(frame, 0.0, 1.0)
        actions[i] = log.actions[i].as_vector()
    return images, actions


def load_driver_data(session_dirs, input_size: int = 96, heldout_dirs=None) -> DriverData:
    if isinstance(session_dirs, (str, os.PathLike)):
        session_dirs = [session_dirs]
    parts = [session_arrays(d, input_size) for d in session_dirs]
    images = np.concatenate([p[0] for p in parts])
    actions = np.concatenate([p[1] for p in parts])
    heldout_images = heldout_actions = None
    if heldout_dirs:
        if isinstance(heldout_dirs, (str, os.PathLike)):
            heldout_dirs = [heldout_dirs]
        held = [session_arrays(d, input_size) for d in heldout_dirs]
        heldout_images = np.concatenate([h[0] for h in held])
        heldout_actions = np.concatenate([h[1] for h in held])
    return DriverData(images, actions, heldout_images, heldout_actions)


def saliency_arrays(dataset):
    """(train_images, train_targets, test_images, test_targets) from either an
    in-memory SaliencyDataset or a dataset directory. Targets are flattened
    row-major to match the predictor's head."""
    if isinstance(dataset, SaliencyDataset):
        def stack(samples):
            if not samples:
                return (np.empty((0, 96, 96, 3), np.float32), np.empty((0, 0), np.float32))
            images = np.stack([s.image for s in samples]).astype(np.float32)
            targets = np.stack([s.target.reshape(-1) for s in samples]).astype(np.float32)
            return images, targets

        tr_i, tr_t = stack(dataset.train)
        te_i, te_t = stack(dataset.test)
        return tr_i, tr_t, te_i, te_t

    directory = os.fspath(dataset)

    def read(part):
        ids = read_ids(directory, part)
        images, targets = [], []
        for sid in ids:
            image, target = load_sample(directory, sid)
            images.append(image)
            targets.append(target.reshape(-1).astype(np.float32))
        if not ids:
            return np.empty((0, 96, 96, 3), np.float32), np.empty((0, 0), np.float32)
        return np.stack(images), np.stack(targets)

    tr_i, tr_t = read("train")
    te_i, te_t = read("test")
    return tr_i, tr_t, te_i, te_t
