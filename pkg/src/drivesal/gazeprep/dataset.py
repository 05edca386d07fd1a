"""Saliency dataset assembly and the paired-file disk format.

Layout of a dataset directory:
    dataset.json      config, counts, split seed
    frame_000000.png  96x96 RGB input
    target_000000.pgm 48x48 16-bit grayscale, round(65535 * saliency)
    train.txt         sample ids, one per line
    test.txt
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from drivesal.errors import FrameDropped, SessionFormatError
from drivesal.gazeprep.align import ALIGN_WEIGHTS, THRESHOLD_REF_PX, GazeIndex
from drivesal.gazeprep.augment import central_bias_augment
from drivesal.gazeprep.saliency import SIGMA_REF_PX, gaussian_saliency_map, scaled_sigma
from drivesal.imio import atomic_write_bytes, bilinear_resize, read_pgm16, read_png, write_pgm16, write_png
from drivesal.simworld.session import load_frame
from drivesal.simworld.types import SessionLog


@dataclass(frozen=True)
class DatasetConfig:
    input_size: int = 96
    target_size: int = 48
    sigma_ref_px: float = SIGMA_REF_PX
    threshold_ref_px: float = THRESHOLD_REF_PX
    train_fraction: float = 0.8
    seed: int = 0
    augment: bool = True
    align_weights: tuple = ALIGN_WEIGHTS

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0,1), got {self.train_fraction}")
        if self.input_size <= 0 or self.target_size <= 0:
            raise ValueError("sizes must be positive")

    def to_dict(self):
        d = asdict(self)
        d["align_weights"] = list(self.align_weights)
        return d


@dataclass
class SaliencySample:
    image: np.ndarray  # (input, input, 3) float32 in [0,1]
    target: np.ndarray  # (target, target) float64 in [0,1]
    tag: str  # original | crop-corner-k
    group: tuple  # (session_idx, frame_idx); crops share their source's group


@dataclass
class SaliencyDataset:
    train: list
    test: list
    config: DatasetConfig
    dropped_frames: int = 0


class SessionSource:
    """A session plus a way to fetch its frame pixels as float [0,1]."""

    def __init__(self, log: SessionLog, directory=None):
        if log.frames is None and directory is None:
            raise ValueError("session has no in-memory frames and no directory")
        self.log = log
        self.directory = directory

    @classmethod
    def from_dir(cls, directory):
        from drivesal.simworld.session import load_session

        return cls(load_session(directory), directory)

    def frame(self, idx: int) -> np.ndarray:
        if self.log.frames is not None:
            return np.asarray(self.log.frames[idx].rgb, dtype=np.float64)
        return load_frame(self.directory, idx).astype(np.float64) / 255.0


def _as_source(s):
    return s if isinstance(s, SessionSource) else SessionSource(s)


def generate_samples(source, session_idx: int, config: DatasetConfig):
    """Samples for one session, as (list of SaliencySample, dropped count)."""
    src = _as_source(source)
    log = src.log
    width = log.meta.resolution
    sigma = scaled_sigma(width, config.sigma_ref_px)
    index = GazeIndex(log.gaze)
    out = []
    dropped = 0
    for frame_idx, t_ms in enumerate(log.frame_times):
        try:
            aligned = index.align(t_ms, width, frame_idx, config.align_weights,
                                  config.threshold_ref_px)
        except FrameDropped:
            dropped += 1
            continue
        image = src.frame(frame_idx)
        group = (session_idx, frame_idx)
        variants = [(image, (aligned.x, aligned.y), "original")]
        if config.augment:
            variants.extend(central_bias_augment(image, (aligned.x, aligned.y), sigma))
        for img, gaze, tag in variants:
            out.append(SaliencySample(
                image=_resize_input(img, config.input_size),
                target=_make_target(gaze, sigma, width, config.target_size),
                tag=tag,
                group=group,
            ))
    return out, dropped


def _resize_input(image, size):
    resized = image if image.shape[0] == size else bilinear_resize(image, size, size)
    return np.clip(resized, 0.0, 1.0).astype(np.float32)


def _make_target(gaze_xy, sigma, source_width, target_size):
    # targets are synthesized directly on the coarse grid, not downsampled
    scale = target_size / source_width
    return gaussian_saliency_map((gaze_xy[0] * scale, gaze_xy[1] * scale),
                                 sigma * scale, target_size, target_size)


def split_groups(samples, train_fraction: float, seed: int):
    """Group-preserving train/test split: a shuffled group prefix is cut at
    the point nearest the target train count, so augmented crops never
    straddle the split. Exact to the sample when group sizes are uniform."""
    groups = {}
    for i, s in enumerate(samples):
        groups.setdefault(s.group, []).append(i)
    order = sorted(groups.keys())
    rng = np.random.default_rng(seed)
    rng.shuffle(order)
    target = train_fraction * len(samples)
    best_cut, best_err, running = 0, abs(target), 0
    for k, g in enumerate(order, start=1):
        running += len(groups[g])
        err = abs(running - target)
        if err < best_err:
            best_cut, best_err = k, err
    train_groups = set(order[:best_cut])
    train_idx = [i for g in order[:best_cut] for i in groups[g]]
    test_idx = [i for g in order[best_cut:] for i in groups[g]]
    assert not train_groups & set(order[best_cut:])
    return train_idx, test_idx


def build_dataset(sessions, config: DatasetConfig = DatasetConfig()) -> SaliencyDataset:
    """Assemble an in-memory dataset from one or more sessions."""
    if not sessions:
        raise ValueError("at least one session required")
    samples = []
    dropped = 0
    for si, session in enumerate(sessions):
        got, d = generate_samples(session, si, config)
        samples.extend(got)
        dropped += d
    if not samples:
        raise ValueError("no usable frames: every frame lacked preceding gaze")
    train_idx, test_idx = split_groups(samples, config.train_fraction, config.seed)
    return SaliencyDataset(train=[samples[i] for i in train_idx],
                           test=[samples[i] for i in test_idx],
                           config=config, dropped_frames=dropped)


# ------------------------------------------------------------------- disk IO


def write_dataset(dataset: SaliencyDataset, directory) -> None:
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    ids = {"train": [], "test": []}
    next_id = 0
    for part in ("train", "test"):
        for sample in getattr(dataset, part):
            sid = f"{next_id:06d}"
            write_png(os.path.join(directory, f"frame_{sid}.png"),
                      np.round(sample.image * 255.0).astype(np.uint8))
            write_pgm16(os.path.join(directory, f"target_{sid}.pgm"), sample.target)
            ids[part].append(sid)
            next_id += 1
    for part in ("train", "test"):
        atomic_write_bytes(os.path.join(directory, f"{part}.txt"),
                           ("\n".join(ids[part]) + "\n").encode() if ids[part] else b"")
    manifest = {
        "config": dataset.config.to_dict(),
        "counts": {"train": len(dataset.train), "test": len(dataset.test),
                   "total": len(dataset.train) + len(dataset.test),
                   "dropped_frames": dataset.dropped_frames},
        "split_seed": dataset.config.seed,
    }
    atomic_write_bytes(os.path.join(directory, "dataset.json"),
                       (json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode())


def build_dataset_to_dir(sessions, directory, config: DatasetConfig = DatasetConfig()):
    """Streaming builder: samples go to disk as they are generated, so peak
    memory stays one frame's worth regardless of session length."""
    if not sessions:
        raise ValueError("at least one session required")
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    groups = []  # group key per written sample id
    dropped = 0
    next_id = 0
    for si, session in enumerate(sessions):
        src = _as_source(session)
        log = src.log
        width = log.meta.resolution
        sigma = scaled_sigma(width, config.sigma_ref_px)
        index = GazeIndex(log.gaze)
        for frame_idx, t_ms in enumerate(log.frame_times):
            try:
                aligned = index.align(t_ms, width, frame_idx, config.align_weights,
                                      config.threshold_ref_px)
            except FrameDropped:
                dropped += 1
                continue
            image = src.frame(frame_idx)
            variants = [(image, (aligned.x, aligned.y), "original")]
            if config.augment:
                variants.extend(central_bias_augment(image, (aligned.x, aligned.y), sigma))
            for img, gaze, _tag in variants:
                sid = f"{next_id:06d}"
                write_png(os.path.join(directory, f"frame_{sid}.png"),
                          np.round(_resize_input(img, config.input_size) * 255.0
                                   ).astype(np.uint8))
                write_pgm16(os.path.join(directory, f"target_{sid}.pgm"),
                            _make_target(gaze, sigma, width, config.target_size))
                groups.append((si, frame_idx))
                next_id += 1
    if next_id == 0:
        raise ValueError("no usable frames: every frame lacked preceding gaze")

    class _Stub:
        def __init__(self, group):
            self.group = group

    train_idx, test_idx = split_groups([_Stub(g) for g in groups],
                                       config.train_fraction, config.seed)
    for part, idx in (("train", train_idx), ("test", test_idx)):
        atomic_write_bytes(os.path.join(directory, f"{part}.txt"),
                           ("\n".join(f"{i:06d}" for i in idx) + "\n").encode() if idx else b"")
    manifest = {
        "config": config.to_dict(),
        "counts": {"train": len(train_idx), "test": len(test_idx), "total": next_id,
                   "dropped_frames": dropped},
        "split_seed": config.seed,
    }
    atomic_write_bytes(os.path.join(directory, "dataset.json"),
                       (json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode())
    return {"train": len(train_idx), "test": len(test_idx), "dropped_frames": dropped}


def read_manifest(directory):
    path = os.path.join(os.fspath(directory), "dataset.json")
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError:
        raise SessionFormatError(f"missing dataset.json in {directory}") from None
    except json.JSONDecodeError as exc:
        raise SessionFormatError(f"malformed dataset.json: {exc}") from None


def read_ids(directory, part: str):
    path = os.path.join(os.fspath(directory), f"{part}.txt")
    try:
        with open(path) as f:
            return [line.strip() for line in f if line.strip()]
    except FileNotFoundError:
        raise SessionFormatError(f"missing {part}.txt in {directory}") from None


def load_sample(directory, sample_id: str):
    """One (image, target) pair as float arrays."""
    directory = os.fspath(directory)
    image = read_png(os.path.join(directory, f"frame_{sample_id}.png"))
    target = read_pgm16(os.path.join(directory, f"target_{sample_id}.pgm"))
    return image.astype(np.float32) / np.float32(255.0), target
