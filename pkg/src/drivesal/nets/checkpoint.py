"""Checkpoint directories: manifest.json + params.bin.

The manifest records the network kind, its spec fields, and the parameter
names/shapes in serialization order; params.bin is the concatenation of all
parameters as little-endian float32 in exactly that order. Both files are
written atomically and the whole round trip is bitwise lossless.
"""

from __future__ import annotations

import json
import os

import numpy as np

from drivesal.errors import CheckpointError
from drivesal.imio import atomic_write_bytes
from drivesal.nets.specs import spec_from_dict, zero_params

FORMAT_MAGIC = "drivesal-checkpoint"
FORMAT_VERSION = 1


def manifest_for(spec, meta=None) -> dict:
    return {
        "format": FORMAT_MAGIC,
        "version": FORMAT_VERSION,
        "kind": spec.kind,
        "spec": spec.to_dict(),
        "params": [{"name": n, "shape": list(s)} for n, s in spec.param_shapes()],
        "meta": dict(meta or {}),
    }


def save_checkpoint(spec, params, path, meta=None) -> None:
    from drivesal.nets.specs import check_params

    check_params(spec, params)
    path = os.fspath(path)
    os.makedirs(path, exist_ok=True)
    manifest = manifest_for(spec, meta)
    atomic_write_bytes(os.path.join(path, "manifest.json"),
                       (json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode())
    atomic_write_bytes(os.path.join(path, "params.bin"),
                       params.flat_values("<f4").tobytes())


def load_checkpoint(path):
    """Returns (spec, params, meta). Any malformation raises CheckpointError
    with a diagnostic naming the file and the mismatch."""
    path = os.fspath(path)
    manifest_path = os.path.join(path, "manifest.json")
    payload_path = os.path.join(path, "params.bin")
    try:
        with open(manifest_path, "rb") as f:
            manifest = json.loads(f.read().decode("utf-8"))
    except FileNotFoundError:
        raise CheckpointError(f"{manifest_path}: missing manifest") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{manifest_path}: malformed JSON ({exc})") from None

    if manifest.get("format") != FORMAT_MAGIC:
        raise CheckpointError(
            f"{manifest_path}: bad magic {manifest.get('format')!r}, "
            f"expected {FORMAT_MAGIC!r}")
    if manifest.get("version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{manifest_path}: unsupported version {manifest.get('version')!r}")
    try:
        spec = spec_from_dict(manifest["kind"], manifest["spec"])
    except KeyError as exc:
        raise CheckpointError(f"{manifest_path}: missing key {exc}") from None
    except Exception as exc:
        raise CheckpointError(f"{manifest_path}: invalid spec ({exc})") from None

    declared = [(p.get("name"), tuple(p.get("shape", []))) for p in manifest.get("params", [])]
    expected = [(n, s) for n, s in spec.param_shapes()]
    if declared != expected:
        raise CheckpointError(
            f"{manifest_path}: declared parameters {declared} do not match the "
            f"{spec.kind} spec {expected}")

    try:
        with open(payload_path, "rb") as f:
            blob = f.read()
    except FileNotFoundError:
        raise CheckpointError(f"{payload_path}: missing parameter payload") from None
    expected_values = sum(int(np.prod(s)) for _, s in expected)
    if len(blob) != 4 * expected_values:
        raise CheckpointError(
            f"{payload_path}: payload is {len(blob)} bytes, manifest declares "
            f"{expected_values} float32 values ({4 * expected_values} bytes)")

    params = zero_params(spec)
    flat = np.frombuffer(blob, dtype="<f4").astype(np.float32)
    params.load_flat_values(flat)
    return spec, params, manifest.get("meta", {})
