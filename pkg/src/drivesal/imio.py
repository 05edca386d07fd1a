"""Image file IO and resampling shared across the pipeline.

Frames travel as 8-bit RGB PNGs; saliency targets as 16-bit binary PGMs
(maxval 65535, big-endian samples). Writes are atomic: temp file in the
destination directory, then rename.
"""

from __future__ import annotations

import io
import os
import tempfile

import numpy as np
from PIL import Image

from drivesal.errors import ShapeError

PGM_MAXVAL = 65535


def atomic_write_bytes(path, data):
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_png(image) -> bytes:
    """PNG bytes for an 8-bit image (H,W,3 RGB or H,W grayscale)."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.clip(np.round(arr), 0, 255).astype(np.uint8)
    if arr.ndim == 3 and arr.shape[2] == 3:
        mode = "RGB"
    elif arr.ndim == 2:
        mode = "L"
    else:
        raise ShapeError(f"expected (H,W,3) or (H,W) image, got {arr.shape}")
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def write_png(path, image):
    """Write an 8-bit image (H,W,3 RGB or H,W grayscale)."""
    atomic_write_bytes(path, encode_png(image))


def read_png(path):
    """Read a PNG as uint8 (H,W,3) for RGB or (H,W) for grayscale."""
    with Image.open(path) as img:
        if img.mode == "L":
            return np.asarray(img, dtype=np.uint8)
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def encode_pgm16(values):
    """Encode a (H,W) array of reals in [0,1] as 16-bit binary PGM bytes."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"expected (H,W) map, got {arr.shape}")
    if arr.min() < -1e-6 or arr.max() > 1.0 + 1e-6:
        raise ValueError(f"map values outside [0,1]: [{arr.min()}, {arr.max()}]")
    samples = np.round(np.clip(arr, 0.0, 1.0) * PGM_MAXVAL).astype(">u2")
    h, w = arr.shape
    header = f"P5\n{w} {h}\n{PGM_MAXVAL}\n".encode("ascii")
    return header + samples.tobytes()


def write_pgm16(path, values):
    atomic_write_bytes(path, encode_pgm16(values))


def _pgm_tokens(data):
    """Header tokens of a PGM, skipping whitespace and # comments."""
    i = 0
    while True:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise ValueError("truncated PGM header")
        yield data[start:i], i


def decode_pgm16(data):
    """Decode 16-bit binary PGM bytes to a float64 (H,W) map in [0,1]."""
    tokens = _pgm_tokens(data)
    magic, _ = next(tokens)
    if magic != b"P5":
        raise ValueError(f"not a binary PGM (magic {magic!r})")
    (w_tok, _), (h_tok, _), (max_tok, end) = next(tokens), next(tokens), next(tokens)
    w, h, maxval = int(w_tok), int(h_tok), int(max_tok)
    if maxval != PGM_MAXVAL:
        raise ValueError(f"expected maxval {PGM_MAXVAL}, got {maxval}")
    body = data[end + 1 :]
    expected = w * h * 2
    if len(body) != expected:
        raise ValueError(f"PGM body has {len(body)} bytes, expected {expected}")
    samples = np.frombuffer(body, dtype=">u2").reshape(h, w)
    return samples.astype(np.float64) / PGM_MAXVAL


def read_pgm16(path):
    with open(path, "rb") as f:
        return decode_pgm16(f.read())


def bilinear_resize(image, out_h, out_w):
    """Resize (H,W) or (H,W,C) real image by top-left-anchored bilinear.

    Source position of output pixel j is j * (src/dst), so when dst is an
    integer multiple of src every stride-th output copies a source sample
    exactly, and same-size resize is the identity.
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return bilinear_resize(arr[:, :, None], out_h, out_w)[:, :, 0]
    if arr.ndim != 3:
        raise ShapeError(f"expected (H,W) or (H,W,C), got {arr.shape}")
    h, w = arr.shape[:2]
    ys = np.arange(out_h) * (h / out_h)
    xs = np.arange(out_w) * (w / out_w)
    y0 = np.minimum(np.floor(ys).astype(int), h - 1)
    x0 = np.minimum(np.floor(xs).astype(int), w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    top = arr[y0][:, x0] * (1 - fx) + arr[y0][:, x1] * fx
    bot = arr[y1][:, x0] * (1 - fx) + arr[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy
