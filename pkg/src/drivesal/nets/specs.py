"""Network architectures: parameter declarations, validation, initialization.

Each spec lists its parameters as (name, shape) pairs in a fixed order; that
order is the ParamSet insertion order and therefore the checkpoint
serialization order, so it must depend on nothing but the spec itself.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from drivesal.diffcore.optim import ParamSet
from drivesal.errors import ConfigError


@dataclass(frozen=True)
class RoadSalSpec:
    """Supervised saliency predictor: three conv+pool blocks, a pairwise-max
    halving, and a linear head reshaped to a coarse map."""

    kind = "roadsal"
    input_size: int = 96
    in_channels: int = 3
    channels: tuple = (16, 24, 32)
    kernels: tuple = (5, 3, 3)

    def __post_init__(self):
        if len(self.channels) != 3 or len(self.kernels) != 3:
            raise ConfigError("roadsal needs exactly three conv blocks")
        if self.channels[2] != 32:
            raise ConfigError(
                f"third block must emit 32 channels so the head width is "
                f"2304, got {self.channels[2]}")
        if any(c < 1 for c in self.channels) or any(k < 1 for k in self.kernels):
            raise ConfigError("channel widths and kernel sizes must be positive")
        if self.input_size % 8 != 0:
            raise ConfigError(f"input size must survive three 2x2 pools, got {self.input_size}")
        if self.output_size * self.output_size * 2 != self.flat_size:
            raise ConfigError(f"flatten length {self.flat_size} does not halve to a square map")

    @property
    def pooled_size(self) -> int:
        return self.input_size // 8

    @property
    def flat_size(self) -> int:
        return self.pooled_size * self.pooled_size * self.channels[2]

    @property
    def head_size(self) -> int:
        return self.flat_size // 2

    @property
    def output_size(self) -> int:
        return int(round(np.sqrt(self.flat_size / 2)))

    def param_shapes(self):
        shapes = []
        prev = self.in_channels
        for i, (c, k) in enumerate(zip(self.channels, self.kernels), start=1):
            shapes.append((f"conv{i}_w", (k, k, prev, c)))
            shapes.append((f"conv{i}_b", (c,)))
            prev = c
        shapes.append(("dense_w", (self.head_size, self.head_size)))
        shapes.append(("dense_b", (self.head_size,)))
        return shapes

    def to_dict(self):
        d = asdict(self)
        d["channels"] = list(self.channels)
        d["kernels"] = list(self.kernels)
        return d


@dataclass(frozen=True)
class Net1Spec:
    """Fully convolutional attention predictor: same spatial size in and out,
    single sigmoid channel. `padding` exists so shift-equivariance can be
    checked exactly with periodic wrapping; training uses zero padding."""

    kind = "net1"
    in_channels: int = 3
    widths: tuple = (16, 16, 16, 1)
    kernel: int = 3
    padding: str = "same"

    def __post_init__(self):
        if not self.widths or self.widths[-1] != 1:
            raise ConfigError(f"final conv must emit one channel, got widths {self.widths}")
        if any(w < 1 for w in self.widths) or self.kernel < 1:
            raise ConfigError("widths and kernel size must be positive")
        if self.padding not in ("same", "same_periodic"):
            raise ConfigError(f"padding must be same|same_periodic, got {self.padding!r}")

    def param_shapes(self):
        shapes = []
        prev = self.in_channels
        for i, w in enumerate(self.widths, start=1):
            shapes.append((f"conv{i}_w", (self.kernel, self.kernel, prev, w)))
            shapes.append((f"conv{i}_b", (w,)))
            prev = w
        return shapes

    def to_dict(self):
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d


@dataclass(frozen=True)
class AgentSpec:
    """Driving policy network: three conv+pool blocks and a two-layer head
    emitting (steering, throttle, brake). Net2 and Model1/2/3 all use this
    spec so their comparison is architecture-controlled."""

    kind = "agent"
    input_size: int = 96
    in_channels: int = 3
    channels: tuple = (8, 16, 32)
    kernels: tuple = (5, 3, 3)
    hidden: int = 64
    outputs: int = 3

    def __post_init__(self):
        if len(self.channels) != 3 or len(self.kernels) != 3:
            raise ConfigError("agent needs exactly three conv blocks")
        if self.input_size % 8 != 0:
            raise ConfigError(f"input size must survive three 2x2 pools, got {self.input_size}")
        if any(c < 1 for c in self.channels) or any(k < 1 for k in self.kernels):
            raise ConfigError("channel widths and kernel sizes must be positive")
        if self.hidden < 1 or self.outputs < 1:
            raise ConfigError("head sizes must be positive")

    @property
    def flat_size(self) -> int:
        p = self.input_size // 8
        return p * p * self.channels[2]

    def param_shapes(self):
        shapes = []
        prev = self.in_channels
        for i, (c, k) in enumerate(zip(self.channels, self.kernels), start=1):
            shapes.append((f"conv{i}_w", (k, k, prev, c)))
            shapes.append((f"conv{i}_b", (c,)))
            prev = c
        shapes.append(("dense1_w", (self.flat_size, self.hidden)))
        shapes.append(("dense1_b", (self.hidden,)))
        shapes.append(("dense2_w", (self.hidden, self.outputs)))
        shapes.append(("dense2_b", (self.outputs,)))
        return shapes

    def to_dict(self):
        d = asdict(self)
        d["channels"] = list(self.channels)
        d["kernels"] = list(self.kernels)
        return d


SPEC_KINDS = {"roadsal": RoadSalSpec, "net1": Net1Spec, "agent": AgentSpec}


def spec_from_dict(kind: str, fields: dict):
    cls = SPEC_KINDS.get(kind)
    if cls is None:
        raise ConfigError(f"unknown network kind {kind!r}")
    coerced = {k: tuple(v) if isinstance(v, list) else v for k, v in fields.items()}
    try:
        return cls(**coerced)
    except TypeError as exc:
        raise ConfigError(f"bad {kind} spec fields: {exc}") from None


def _fan_in(shape) -> int:
    if len(shape) == 4:  # conv kernels (kh, kw, in, out)
        return shape[0] * shape[1] * shape[2]
    if len(shape) == 2:  # dense weights (in, out)
        return shape[0]
    return 1


def init_params(spec, seed: int) -> ParamSet:
    """He-scaled random weights, zero biases; float32 end to end so
    checkpoints round-trip bitwise."""
    rng = np.random.default_rng(seed)
    params = ParamSet()
    for name, shape in spec.param_shapes():
        if name.endswith("_b"):
            values = np.zeros(shape, dtype=np.float32)
        else:
            std = np.float32(np.sqrt(2.0 / _fan_in(shape)))
            values = rng.standard_normal(shape, dtype=np.float32) * std
        params.add(name, values)
    return params


def zero_params(spec) -> ParamSet:
    params = ParamSet()
    for name, shape in spec.param_shapes():
        params.add(name, np.zeros(shape, dtype=np.float32))
    return params


def check_params(spec, params: ParamSet) -> None:
    """Reject a ParamSet that does not match the spec's declaration."""
    expected = spec.param_shapes()
    names = params.names()
    if names != [n for n, _ in expected]:
        raise ConfigError(
            f"parameter names {names} do not match {spec.kind} spec "
            f"{[n for n, _ in expected]}")
    for name, shape in expected:
        got = params[name].values.shape
        if got != shape:
            raise ConfigError(f"parameter {name!r} has shape {got}, spec wants {shape}")
