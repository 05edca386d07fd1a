"""Parameter collections and SGD with momentum and L2 weight decay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from drivesal.diffcore.tensor import DiffTensor
from drivesal.errors import ShapeError


@dataclass(frozen=True)
class SgdConfig:
    """Optimizer settings. Decay is an L2 coefficient coupled into the
    gradient (g + decay * w), not a learning-rate schedule."""

    learning_rate: float = 1e-3
    momentum: float = 0.9
    decay: float = 0.005
    batch_size: int = 300

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.decay < 0:
            raise ValueError(f"decay must be nonnegative, got {self.decay}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")


class ParamSet:
    """Named, ordered collection of trainable tensors with momentum buffers.

    Iteration order is insertion order and is the serialization order for
    checkpoints, so it must not depend on anything but the network spec.
    """

    def __init__(self):
        self._params: dict[str, DiffTensor] = {}
        self._velocity: dict[str, np.ndarray] = {}

    def add(self, name, values, requires_grad=True):
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = DiffTensor(np.asarray(values), requires_grad=requires_grad)
        self._params[name] = t
        self._velocity[name] = np.zeros_like(t.values)
        return t

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params.keys())

    def items(self):
        return self._params.items()

    def tensors(self):
        return list(self._params.values())

    def velocity(self, name):
        return self._velocity[name]

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def grads(self):
        """Current gradients keyed by name (missing grads map to None)."""
        return {name: t.grad for name, t in self._params.items()}

    def flat_values(self, dtype="<f4"):
        """All parameter values concatenated in iteration order."""
        return np.concatenate([t.values.reshape(-1).astype(dtype) for t in self._params.values()])

    def load_flat_values(self, flat, dtype=None):
        offset = 0
        for t in self._params.values():
            n = t.values.size
            chunk = flat[offset:offset + n].reshape(t.values.shape)
            t.values = chunk.astype(dtype or t.values.dtype)
            offset += n
        if offset != flat.size:
            raise ShapeError(f"flat payload has {flat.size} values, parameters need {offset}")

    def copy(self):
        out = ParamSet()
        for name, t in self._params.items():
            out.add(name, t.values.copy(), requires_grad=t.requires_grad)
            out._velocity[name] = self._velocity[name].copy()
        return out


def sgd_step(params, grads, cfg):
    """One momentum-SGD update: v <- m*v - lr*(g + decay*w); w <- w + v.

    `grads` maps parameter names to gradient arrays; parameters without an
    entry (or mapped to None) are left untouched. Non-finite gradients
    reject the whole step so a diverging run cannot poison the weights.
    """
    for name, g in grads.items():
        if g is None:
            continue
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if params[name].values.shape != g.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match parameter "
                f"{name!r} shape {params[name].values.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}; step rejected")

    for name, g in grads.items():
        if g is None:
            continue
        t = params[name]
        v = params.velocity(name)
        v *= cfg.momentum
        v -= cfg.learning_rate * (g + cfg.decay * t.values)
        t.values = t.values + v
    return params
