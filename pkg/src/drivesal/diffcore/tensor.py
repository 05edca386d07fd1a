"""Value-semantic tensor with reverse-mode gradient accumulation.

The graph is a plain tape: each operator output remembers its parent
tensors and a closure that maps the output gradient to parent gradients.
Only the operators this workbench needs exist; there is no general
broadcasting or in-place mutation of graph nodes.
"""

from __future__ import annotations

import numpy as np

from drivesal.errors import ShapeError


class DiffTensor:
    """An n-dimensional grid of reals participating in forward/backward.

    Attributes:
        values: the forward values (numpy array, float32 or float64).
        grad: accumulated gradient of the same shape, or None before backward.
        requires_grad: True for trainable leaves; op outputs inherit it from
            any parent so gradients can flow through frozen parameters.
    """

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, values, requires_grad=False, _parents=(), _backward_fn=None):
        arr = np.asarray(values)
        self.values = arr.astype(np.result_type(arr.dtype, np.float32), copy=False)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = tuple(_parents)
        self._backward_fn = _backward_fn

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self):
        return self.values.size

    @property
    def dtype(self):
        return self.values.dtype

    def item(self):
        return float(self.values.reshape(-1)[0]) if self.values.size == 1 else float(self.values)

    def check_finite(self, label="tensor"):
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError(f"non-finite values in {label} with shape {self.shape}")
        return self

    def detach(self):
        """A leaf copy sharing values but cut from the tape."""
        out = DiffTensor(self.values)
        return out

    def backward(self):
        """Accumulate gradients of this scalar into every reachable leaf."""
        if self.values.size != 1:
            raise ShapeError(f"backward() requires a scalar, got shape {self.shape}")
        order = _topo_order(self)
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.values)
        for node in order:  # reverse topological: root first
            if node._backward_fn is None or node.grad is None:
                continue
            parent_grads = node._backward_fn(node.grad)
            for parent, g in zip(node._parents, parent_grads):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.values)
                parent.grad += g

    def __repr__(self):
        return f"DiffTensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _topo_order(root):
    """Nodes reachable from root, root first (reverse topological)."""
    seen = set()
    order = []

    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            stack.append((parent, False))
    order.reverse()
    return order


def as_tensor(x, requires_grad=False):
    """Wrap arrays / lists / scalars; pass DiffTensors through unchanged."""
    if isinstance(x, DiffTensor):
        return x
    return DiffTensor(x, requires_grad=requires_grad)
