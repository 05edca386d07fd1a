"""Minimal differentiable-operator core.

Every operator here is a pure function over value-semantic tensors with a
hand-written backward rule, and every backward rule is checked against
central finite differences (see gradcheck).
"""

from drivesal.diffcore.tensor import DiffTensor, as_tensor
from drivesal.diffcore.ops import (
    conv2d,
    maxpool2x2,
    apply_activation,
    relu,
    sigmoid,
    dense,
    pairwise_max,
    elementwise_mul,
    reshape,
    flatten_spatial,
)
from drivesal.diffcore.losses import (
    cosine_loss,
    action_mse,
    attention_sparsity,
    total_loss,
)
from drivesal.diffcore.optim import ParamSet, SgdConfig, sgd_step
from drivesal.diffcore.gradcheck import finite_difference_grads, check_gradients, run_gradcheck_suite

__all__ = [
    "DiffTensor",
    "as_tensor",
    "conv2d",
    "maxpool2x2",
    "apply_activation",
    "relu",
    "sigmoid",
    "dense",
    "pairwise_max",
    "elementwise_mul",
    "reshape",
    "flatten_spatial",
    "cosine_loss",
    "action_mse",
    "attention_sparsity",
    "total_loss",
    "ParamSet",
    "SgdConfig",
    "sgd_step",
    "finite_difference_grads",
    "check_gradients",
    "run_gradcheck_suite",
]
