"""Central finite-difference verification of every operator's backward rule.

The oracle never touches the tape: it re-runs the forward function with
perturbed inputs and differences the scalar output. All checks run in
double precision with h=1e-5.
"""

from __future__ import annotations

import numpy as np

from drivesal.diffcore import losses, ops
from drivesal.diffcore.tensor import DiffTensor

DEFAULT_H = 1e-5
DEFAULT_TOL = 1e-4


def weighted_sum(t, weights):
    """Scalarize a tensor output, e.g. for gradient checking."""
    value = float((t.values * weights).sum())
    return DiffTensor(np.asarray(value), _parents=(t,),
                      _backward_fn=lambda g: (weights * g.reshape(()),))


_weighted_sum = weighted_sum


def finite_difference_grads(fn, tensors, h=DEFAULT_H):
    """Central-difference gradient of the scalar fn() w.r.t. each tensor.

    fn must rebuild its result from the tensors' current values on every
    call; the tensors are perturbed in place and restored.
    """
    grads = []
    for t in tensors:
        flat = t.values.reshape(-1)
        g = np.zeros_like(flat)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            f_plus = float(fn().values)
            flat[i] = original - h
            f_minus = float(fn().values)
            flat[i] = original
            g[i] = (f_plus - f_minus) / (2.0 * h)
        grads.append(g.reshape(t.values.shape))
    return grads


def check_gradients(fn, tensors, h=DEFAULT_H):
    """Max relative error between analytic and finite-difference gradients."""
    out = fn()
    out.backward()
    analytic = [np.zeros_like(t.values) if t.grad is None else t.grad.copy() for t in tensors]
    numeric = finite_difference_grads(fn, tensors, h=h)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-6)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


def _spaced_values(rng, shape, low=-1.0, high=1.0, exclude_zero_band=0.0):
    """Distinct values with pairwise gaps far above h, shuffled into shape.

    Avoids max-op ties and, with exclude_zero_band, relu's kink at 0.
    """
    size = int(np.prod(shape))
    if exclude_zero_band > 0:
        half = (size + 1) // 2
        pool = np.concatenate([
            np.linspace(low, -exclude_zero_band, half),
            np.linspace(exclude_zero_band, high, half),
        ])
    else:
        pool = np.linspace(low, high, size)
    return rng.permutation(pool)[:size].reshape(shape).astype(np.float64)


def _leaf(values):
    return DiffTensor(np.asarray(values, dtype=np.float64), requires_grad=True)


def _case_conv2d(rng, padding):
    x = _leaf(_spaced_values(rng, (8, 8, 2)))
    k = _leaf(rng.normal(size=(3, 3, 2, 4)))
    b = _leaf(rng.normal(size=(4,)))
    w = rng.normal(size=(6, 6, 4) if padding == "valid" else (8, 8, 4))
    return lambda: _weighted_sum(ops.conv2d(x, k, b, padding=padding), w), [x, k, b]


def _case_maxpool(rng):
    x = _leaf(_spaced_values(rng, (6, 6, 3)))
    w = rng.normal(size=(3, 3, 3))
    return lambda: _weighted_sum(ops.maxpool2x2(x), w), [x]


def _case_activation(rng, kind):
    band = 0.05 if kind == "relu" else 0.0
    x = _leaf(_spaced_values(rng, (5, 7), low=-2.0, high=2.0, exclude_zero_band=band))
    w = rng.normal(size=(5, 7))
    return lambda: _weighted_sum(ops.apply_activation(kind, x), w), [x]


def _case_dense(rng):
    x = _leaf(rng.normal(size=(10,)))
    wt = _leaf(rng.normal(size=(10, 7)))
    b = _leaf(rng.normal(size=(7,)))
    w = rng.normal(size=(7,))
    return lambda: _weighted_sum(ops.dense(x, wt, b), w), [x, wt, b]


def _case_pairwise_max(rng):
    x = _leaf(_spaced_values(rng, (20,)))
    w = rng.normal(size=(10,))
    return lambda: _weighted_sum(ops.pairwise_max(x), w), [x]


def _case_elementwise_mul_same(rng):
    a = _leaf(rng.normal(size=(4, 5)))
    b = _leaf(rng.normal(size=(4, 5)))
    w = rng.normal(size=(4, 5))
    return lambda: _weighted_sum(ops.elementwise_mul(a, b), w), [a, b]


def _case_elementwise_mul_map(rng):
    image = _leaf(rng.normal(size=(5, 4, 3)))
    sal = _leaf(rng.normal(size=(5, 4)))
    w = rng.normal(size=(5, 4, 3))
    return lambda: _weighted_sum(ops.elementwise_mul(image, sal), w), [image, sal]


def _case_cosine(rng):
    p = _leaf(rng.normal(size=(12,)) + 0.5)
    a = rng.normal(size=(12,)) + 0.5
    return lambda: losses.cosine_loss(p, a), [p]


def _case_action_mse(rng):
    p = _leaf(rng.normal(size=(3,)))
    t = rng.normal(size=(3,))
    return lambda: losses.action_mse(p, t), [p]


def _case_sparsity(rng, variant):
    m = _leaf(rng.uniform(0.05, 0.95, size=(6, 6)))
    return lambda: losses.attention_sparsity(m, variant=variant), [m]


def _case_total_loss(rng):
    l1 = _leaf(rng.uniform(0.1, 1.0))
    l2 = _leaf(rng.uniform(0.1, 1.0))
    return lambda: losses.total_loss(l1, l2, 0.3, 1.2), [l1, l2]


CASES = {
    "conv2d_valid": lambda rng: _case_conv2d(rng, "valid"),
    "conv2d_same": lambda rng: _case_conv2d(rng, "same"),
    "conv2d_same_periodic": lambda rng: _case_conv2d(rng, "same_periodic"),
    "maxpool2x2": _case_maxpool,
    "relu": lambda rng: _case_activation(rng, "relu"),
    "sigmoid": lambda rng: _case_activation(rng, "sigmoid"),
    "linear": lambda rng: _case_activation(rng, "linear"),
    "dense": _case_dense,
    "pairwise_max": _case_pairwise_max,
    "elementwise_mul_same": _case_elementwise_mul_same,
    "elementwise_mul_map": _case_elementwise_mul_map,
    "cosine_loss": _case_cosine,
    "action_mse": _case_action_mse,
    "sparsity_squared": lambda rng: _case_sparsity(rng, "squared"),
    "sparsity_linear": lambda rng: _case_sparsity(rng, "linear"),
    "total_loss": _case_total_loss,
}


def run_gradcheck_suite(n_seeds=10, tol=DEFAULT_TOL, h=DEFAULT_H):
    """Run every operator's check on n_seeds random instances.

    Returns {op_name: max_rel_error}; all entries must be below tol for the
    suite to pass.
    """
    report = {}
    for name, make_case in CASES.items():
        worst = 0.0
        for seed in range(n_seeds):
            rng = np.random.default_rng(1000 + seed)
            fn, tensors = make_case(rng)
            worst = max(worst, check_gradients(fn, tensors, h=h))
        report[name] = worst
    return report


def suite_passes(report, tol=DEFAULT_TOL):
    return all(err < tol for err in report.values())
