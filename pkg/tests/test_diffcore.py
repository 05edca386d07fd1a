"""Unit tests for the autodiff core: ops, losses, optimizer, gradcheck."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivesal.diffcore import (
    DiffTensor,
    ParamSet,
    SgdConfig,
    action_mse,
    apply_activation,
    as_tensor,
    attention_sparsity,
    check_gradients,
    conv2d,
    cosine_loss,
    dense,
    elementwise_mul,
    flatten_spatial,
    maxpool2x2,
    pairwise_max,
    relu,
    reshape,
    run_gradcheck_suite,
    sgd_step,
    sigmoid,
    total_loss,
)
from drivesal.diffcore.gradcheck import suite_passes
from drivesal.errors import ShapeError


def leaf(values):
    return DiffTensor(np.asarray(values, dtype=np.float64), requires_grad=True)


# ---------------------------------------------------------------- tensor core


def test_backward_requires_scalar():
    t = leaf([1.0, 2.0])
    with pytest.raises(ValueError):
        t.backward()


def test_grad_accumulates_across_fanout():
    x = leaf([2.0])
    y = elementwise_mul(x, x)  # x^2, grad 2x
    y.backward()
    np.testing.assert_allclose(x.grad, [4.0])


def test_no_grad_to_constant_inputs():
    x = leaf([1.0, 2.0])
    c = as_tensor([3.0, 4.0])
    out = elementwise_mul(x, c)
    s = total_loss(action_mse(out, np.zeros(2)), as_tensor(0.0), 1.0, 0.0)
    s.backward()
    assert c.grad is None
    assert x.grad is not None


def test_backward_resets_previous_grads():
    x = leaf([3.0])
    y = elementwise_mul(x, x)
    y.backward()
    first = x.grad.copy()
    y2 = elementwise_mul(x, x)
    y2.backward()
    np.testing.assert_allclose(x.grad, first)


# ------------------------------------------------------------------ conv2d


def test_conv2d_all_ones_valid():
    x = as_tensor(np.ones((3, 3, 1)))
    k = as_tensor(np.ones((3, 3, 1, 1)))
    b = as_tensor(np.zeros(1))
    out = conv2d(x, k, b, padding="valid")
    assert out.values.shape == (1, 1, 1)
    np.testing.assert_allclose(out.values, 9.0)


def test_conv2d_identity_kernel_same():
    rng = np.random.default_rng(0)
    img = rng.normal(size=(5, 5, 1))
    k = np.zeros((3, 3, 1, 1))
    k[1, 1, 0, 0] = 1.0
    out = conv2d(as_tensor(img), as_tensor(k), as_tensor(np.zeros(1)), padding="same")
    np.testing.assert_allclose(out.values, img, atol=1e-12)


def test_conv2d_same_preserves_shape_and_bias():
    x = as_tensor(np.zeros((7, 6, 3)))
    k = as_tensor(np.zeros((5, 5, 3, 4)))
    out = conv2d(x, k, as_tensor(np.arange(4.0)), padding="same")
    assert out.values.shape == (7, 6, 4)
    np.testing.assert_allclose(out.values[3, 3], [0, 1, 2, 3])


def test_conv2d_periodic_shift_equivariance():
    rng = np.random.default_rng(1)
    img = rng.normal(size=(8, 8, 2))
    k = as_tensor(rng.normal(size=(3, 3, 2, 3)))
    b = as_tensor(rng.normal(size=3))
    out = conv2d(as_tensor(img), k, b, padding="same_periodic").values
    shifted = conv2d(as_tensor(np.roll(img, (2, 3), axis=(0, 1))), k, b,
                     padding="same_periodic").values
    np.testing.assert_allclose(np.roll(out, (2, 3), axis=(0, 1)), shifted, atol=1e-10)


def test_conv2d_rejects_channel_mismatch():
    with pytest.raises(ShapeError):
        conv2d(as_tensor(np.zeros((4, 4, 2))), as_tensor(np.zeros((3, 3, 3, 1))),
               as_tensor(np.zeros(1)))


def test_conv2d_batched_matches_loop():
    rng = np.random.default_rng(2)
    xs = rng.normal(size=(4, 6, 6, 2))
    k = as_tensor(rng.normal(size=(3, 3, 2, 3)))
    b = as_tensor(rng.normal(size=3))
    batched = conv2d(as_tensor(xs), k, b, padding="same").values
    for i in range(4):
        single = conv2d(as_tensor(xs[i]), k, b, padding="same").values
        np.testing.assert_allclose(batched[i], single, atol=1e-12)


# ------------------------------------------------------------- pool / dense


def test_maxpool_single_window():
    out = maxpool2x2(as_tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(2, 2, 1)))
    np.testing.assert_allclose(out.values, [[[4.0]]])


def test_maxpool_rejects_odd_dims():
    with pytest.raises(ShapeError):
        maxpool2x2(as_tensor(np.zeros((3, 4, 1))))


def test_maxpool_tie_routes_grad_to_one_winner():
    x = leaf(np.full((2, 2, 1), 7.0))
    out = maxpool2x2(x)
    out.backward()
    assert x.grad.sum() == 1.0
    assert (x.grad != 0).sum() == 1


def test_pairwise_max_values():
    out = pairwise_max(as_tensor([1.0, 5.0, 2.0, 2.0]))
    np.testing.assert_allclose(out.values, [5.0, 2.0])


def test_pairwise_max_rejects_odd_length():
    with pytest.raises(ShapeError):
        pairwise_max(as_tensor([1.0, 2.0, 3.0]))


def test_dense_matches_matmul():
    rng = np.random.default_rng(3)
    x = rng.normal(size=8)
    w = rng.normal(size=(8, 5))
    b = rng.normal(size=5)
    out = dense(as_tensor(x), as_tensor(w), as_tensor(b))
    np.testing.assert_allclose(out.values, x @ w + b, atol=1e-12)


def test_flatten_and_reshape_round_trip():
    x = leaf(np.arange(24.0).reshape(2, 3, 4))
    flat = flatten_spatial(x)
    assert flat.values.shape == (24,)
    back = reshape(flat, (2, 3, 4))
    np.testing.assert_allclose(back.values, x.values)


def test_activations_values():
    x = as_tensor([-2.0, 0.0, 3.0])
    np.testing.assert_allclose(relu(x).values, [0.0, 0.0, 3.0])
    np.testing.assert_allclose(sigmoid(x).values, 1 / (1 + np.exp([2.0, 0.0, -3.0])))
    np.testing.assert_allclose(apply_activation("linear", x).values, x.values)
    with pytest.raises(ValueError):
        apply_activation("tanh", x)


def test_sigmoid_stable_at_extremes():
    out = sigmoid(as_tensor([-1e4, 1e4])).values
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-12)


# -------------------------------------------------------------------- losses


def test_cosine_loss_identical_maps_hits_minimum():
    v = np.random.default_rng(4).uniform(0.1, 1.0, size=32)
    out = cosine_loss(as_tensor(v), v)
    assert abs(float(out.values) - (-1.0)) < 1e-12


def test_cosine_loss_known_angle():
    out = cosine_loss(as_tensor([1.0, 0.0]), np.array([1.0, 1.0]))
    assert abs(float(out.values) - (-1.0 / np.sqrt(2.0))) < 1e-9


def test_cosine_loss_rejects_zero_target():
    with pytest.raises(ValueError):
        cosine_loss(as_tensor([1.0, 2.0]), np.zeros(2))


def test_cosine_loss_zero_prediction_is_finite():
    p = leaf(np.zeros(4))
    out = cosine_loss(p, np.ones(4))
    out.backward()
    assert np.isfinite(float(out.values))
    assert np.all(np.isfinite(p.grad))


def test_action_mse_oracle():
    out = action_mse(as_tensor([0.3, 0.0, 0.0]), np.zeros(3))
    assert abs(float(out.values) - 0.03) < 1e-12


def test_sparsity_oracle_values():
    m = as_tensor(np.full((4, 4), 0.5))
    assert abs(float(attention_sparsity(m, variant="squared").values) - 0.25) < 1e-12
    assert abs(float(attention_sparsity(m, variant="linear").values) - 0.5) < 1e-12


def test_sparsity_rejects_out_of_range():
    with pytest.raises(ValueError):
        attention_sparsity(as_tensor(np.full((2, 2), 1.5)))


def test_total_loss_weights():
    out = total_loss(as_tensor(2.0), as_tensor(3.0), 0.5, 2.0)
    assert abs(float(out.values) - 7.0) < 1e-12
    with pytest.raises(ValueError):
        total_loss(as_tensor(1.0), as_tensor(1.0), 0.0, 0.0)
    with pytest.raises(ValueError):
        total_loss(as_tensor(1.0), as_tensor(1.0), -0.1, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=16),
       st.lists(st.floats(-10, 10), min_size=2, max_size=16))
def test_cosine_loss_bounded(a, b):
    a = np.asarray(a[: min(len(a), len(b))])
    b = np.asarray(b[: len(a)])
    if np.linalg.norm(a) < 1e-6 or np.linalg.norm(b) < 1e-6:
        return
    out = float(cosine_loss(as_tensor(a), b).values)
    assert -1.0 - 1e-9 <= out <= 1.0 + 1e-9


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_sparsity_monotone_in_activation(lo, hi):
    lo, hi = sorted((lo, hi))
    low_map = as_tensor(np.full(8, lo))
    high_map = as_tensor(np.full(8, hi))
    for variant in ("squared", "linear"):
        a = float(attention_sparsity(low_map, variant=variant).values)
        b = float(attention_sparsity(high_map, variant=variant).values)
        assert a <= b + 1e-12


# ----------------------------------------------------------------- optimizer


def test_sgd_momentum_oracle():
    cfg = SgdConfig(learning_rate=0.1, momentum=0.9, decay=0.0, batch_size=1)
    params = ParamSet()
    params.add("w", np.array([1.0]))
    sgd_step(params, {"w": np.array([0.5])}, cfg)
    np.testing.assert_allclose(params["w"].values, [0.95], atol=1e-12)
    sgd_step(params, {"w": np.array([0.5])}, cfg)
    np.testing.assert_allclose(params["w"].values, [0.855], atol=1e-12)


def test_sgd_decay_oracle():
    cfg = SgdConfig(learning_rate=0.1, momentum=0.0, decay=0.05, batch_size=1)
    params = ParamSet()
    params.add("w", np.array([2.0]))
    sgd_step(params, {"w": np.array([0.0])}, cfg)
    np.testing.assert_allclose(params["w"].values, [1.99], atol=1e-12)


def test_sgd_rejects_bad_grads():
    cfg = SgdConfig()
    params = ParamSet()
    params.add("w", np.array([1.0]))
    with pytest.raises(KeyError):
        sgd_step(params, {"v": np.array([1.0])}, cfg)
    with pytest.raises(ShapeError):
        sgd_step(params, {"w": np.array([1.0, 2.0])}, cfg)
    with pytest.raises(FloatingPointError):
        sgd_step(params, {"w": np.array([np.nan])}, cfg)
    # rejected steps must leave the weights untouched
    np.testing.assert_allclose(params["w"].values, [1.0])


def test_sgd_config_validation():
    with pytest.raises(ValueError):
        SgdConfig(learning_rate=-1.0)
    with pytest.raises(ValueError):
        SgdConfig(momentum=1.5)
    with pytest.raises(ValueError):
        SgdConfig(batch_size=0)


def test_paramset_flat_round_trip():
    rng = np.random.default_rng(5)
    params = ParamSet()
    params.add("a", rng.normal(size=(3, 2)))
    params.add("b", rng.normal(size=5))
    blob = params.flat_values()
    other = params.copy()
    other.load_flat_values(np.zeros_like(blob))
    other.load_flat_values(blob)
    for name, t in params.items():
        np.testing.assert_allclose(other[name].values, t.values, atol=1e-7)


def test_paramset_rejects_duplicate_and_bad_blob():
    params = ParamSet()
    params.add("a", np.zeros(3))
    with pytest.raises(ValueError):
        params.add("a", np.zeros(3))
    with pytest.raises(ShapeError):
        params.load_flat_values(np.zeros(4))


# ----------------------------------------------------------------- gradcheck


def test_gradcheck_catches_wrong_gradient():
    x = leaf([1.0, 2.0, 3.0])

    def wrong_square():
        # forward x^2 but backward pretends d/dx = x (missing factor 2)
        val = (x.values ** 2).sum()
        return DiffTensor(np.asarray(val), _parents=(x,),
                          _backward_fn=lambda g: (x.values * g.reshape(()),))

    assert check_gradients(wrong_square, [x]) > 0.3


def test_gradcheck_suite_all_ops_pass():
    report = run_gradcheck_suite(n_seeds=3)
    assert suite_passes(report), report
