import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shufflesod.autodiff import Adam, AdamState, Tensor, adam_step, backward, grad, grad_check, no_grad, ops
from shufflesod.autodiff.nn import BatchNorm2d, Conv2d, Linear
from shufflesod.errors import ConfigurationError, DimensionError

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def T(a, requires_grad=False):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=requires_grad)


# ---------------------------------------------------------------- matmul

def test_matmul_identity():
    b = [[5.0, 6.0], [7.0, 8.0]]
    np.testing.assert_array_equal(ops.matmul(T(np.eye(2)), T(b)).data, b)


def test_matmul_zeros():
    out = ops.matmul(T(np.zeros((2, 3))), T(np.random.default_rng(0).normal(size=(3, 4))))
    np.testing.assert_array_equal(out.data, np.zeros((2, 4)))


def test_matmul_small_product():
    np.testing.assert_array_equal(ops.matmul(T([[1, 2], [3, 4]]), T([[1], [1]])).data, [[3], [7]])


def test_matmul_rejects_inner_mismatch():
    with pytest.raises(DimensionError):
        ops.matmul(T(np.ones((2, 3))), T(np.ones((4, 2))))


# ---------------------------------------------------------------- conv2d

def test_conv_1x1_identity_kernel():
    x = np.random.default_rng(1).normal(size=(2, 1, 5, 5))
    out = ops.conv2d(T(x), T(np.ones((1, 1, 1, 1))), T([0.0]))
    np.testing.assert_array_equal(out.data, x)


def test_conv_zero_kernel_gives_bias():
    x = np.random.default_rng(2).normal(size=(1, 2, 4, 4))
    out = ops.conv2d(T(x), T(np.zeros((3, 2, 3, 3))), T([1.0, -2.0, 0.5]), pad=1)
    np.testing.assert_array_equal(out.data[0, :, 2, 1], [1.0, -2.0, 0.5])


def sliding_window(x, w, stride, pad):
    B, C, H, W = x.shape
    O, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    Ho, Wo = (H + 2 * pad - kh) // stride + 1, (W + 2 * pad - kw) // stride + 1
    out = np.zeros((B, O, Ho, Wo))
    for b in range(B):
        for o in range(O):
            for i in range(Ho):
                for j in range(Wo):
                    out[b, o, i, j] = np.sum(xp[b, :, i * stride:i * stride + kh, j * stride:j * stride + kw] * w[o])
    return out


def test_conv_center_pixel_is_sum_of_products():
    rng = np.random.default_rng(3)
    x, w = rng.normal(size=(1, 1, 3, 3)), rng.normal(size=(1, 1, 3, 3))
    out = ops.conv2d(T(x), T(w), pad=1)
    assert out.data[0, 0, 1, 1] == pytest.approx(np.sum(x * w), abs=1e-14)


@pytest.mark.parametrize("stride,pad", [(1, 0), (1, 1), (2, 1), (2, 0)])
def test_conv_matches_sliding_window(stride, pad):
    rng = np.random.default_rng(stride * 10 + pad)
    x, w = rng.normal(size=(2, 3, 7, 6)), rng.normal(size=(4, 3, 3, 3))
    np.testing.assert_allclose(ops.conv2d(T(x), T(w), stride=stride, pad=pad).data,
                               sliding_window(x, w, stride, pad), atol=1e-12)


# ---------------------------------------------------------------- normalization

def bn(x, gamma, beta, training=True):
    C = x.shape[1]
    return ops.batch_norm(T(x), T(gamma), T(beta), np.zeros(C), np.ones(C), training)


def test_batch_norm_gamma_zero_gives_beta():
    x = np.random.default_rng(4).normal(size=(3, 2, 4, 4))
    out = bn(x, np.zeros(2), np.array([0.3, -1.0]))
    np.testing.assert_array_equal(out.data[:, 0], 0.3)
    np.testing.assert_array_equal(out.data[:, 1], -1.0)


def test_batch_norm_three_values():
    out = bn(np.array([1.0, 2.0, 3.0]).reshape(3, 1, 1, 1), np.ones(1), np.zeros(1))
    expected = (np.array([1.0, 2.0, 3.0]) - 2.0) / np.sqrt(2.0 / 3.0 + 1e-5)
    np.testing.assert_allclose(out.data.ravel(), expected, rtol=0, atol=1e-15)


def test_batch_norm_standardized_input_nearly_unchanged():
    x = np.random.default_rng(5).normal(size=(8, 2, 5, 5))
    x = (x - x.mean(axis=(0, 2, 3), keepdims=True)) / x.std(axis=(0, 2, 3), keepdims=True)
    np.testing.assert_allclose(bn(x, np.ones(2), np.zeros(2)).data, x, atol=1e-4)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4, 3, 2, 2), elements=finite).filter(lambda a: a.std(axis=(0, 2, 3)).min() > 0.1))
def test_batch_norm_output_statistics(x):
    out = bn(x, np.ones(3), np.zeros(3)).data
    assert np.abs(out.mean(axis=(0, 2, 3))).max() < 1e-10
    var = x.var(axis=(0, 2, 3))
    np.testing.assert_allclose(out.var(axis=(0, 2, 3)), var / (var + 1e-5), rtol=1e-10)


def test_batch_norm_running_stats_and_eval():
    layer = BatchNorm2d(1)
    x = np.array([1.0, 2.0, 3.0, 6.0]).reshape(4, 1, 1, 1)
    layer(T(x))
    assert layer.running_mean[0] == pytest.approx(0.1 * 3.0)
    assert layer.running_var[0] == pytest.approx(0.9 + 0.1 * np.var(x, ddof=1))
    layer.eval()
    out = layer(T(x))
    expected = (x - layer.running_mean[0]) / np.sqrt(layer.running_var[0] + 1e-5)
    np.testing.assert_allclose(out.data, expected, rtol=1e-14)


def ln(x, gamma, beta):
    return ops.layer_norm(T(x), T(gamma), T(beta)).data


def test_layer_norm_constant_token_gives_beta():
    np.testing.assert_allclose(ln(np.full((1, 4), 3.0), np.ones(4), np.arange(4.0)), [np.arange(4.0)], atol=1e-12)


def test_layer_norm_unit_token():
    np.testing.assert_allclose(ln(np.array([[1.0, -1.0]]), np.ones(2), np.zeros(2)),
                               [[1.0 / np.sqrt(1 + 1e-5), -1.0 / np.sqrt(1 + 1e-5)]], rtol=1e-14)


def test_layer_norm_linear_in_gamma():
    x = np.random.default_rng(6).normal(size=(3, 5))
    np.testing.assert_allclose(ln(x, 2 * np.ones(5), np.zeros(5)), 2 * ln(x, np.ones(5), np.zeros(5)), rtol=1e-14)


# ---------------------------------------------------------------- activations

def test_activation_reference_points():
    assert ops.activation(T([0.0]), "sigmoid").data[0] == 0.5
    assert ops.activation(T([-1.0]), "leaky_relu").data[0] == pytest.approx(-0.01)
    assert ops.activation(T([0.0]), "gelu").data[0] == 0.0
    assert ops.activation(T([-2.0]), "relu").data[0] == 0.0


def test_activation_unknown_kind():
    with pytest.raises(ConfigurationError):
        ops.activation(T([0.0]), "swish")


def test_sigmoid_extreme_inputs_are_finite():
    out = ops.sigmoid(T([-1000.0, 1000.0])).data
    np.testing.assert_array_equal(out, [0.0, 1.0])


# ---------------------------------------------------------------- softmax

def test_softmax_uniform():
    np.testing.assert_allclose(ops.softmax(T(np.full(5, 2.0))).data, np.full(5, 0.2), rtol=1e-15)


def test_softmax_two_values():
    np.testing.assert_allclose(ops.softmax(T([0.0, np.log(3.0)])).data, [0.25, 0.75], rtol=1e-14)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 6), elements=st.floats(-30, 30)), st.floats(-50, 50))
def test_softmax_rows_sum_to_one_and_shift_invariant(x, c):
    p = ops.softmax(T(x), axis=-1).data
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-12)
    np.testing.assert_allclose(ops.softmax(T(x + c), axis=-1).data, p, atol=1e-12)


# ---------------------------------------------------------------- backward

def test_backward_identity_chain():
    x = T([2.0], requires_grad=True)
    backward(x * 1.0)
    assert x.grad[0] == 1.0


def test_backward_square():
    x = T(3.0, requires_grad=True)
    (dx,) = grad(x * x, [x])
    assert dx == 6.0


def test_disconnected_leaf_gets_zero():
    x, y = T([1.0, 2.0], requires_grad=True), T([5.0], requires_grad=True)
    dx, dy = grad((x * 2.0).sum(), [x, y])
    np.testing.assert_array_equal(dx, [2.0, 2.0])
    np.testing.assert_array_equal(dy, [0.0])


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4,), elements=finite))
def test_two_paths_accumulate(v):
    x = T(v, requires_grad=True)
    (both,) = grad((ops.exp(x * 0.1) + x * x).sum(), [x])
    (first,) = grad(ops.exp(x * 0.1).sum(), [x])
    (second,) = grad((x * x).sum(), [x])
    np.testing.assert_allclose(both, first + second, rtol=1e-14, atol=1e-14)


def test_seed_shape_is_checked():
    x = T([1.0, 2.0], requires_grad=True)
    with pytest.raises(DimensionError):
        backward(x * 2.0, seed=np.ones(3))


def test_no_grad_records_nothing():
    x = T([1.0], requires_grad=True)
    with no_grad():
        y = x * 2.0
    assert not y.requires_grad


def test_broadcast_gradient_is_reduced():
    x, b = T(np.ones((3, 4)), requires_grad=True), T(np.ones(4), requires_grad=True)
    _, db = grad((x + b).sum(), [x, b])
    np.testing.assert_array_equal(db, np.full(4, 3.0))


# ---------------------------------------------------------------- grad_check

def test_grad_check_sigmoid():
    x = T(np.random.default_rng(7).normal(size=4), requires_grad=True)
    assert grad_check(ops.sigmoid, [x]).max_error < 1e-6


def test_grad_check_matmul():
    rng = np.random.default_rng(8)
    a, b = T(rng.normal(size=(3, 3)), True), T(rng.normal(size=(3, 3)), True)
    assert grad_check(ops.matmul, [a, b]).max_error < 1e-6


def test_grad_check_constant_function():
    x = T(np.ones(3), requires_grad=True)
    report = grad_check(lambda x: x * 0.0 + 1.0, [x])
    assert report.max_error == 0.0 and report.passed


def test_grad_check_flags_wrong_gradient():
    def broken(x):
        return Tensor._from_op(x.data ** 2, (x,), lambda g: (g * x.data,))  # missing factor 2
    assert not grad_check(broken, [T(np.ones(3) * 2.0, True)]).passed


# ---------------------------------------------------------------- Adam

def test_adam_zero_gradient_keeps_params():
    p = np.array([1.0, -2.0])
    state = AdamState()
    adam_step([p], [np.zeros(2)], state, lr=0.1)
    np.testing.assert_array_equal(p, [1.0, -2.0])
    m_before = state.m[0].copy()
    adam_step([p], [np.zeros(2)], state, lr=0.1)
    assert np.all(np.abs(state.m[0]) <= np.abs(m_before))


def test_adam_first_step_moves_against_gradient_by_lr():
    g = np.array([3.0, -0.5, 1e-3])
    p = np.zeros(3)
    adam_step([p], [g], AdamState(), lr=0.01)
    # first bias-corrected step is lr * g / (|g| + eps)
    np.testing.assert_allclose(p, -0.01 * g / (np.abs(g) + 1e-8), rtol=1e-12)
    np.testing.assert_allclose(p, -0.01 * np.sign(g), rtol=1e-4)


def test_adam_identical_grads_identical_updates():
    a, b = np.array([0.5]), np.array([0.5])
    g = np.array([0.7])
    adam_step([a, b], [g, g.copy()], AdamState(), lr=0.05)
    assert a[0] == b[0]


def test_adam_rejects_nonpositive_lr():
    with pytest.raises(ConfigurationError):
        adam_step([np.zeros(1)], [np.ones(1)], AdamState(), lr=0.0)


def test_adam_group_with_zero_lr_is_frozen():
    rng = np.random.default_rng(9)
    frozen, live = Linear(rng, 3, 2), Linear(rng, 3, 2)
    before = [p.data.copy() for p in frozen.parameters()]
    opt = Adam({"frozen": frozen.parameters(), "live": live.parameters()}, {"frozen": 0.0, "live": 0.1})
    x = T(rng.normal(size=(4, 3)))
    backward((frozen(x) + live(x)).sum())
    live_before = live.weight.data.copy()
    opt.step()
    for p, b in zip(frozen.parameters(), before):
        np.testing.assert_array_equal(p.data, b)
    assert not np.array_equal(live.weight.data, live_before)


# ---------------------------------------------------------------- modules

def test_conv_module_rejects_even_kernel():
    with pytest.raises(ConfigurationError):
        Conv2d(np.random.default_rng(0), 1, 1, kernel=2)
