"""Differentiable primitives.

Each op computes its forward value with numpy and, when graph recording is
on, attaches a closure returning one gradient per input.
"""
from contextlib import contextmanager

import numpy as np
from scipy.special import erf

from .. import kernels
from ..errors import ConfigurationError, DimensionError
from .tensor import Tensor, as_tensor

LEAKY_SLOPE = 0.01
BN_EPS = 1e-5
BN_MOMENTUM = 0.1
LN_EPS = 1e-5

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------- elementwise

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor._from_op(a.data + b.data, (a, b),
                           lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor._from_op(a.data - b.data, (a, b),
                           lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor._from_op(a.data * b.data, (a, b),
                           lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return Tensor._from_op(out, (a, b),
                           lambda g: (_unbroadcast(g / b.data, a.shape),
                                      _unbroadcast(-g * out / b.data, b.shape)))


def neg(a):
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,))


def power(a, p):
    p = float(p)
    return Tensor._from_op(a.data ** p, (a,), lambda g: (g * p * a.data ** (p - 1.0),))


def exp(a):
    out = np.exp(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * out,))


def log(a):
    return Tensor._from_op(np.log(a.data), (a,), lambda g: (g / a.data,))


# ---------------------------------------------------------------- reductions and layout

def sum(a, axis=None, keepdims=False):
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)
    return Tensor._from_op(np.asarray(out), (a,), back)


def mean(a, axis=None, keepdims=False):
    n = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a, shape):
    out = a.data.reshape(shape)
    return Tensor._from_op(out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes):
    inv = np.argsort(axes)
    return Tensor._from_op(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def concat(tensors, axis=1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor._from_op(out, tensors, lambda g: tuple(np.split(g, splits, axis=axis)))


# ---------------------------------------------------------------- linear algebra

def matmul(a, b):
    """Matrix product with numpy batching rules; 2-D operands are the common case."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    out = np.matmul(a.data, b.data)

    def back(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
    return Tensor._from_op(out, (a, b), back)


def linear(x, weight, bias=None):
    """Affine map over the trailing axis: ``x @ weight + bias`` with weight [in, out]."""
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(f"linear expects trailing axis {weight.shape[0]}, got {x.shape}")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, weight.shape[0])
    out = x2 @ weight.data
    if bias is not None:
        out = out + bias.data

    def back(g):
        g2 = g.reshape(-1, weight.shape[1])
        gx = (g2 @ weight.data.T).reshape(x.shape)
        gw = x2.T @ g2
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)
    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out.reshape(*lead, weight.shape[1]), parents, back)


def conv2d(x, weight, bias=None, stride=1, pad=0):
    """2-D cross-correlation of x [B,C,H,W] with weight [O,C,kh,kw]."""
    B, C, H, W = x.shape
    O, Cw, kh, kw = weight.shape
    if C != Cw:
        raise DimensionError(f"conv2d: input has {C} channels, weight expects {Cw}")
    Hp, Wp = H + 2 * pad, W + 2 * pad
    Ho, Wo = (Hp - kh) // stride + 1, (Wp - kw) // stride + 1
    if Ho <= 0 or Wo <= 0:
        raise DimensionError(f"conv2d: kernel {kh}x{kw} larger than padded input {Hp}x{Wp}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    cols = kernels.im2col(xp, kh, kw, stride, Ho, Wo)
    w2 = weight.data.reshape(O, -1)
    out = np.matmul(w2, cols)
    if bias is not None:
        out += bias.data[None, :, None]

    def back(g):
        g2 = g.reshape(B, O, Ho * Wo)
        gw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape)
        gcols = np.matmul(w2.T, g2)
        gxp = kernels.col2im(gcols, C, Hp, Wp, kh, kw, stride, Ho, Wo)
        gx = gxp[:, :, pad:pad + H, pad:pad + W] if pad else gxp
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=(0, 2))
    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out.reshape(B, O, Ho, Wo), parents, back)


# ---------------------------------------------------------------- normalization

def batch_norm(x, gamma, beta, running_mean, running_var, training,
               momentum=BN_MOMENTUM, eps=BN_EPS):
    """Per-channel normalization of x [B,C,...].

    In training mode batch statistics are used and ``running_mean`` /
    ``running_var`` (numpy arrays) are updated in place.
    """
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, -1) + (1,) * (x.ndim - 2)
    if training:
        n = x.size // x.shape[1]
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        unbiased = var * (n / (n - 1)) if n > 1 else var
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        mu, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu.reshape(bshape)) * inv_std.reshape(bshape)
    out = xhat * gamma.data.reshape(bshape) + beta.data.reshape(bshape)

    def back(g):
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        dxhat = g * gamma.data.reshape(bshape)
        if training:
            n = x.size // x.shape[1]
            s1 = dxhat.sum(axis=axes, keepdims=True)
            s2 = (dxhat * xhat).sum(axis=axes, keepdims=True)
            dx = (inv_std.reshape(bshape) / n) * (n * dxhat - s1 - xhat * s2)
        else:
            dx = dxhat * inv_std.reshape(bshape)
        return dx, dgamma, dbeta
    return Tensor._from_op(out, (x, gamma, beta), back)


def layer_norm(x, gamma, beta, eps=LN_EPS):
    """Normalize over the trailing feature axis, then scale and shift."""
    if gamma.shape != (x.shape[-1],):
        raise DimensionError(f"layer_norm: gamma {gamma.shape} vs features {x.shape[-1]}")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    out = xhat * gamma.data + beta.data

    def back(g):
        lead = tuple(range(x.ndim - 1))
        dgamma = (g * xhat).sum(axis=lead)
        dbeta = g.sum(axis=lead)
        dxhat = g * gamma.data
        n = x.shape[-1]
        dx = (inv_std / n) * (n * dxhat - dxhat.sum(-1, keepdims=True)
                              - xhat * (dxhat * xhat).sum(-1, keepdims=True))
        return dx, dgamma, dbeta
    return Tensor._from_op(out, (x, gamma, beta), back)


# ---------------------------------------------------------------- nonlinearities

def sigmoid(x):
    out = np.empty_like(x.data)
    pos = x.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ez = np.exp(x.data[~pos])
    out[~pos] = ez / (1.0 + ez)
    return Tensor._from_op(out, (x,), lambda g: (g * out * (1.0 - out),))


def relu(x):
    mask = x.data > 0
    return Tensor._from_op(x.data * mask, (x,), lambda g: (g * mask,))


def leaky_relu(x, slope=LEAKY_SLOPE):
    scale = np.where(x.data > 0, 1.0, slope)
    return Tensor._from_op(x.data * scale, (x,), lambda g: (g * scale,))


def gelu(x):
    # exact erf form
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data ** 2)
    return Tensor._from_op(x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),))


_ACTIVATIONS = {"sigmoid": sigmoid, "relu": relu, "leaky_relu": leaky_relu, "gelu": gelu}


def activation(x, kind, slope=LEAKY_SLOPE):
    if kind not in _ACTIVATIONS:
        raise ConfigurationError(f"unknown activation {kind!r}; expected one of {sorted(_ACTIVATIONS)}")
    if kind == "leaky_relu":
        return leaky_relu(x, slope)
    return _ACTIVATIONS[kind](x)


def softmax(x, axis=-1):
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)
    return Tensor._from_op(out, (x,), back)


def bce_with_logits(logits, target):
    """Elementwise binary cross-entropy of sigmoid(logits) against a constant target."""
    z = logits.data
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=np.float64)
    out = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))

    def back(g):
        e = np.exp(-np.abs(z))
        p = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return (g * (p - t),)
    return Tensor._from_op(out, (logits,), back)


# ---------------------------------------------------------------- rescaling

def _check_r(r):
    if int(r) != r or r < 1:
        raise DimensionError(f"scale factor must be a positive integer, got {r}")
    return int(r)


def pixel_unshuffle(x, r):
    r = _check_r(r)
    if x.ndim != 4:
        raise DimensionError(f"pixel_unshuffle expects [B,C,H,W], got {x.shape}")
    B, C, H, W = x.shape
    if H % r or W % r:
        raise DimensionError(f"r={r} does not divide spatial size {H}x{W}")
    if r == 1:
        return Tensor._from_op(x.data.copy(), (x,), lambda g: (g,))
    out = kernels.unshuffle(x.data, r)
    return Tensor._from_op(out, (x,), lambda g: (kernels.shuffle(g, r),))


def pixel_shuffle(x, r):
    r = _check_r(r)
    if x.ndim != 4:
        raise DimensionError(f"pixel_shuffle expects [B,C*r*r,H,W], got {x.shape}")
    if x.shape[1] % (r * r):
        raise DimensionError(f"channel count {x.shape[1]} not divisible by r^2={r * r}")
    if r == 1:
        return Tensor._from_op(x.data.copy(), (x,), lambda g: (g,))
    out = kernels.shuffle(x.data, r)
    return Tensor._from_op(out, (x,), lambda g: (kernels.unshuffle(g, r),))


_interpolation_forbidden = False


@contextmanager
def interpolation_forbidden(active=True):
    """Make ``resize_bilinear`` raise while the block runs (pixel-shuffle-only networks)."""
    global _interpolation_forbidden
    prev = _interpolation_forbidden
    _interpolation_forbidden = active
    try:
        yield
    finally:
        _interpolation_forbidden = prev


def bilinear_matrix(n_out, n_in):
    """Row-stochastic 1-D interpolation matrix, half-pixel centres, edge clamped."""
    m = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for i in range(n_out):
        src = max((i + 0.5) * scale - 0.5, 0.0)
        i0 = min(int(np.floor(src)), n_in - 1)
        i1 = min(i0 + 1, n_in - 1)
        frac = src - i0
        m[i, i0] += 1.0 - frac
        m[i, i1] += frac
    return m


def resize_bilinear(x, out_h, out_w):
    """Bilinear resize of the last two axes, as a pair of fixed linear maps."""
    if _interpolation_forbidden:
        raise AssertionError("bilinear interpolation used inside a pixel-shuffle network")
    A = bilinear_matrix(out_h, x.shape[-2])
    Bm = bilinear_matrix(out_w, x.shape[-1])
    out = A @ x.data @ Bm.T
    return Tensor._from_op(out, (x,), lambda g: (A.T @ g @ Bm,))


# ---------------------------------------------------------------- operator sugar

def _rsub(a, b):
    return sub(b, a)


def _rdiv(a, b):
    return div(b, a)


Tensor.__add__ = add
Tensor.__radd__ = add
Tensor.__sub__ = sub
Tensor.__rsub__ = _rsub
Tensor.__mul__ = mul
Tensor.__rmul__ = mul
Tensor.__truediv__ = div
Tensor.__rtruediv__ = _rdiv
Tensor.__neg__ = neg
Tensor.__pow__ = power
Tensor.__matmul__ = matmul
Tensor.sum = sum
Tensor.mean = mean
Tensor.reshape = lambda self, *shape: reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)
Tensor.transpose = lambda self, *axes: transpose(self, axes[0] if len(axes) == 1 and isinstance(axes[0], tuple) else axes)
