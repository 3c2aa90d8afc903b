"""Multi-head attention (full and sequence-reduced) and the pre-norm transformer block."""
from dataclasses import dataclass

import numpy as np

from .autodiff import ops
from .autodiff.nn import LayerNorm, Linear, Module
from .errors import DimensionError


@dataclass(frozen=True)
class AttentionConfig:
    dim: int
    heads: int = 2
    reduction: int | None = None  # None: full attention; r >= 1: keys/values from the reduced grid

    def __post_init__(self):
        if self.dim % self.heads:
            raise DimensionError(f"dim {self.dim} not divisible by {self.heads} heads")
        if self.reduction is not None and self.reduction < 1:
            raise DimensionError(f"reduction must be >= 1, got {self.reduction}")

    @property
    def head_dim(self):
        return self.dim // self.heads


def tokens_to_grid(x, grid):
    """[B, H*W, C] -> [B, C, H, W]."""
    H, W = grid
    B, N, C = x.shape
    if N != H * W:
        raise DimensionError(f"{N} tokens do not form a {H}x{W} grid")
    return ops.transpose(ops.reshape(x, (B, H, W, C)), (0, 3, 1, 2))


def grid_to_tokens(x):
    """[B, C, H, W] -> [B, H*W, C]."""
    B, C, H, W = x.shape
    return ops.reshape(ops.transpose(x, (0, 2, 3, 1)), (B, H * W, C))


def spatial_reduce(x, grid, r, proj, norm):
    """Regroup r x r cells into single tokens of C*r*r features, project back to C, layer-norm.

    The regrouping is a pixel unshuffle of the token grid, so nothing is
    interpolated.
    """
    H, W = grid
    if H % r or W % r:
        raise DimensionError(f"reduction {r} does not divide token grid {H}x{W}")
    cells = ops.pixel_unshuffle(tokens_to_grid(x, grid), r)
    return norm(proj(grid_to_tokens(cells)))


def _split_heads(x, heads):
    B, N, C = x.shape
    return ops.transpose(ops.reshape(x, (B, N, heads, C // heads)), (0, 2, 1, 3))


def _merge_heads(x):
    B, h, N, d = x.shape
    return ops.reshape(ops.transpose(x, (0, 2, 1, 3)), (B, N, h * d))


def attention_weights(q, k, heads):
    """Softmax(Q K^T / sqrt(d_head)) per head: [B, heads, N, M]."""
    if q.shape[-1] != k.shape[-1] or q.shape[-1] % heads:
        raise DimensionError(f"query {q.shape} and key {k.shape} incompatible with {heads} heads")
    d_head = q.shape[-1] // heads
    qh, kh = _split_heads(q, heads), _split_heads(k, heads)
    scores = ops.matmul(qh, ops.transpose(kh, (0, 1, 3, 2))) * (1.0 / np.sqrt(d_head))
    return ops.softmax(scores, axis=-1)


def attention(q, k, v, heads, proj=None):
    """Scaled dot-product attention over heads, concatenated and optionally projected.

    q: [B, N, C]; k, v: [B, M, C].
    """
    if k.shape != v.shape or k.shape[0] != q.shape[0]:
        raise DimensionError(f"key {k.shape} / value {v.shape} / query {q.shape} mismatch")
    weights = attention_weights(q, k, heads)
    out = _merge_heads(ops.matmul(weights, _split_heads(v, heads)))
    return out if proj is None else proj(out)


class MultiHeadAttention(Module):
    """Self-attention; with ``config.reduction`` set, keys and values come from the reduced grid."""

    def __init__(self, rng, config):
        super().__init__()
        self.config = config
        dim = config.dim
        self.q = Linear(rng, dim, dim)
        self.k = Linear(rng, dim, dim)
        self.v = Linear(rng, dim, dim)
        self.proj = Linear(rng, dim, dim)
        if config.reduction is not None:
            r = config.reduction
            self.sr = Linear(rng, dim * r * r, dim)
            self.sr_norm = LayerNorm(dim)
        self.last_score_shape = None

    def forward(self, x, grid=None):
        if x.shape[-1] != self.config.dim:
            raise DimensionError(f"attention expects width {self.config.dim}, got {x.shape[-1]}")
        src = x
        if self.config.reduction is not None:
            if grid is None:
                raise DimensionError("sequence-reduced attention needs the token grid")
            src = spatial_reduce(x, grid, self.config.reduction, self.sr, self.sr_norm)
        self.last_score_shape = (x.shape[1], src.shape[1])
        return attention(self.q(x), self.k(src), self.v(src), self.config.heads, self.proj)


def sr_attention(x, grid, module):
    """Sequence-reduced attention: Q from ``x``, K and V from ``spatial_reduce(x)``."""
    if module.config.reduction is None:
        raise DimensionError("module was built without a reduction factor")
    return module(x, grid)


class MLP(Module):
    def __init__(self, rng, dim, ratio=4):
        super().__init__()
        self.fc1 = Linear(rng, dim, dim * ratio)
        self.fc2 = Linear(rng, dim * ratio, dim)

    def forward(self, x):
        return self.fc2(ops.gelu(self.fc1(x)))


class TransformerBlock(Module):
    """Pre-norm block: x + Attn(LN(x)), then + MLP(LN(.)) with a GeLU hidden layer."""

    def __init__(self, rng, config, mlp_ratio=4):
        super().__init__()
        self.norm1 = LayerNorm(config.dim)
        self.attn = MultiHeadAttention(rng, config)
        self.norm2 = LayerNorm(config.dim)
        self.mlp = MLP(rng, config.dim, mlp_ratio)

    def forward(self, x, grid=None):
        x = x + self.attn(self.norm1(x), grid)
        return x + self.mlp(self.norm2(x))
