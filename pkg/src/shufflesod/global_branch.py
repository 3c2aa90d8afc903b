"""Patch-wise saliency branch: fuse all encoder scales on the patch grid and predict
whether each patch contains salient pixels."""
from dataclasses import dataclass

import numpy as np

from .autodiff import ops
from .autodiff.nn import ConvBNAct, Linear, Module, Sequential
from .autodiff.tensor import Tensor
from .errors import DimensionError, ValidationError
from .pixel_shuffle import unshuffle
from .scaling import rescale_to, rescaled_channels
from .transformer import AttentionConfig, TransformerBlock, grid_to_tokens, tokens_to_grid


@dataclass
class GlobalContextMap:
    logits: Tensor    # [B, 1, P, P] pre-sigmoid
    prob: Tensor      # P_g, [B, 1, P, P]
    features: Tensor  # f_g, [B, Cg, P, P] post-transformer token features


class GlobalContextBranch(Module):
    def __init__(self, rng, widths, side, patch=16, dim=32, heads=2, rescale_mode="pixel_shuffle",
                 fuse_layers=2):
        super().__init__()
        if side % patch:
            raise DimensionError(f"patch {patch} does not divide side {side}")
        self.grid = side // patch
        self.rescale_mode = rescale_mode
        stage_sides = [side // s for s in (4, 8, 16, 32)]
        fused = sum(rescaled_channels(w, s, self.grid, rescale_mode) for w, s in zip(widths, stage_sides))
        layers = [ConvBNAct(rng, fused, dim)]
        layers += [ConvBNAct(rng, dim, dim) for _ in range(fuse_layers - 1)]
        self.fuse = Sequential(*layers)
        self.block = TransformerBlock(rng, AttentionConfig(dim, heads))
        self.head = Linear(rng, dim, 1)
        self.dim = dim

    def fuse_encoder_features(self, pyramid):
        """Rescale every stage onto the patch grid, concatenate channels, Conv-BN-ReLU fuse."""
        parts = [rescale_to(f, self.grid, self.rescale_mode) for f in pyramid]
        for p in parts:
            if p.shape[-2:] != (self.grid, self.grid):
                raise DimensionError(f"rescaled stage has grid {p.shape[-2:]}, expected {self.grid}")
        return self.fuse(ops.concat(parts, axis=1))

    def predict_global(self, f_fuse):
        tokens = self.block(grid_to_tokens(f_fuse))
        logits = self.head(tokens)
        B = f_fuse.shape[0]
        logits = ops.reshape(ops.transpose(logits, (0, 2, 1)), (B, 1, self.grid, self.grid))
        return GlobalContextMap(logits, ops.sigmoid(logits), tokens_to_grid(tokens, (self.grid, self.grid)))

    def forward(self, pyramid):
        return self.predict_global(self.fuse_encoder_features(pyramid))


def patchwise_gt(mask, patch=16):
    """Binary patch target: max over the channels of the patch-size unshuffle of the mask.

    ``mask`` is [H, W], [1, H, W] or [B, 1, H, W] with values in {0, 1};
    the result is [B, 1, H/patch, W/patch] (B = 1 for unbatched input).
    """
    m = np.asarray(mask, dtype=np.float64)
    if not np.isin(m, (0.0, 1.0)).all():
        raise ValidationError("ground-truth mask must be binary {0, 1}")
    while m.ndim < 4:
        m = m[None]
    if m.shape[1] != 1:
        raise DimensionError(f"mask must have one channel, got {m.shape}")
    return unshuffle(m, patch).max(axis=1, keepdims=True)


def global_loss(prob, target):
    """Mean binary cross-entropy over patch cells."""
    if prob.shape != np.shape(target):
        raise DimensionError(f"prediction {prob.shape} vs target {np.shape(target)}")
    t = np.asarray(target, dtype=np.float64)
    p = prob if isinstance(prob, Tensor) else Tensor(prob)
    loss = -(ops.log(p) * t + ops.log(1.0 - p) * (1.0 - t))
    return ops.mean(loss)


def global_loss_from_logits(logits, target):
    return ops.mean(ops.bce_with_logits(logits, np.asarray(target, dtype=np.float64)))
