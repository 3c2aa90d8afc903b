"""Context Refinement Module decoder.

Each stage fuses decoder features with the global-context features, emits a
first prediction, turns its uncertainty P1*(1-P1) into a gating map for the
features, and emits a refined second prediction through a transformer block.
Predictions are kept in the pixel-shuffled layout [B, r*r, H/r, W/r] so that
``shuffle(P, r)`` is a full-resolution map.
"""
from dataclasses import dataclass

from .autodiff import ops
from .autodiff.nn import Conv2d, ConvBNAct, Module, Sequential
from .autodiff.tensor import Tensor
from .errors import ConfigurationError, DimensionError
from .scaling import check_mode, rescale_to, rescaled_channels
from .transformer import AttentionConfig, TransformerBlock, grid_to_tokens, tokens_to_grid

DECODER_STRIDES = (4, 8, 16, 32)


@dataclass
class StagePrediction:
    index: int        # 1 (shallowest) .. 4 (deepest)
    scale: int        # r: stage grid is side / r
    logits1: Tensor
    logits2: Tensor
    gate: Tensor      # F2(H(P1)), kept for map dumps
    rescale_mode: str = "pixel_shuffle"

    @property
    def p1(self):
        return ops.sigmoid(self.logits1)

    @property
    def p2(self):
        return ops.sigmoid(self.logits2)

    def fullres_logits(self, which=2):
        logits = self.logits1 if which == 1 else self.logits2
        if self.rescale_mode == "bilinear":
            side = logits.shape[-1] * self.scale
            return ops.resize_bilinear(logits, side, side)
        return ops.pixel_shuffle(logits, self.scale)

    def fullres(self, which=2):
        """[B, 1, H, W] probability map for the first (1) or second (2) prediction."""
        return ops.sigmoid(self.fullres_logits(which))


def uncertainty_map(p1):
    """P1 * (1 - P1): peaks at 0.5, vanishes for confident pixels."""
    return p1 * (1.0 - p1)


def local_context(f_d, gate):
    """f_d * gate + f_d, where gate = F2(H(P1)) has f_d's shape."""
    if f_d.shape != gate.shape:
        raise DimensionError(f"feature {f_d.shape} and gate {gate.shape} differ")
    return f_d * gate + f_d


class CRMStage(Module):
    def __init__(self, rng, in_channels, global_channels, dim, scale, heads=2,
                 rescale_mode="pixel_shuffle", max_tokens=1024, fuse_layers=2):
        super().__init__()
        self.scale = scale
        self.rescale_mode = check_mode(rescale_mode)
        self.max_tokens = max_tokens
        out_ch = scale * scale if rescale_mode == "pixel_shuffle" else 1
        self.uses_global = global_channels > 0
        layers = [ConvBNAct(rng, in_channels + global_channels, dim)]
        layers += [ConvBNAct(rng, dim, dim) for _ in range(fuse_layers - 1)]
        self.f1 = Sequential(*layers)
        self.head1 = Conv2d(rng, dim, out_ch, kernel=1)
        self.f2 = ConvBNAct(rng, out_ch, dim)
        self.block = TransformerBlock(rng, AttentionConfig(dim, heads))
        self.f3 = ConvBNAct(rng, dim, dim)
        self.head2 = Conv2d(rng, dim, out_ch, kernel=1)

    def stage1(self, x, g=None):
        """Fused features f_d and first-prediction logits."""
        if self.uses_global:
            if g is None:
                raise DimensionError("stage built with global context but none given")
            if g.shape[-2:] != x.shape[-2:]:
                raise DimensionError(f"global features {g.shape[-2:]} vs decoder grid {x.shape[-2:]}")
            x = ops.concat([x, g], axis=1)
        f_d = self.f1(x)
        return f_d, self.head1(f_d)

    def stage2(self, m_l):
        """Refined-prediction logits and the transformer output features."""
        B, C, H, W = m_l.shape
        if H * W > self.max_tokens:
            raise ConfigurationError(f"CRM transformer would see {H * W} tokens, bound is {self.max_tokens}")
        feats = tokens_to_grid(self.block(grid_to_tokens(m_l)), (H, W))
        return self.head2(self.f3(feats)), feats

    def forward(self, x, g=None):
        f_d, logits1 = self.stage1(x, g)
        gate = self.f2(uncertainty_map(ops.sigmoid(logits1)))
        m_l = local_context(f_d, gate)
        logits2, feats = self.stage2(m_l)
        return logits1, logits2, gate, feats


class CRMDecoder(Module):
    """Four CRM stages, deepest first; stage 1's second prediction is the network output."""

    def __init__(self, rng, widths, side, dim=32, global_dim=32, heads=2, use_global=True,
                 rescale_mode="pixel_shuffle", max_tokens=1024, patch=16):
        super().__init__()
        self.rescale_mode = check_mode(rescale_mode)
        self.use_global = use_global
        self.global_grid = side // patch
        self.sides = [side // s for s in DECODER_STRIDES]
        for i in range(4):
            in_ch = widths[i] + (dim if i < 3 else 0)
            g_ch = rescaled_channels(global_dim, self.global_grid, self.sides[i], rescale_mode) if use_global else 0
            setattr(self, f"stage{i + 1}", CRMStage(rng, in_ch, g_ch, dim, DECODER_STRIDES[i], heads,
                                                    rescale_mode, max_tokens))
        for i in range(3):
            # carries stage i+2 features up to stage i+1
            out = 4 * dim if rescale_mode == "pixel_shuffle" else dim
            setattr(self, f"up{i + 1}", Conv2d(rng, dim, out, kernel=1))

    def forward(self, pyramid, f_g=None):
        if self.use_global and f_g is None:
            raise DimensionError("decoder built with global context but f_g is missing")
        preds = [None] * 4
        carry = None
        for i in reversed(range(4)):
            x = pyramid[i]
            if carry is not None:
                up = getattr(self, f"up{i + 1}")(carry)
                x = ops.concat([x, rescale_to(up, self.sides[i], self.rescale_mode)], axis=1)
            g = rescale_to(f_g, self.sides[i], self.rescale_mode) if self.use_global else None
            logits1, logits2, gate, carry = getattr(self, f"stage{i + 1}")(x, g)
            preds[i] = StagePrediction(i + 1, DECODER_STRIDES[i], logits1, logits2, gate, self.rescale_mode)
        return preds
