"""Four-stage pyramid transformer encoder producing 1/4 ... 1/32 scale features."""
from dataclasses import dataclass

from .autodiff import ops
from .autodiff.nn import LayerNorm, Linear, Module, Parameter
from .errors import ConfigurationError, DimensionError
from .transformer import AttentionConfig, TransformerBlock, grid_to_tokens, tokens_to_grid

STAGE_STRIDES = (4, 8, 16, 32)


@dataclass
class FeaturePyramid:
    features: list  # four Tensors [B, C_s, H/stride_s, W/stride_s]

    def __post_init__(self):
        if len(self.features) != 4:
            raise DimensionError(f"a pyramid has exactly 4 stages, got {len(self.features)}")

    def __getitem__(self, i):
        return self.features[i]

    def __iter__(self):
        return iter(self.features)

    @property
    def sides(self):
        return [f.shape[-1] for f in self.features]


class PatchEmbed(Module):
    """Cut [B,C,H,W] into non-overlapping patches, project each, add a learned positional bias."""

    def __init__(self, rng, c_in, dim, patch, grid):
        super().__init__()
        self.patch = patch
        self.grid = grid
        self.proj = Linear(rng, c_in * patch * patch, dim)
        self.pos = Parameter(0.02 * rng.standard_normal((1, grid[0] * grid[1], dim)))
        self.norm = LayerNorm(dim)

    def forward(self, x):
        H, W = x.shape[-2:]
        if H % self.patch or W % self.patch:
            raise DimensionError(f"patch {self.patch} does not divide {H}x{W}")
        if (H // self.patch, W // self.patch) != tuple(self.grid):
            raise DimensionError(f"input {H}x{W} does not match the configured grid {self.grid}")
        tokens = grid_to_tokens(ops.pixel_unshuffle(x, self.patch))
        return self.norm(self.proj(tokens) + self.pos)


class EncoderStage(Module):
    """Patch merge, a stack of sequence-reduced transformer blocks, final layer norm."""

    def __init__(self, rng, c_in, dim, patch, grid, depth, reduction, heads):
        super().__init__()
        self.embed = PatchEmbed(rng, c_in, dim, patch, (grid, grid))
        cfg = AttentionConfig(dim, heads, reduction)
        self.blocks = [TransformerBlock(rng, cfg) for _ in range(depth)]
        self.norm = LayerNorm(dim)

    def forward(self, x):
        tokens = self.embed(x)
        grid = self.embed.grid
        for block in self.blocks:
            tokens = block(tokens, grid)
        return tokens_to_grid(self.norm(tokens), grid)


class PyramidEncoder(Module):
    """Stage s sees the image at stride 4 (s=1) or the previous stage at stride 2."""

    def __init__(self, rng, side=64, in_channels=3, widths=(16, 32, 64, 128), depths=(1, 1, 2, 1),
                 reductions=(4, 2, 1, 1), heads=2):
        super().__init__()
        if side % 32:
            raise ConfigurationError(f"input side must be divisible by 32, got {side}")
        self.side = side
        self.widths = tuple(widths)
        c_prev = in_channels
        for s in range(4):
            grid = side // STAGE_STRIDES[s]
            if grid % reductions[s]:
                raise ConfigurationError(f"stage {s + 1}: reduction {reductions[s]} does not divide grid {grid}")
            stage = EncoderStage(rng, c_prev, widths[s], 4 if s == 0 else 2, grid,
                                 depths[s], reductions[s], heads)
            setattr(self, f"stage{s + 1}", stage)
            c_prev = widths[s]

    def forward(self, img):
        if img.shape[-1] != self.side or img.shape[-2] != self.side:
            raise ConfigurationError(f"encoder built for side {self.side}, got {tuple(img.shape[-2:])}")
        feats = []
        x = img
        for s in range(4):
            x = getattr(self, f"stage{s + 1}")(x)
            feats.append(x)
        return FeaturePyramid(feats)
