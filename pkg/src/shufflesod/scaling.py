"""Feature-map rescaling inside the network.

``pixel_shuffle`` mode moves values between space and channels; ``bilinear``
mode interpolates and keeps the channel count (the interpolation ablation).
"""
from .autodiff import ops
from .errors import ConfigurationError, DimensionError

RESCALE_MODES = ("pixel_shuffle", "bilinear")


def check_mode(mode):
    if mode not in RESCALE_MODES:
        raise ConfigurationError(f"rescale_mode must be one of {RESCALE_MODES}, got {mode!r}")
    return mode


def rescaled_channels(channels, src_side, dst_side, mode):
    """Channel count after moving a [C, src, src] map to the dst grid."""
    check_mode(mode)
    if mode == "bilinear" or src_side == dst_side:
        return channels
    if src_side > dst_side:
        r = src_side // dst_side
        return channels * r * r
    r = dst_side // src_side
    if channels % (r * r):
        raise DimensionError(f"{channels} channels cannot be pixel-shuffled up by {r}")
    return channels // (r * r)


def rescale_to(x, side, mode):
    """Move x [B, C, s, s] onto a side x side grid."""
    src = x.shape[-1]
    if src == side:
        return x
    if mode == "bilinear":
        return ops.resize_bilinear(x, side, side)
    check_mode(mode)
    if src > side:
        if src % side:
            raise DimensionError(f"grid {src} is not an integer multiple of {side}")
        return ops.pixel_unshuffle(x, src // side)
    if side % src:
        raise DimensionError(f"grid {side} is not an integer multiple of {src}")
    return ops.pixel_shuffle(x, side // src)
