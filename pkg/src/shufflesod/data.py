"""Synthetic saliency samples, the rotation/flip augmentation, and 8-bit image IO."""
import colorsys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .autodiff.ops import bilinear_matrix
from .errors import ConfigurationError, GenerationError

TRAIN_SEEDS = range(0, 800)
VAL_SEEDS = range(800, 900)
FG_RANGE = (0.02, 0.6)
MAX_TRIES = 100
SUPERSAMPLE = 4
SHAPES = ("ellipse", "polygon", "ring")


@dataclass
class Sample:
    image: np.ndarray  # [3, H, W] in [0, 1]
    mask: np.ndarray   # [1, H, W] in {0, 1}
    seed: int


def _background(rng, side):
    coarse = rng.uniform(0.25, 0.65, size=(3, 4, 4))
    # low saturation: pull channels toward their mean
    coarse = 0.6 * coarse.mean(axis=0, keepdims=True) + 0.4 * coarse
    up = bilinear_matrix(side, 4)
    bg = up @ coarse @ up.T
    return bg + rng.normal(0.0, 0.03, size=bg.shape)


def _inside(kind, rng, side, px, py):
    cx, cy = rng.uniform(0.2, 0.8, size=2) * side
    radius = rng.uniform(0.08, 0.28) * side
    if kind == "polygon":
        n = rng.integers(3, 8)
        theta = np.sort(rng.uniform(0, 2 * np.pi, size=n))
        rho = radius * rng.uniform(0.6, 1.0, size=n)
        vx, vy = cx + rho * np.cos(theta), cy + rho * np.sin(theta)
        inside = np.zeros(px.shape, dtype=bool)
        for i in range(n):
            x1, y1, x2, y2 = vx[i], vy[i], vx[(i + 1) % n], vy[(i + 1) % n]
            straddle = (y1 > py) != (y2 > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            inside ^= straddle & (px < xint)
        return inside
    aspect = rng.uniform(0.5, 1.0)
    angle = rng.uniform(0, np.pi)
    c, s = np.cos(angle), np.sin(angle)
    u = ((px - cx) * c + (py - cy) * s) / radius
    v = (-(px - cx) * s + (py - cy) * c) / (radius * aspect)
    d = u * u + v * v
    if kind == "ellipse":
        return d <= 1.0
    inner = rng.uniform(0.35, 0.7)
    return (d <= 1.0) & (d >= inner * inner)


def _shape_color(rng):
    h = rng.uniform(0, 1)
    return np.array(colorsys.hsv_to_rgb(h, rng.uniform(0.7, 1.0), rng.uniform(0.75, 1.0)))


def generate_sample(seed, side=64):
    """Deterministic image/mask pair: 1-3 crisp coloured shapes over a smooth noisy background."""
    if side % 32:
        raise ConfigurationError(f"side must be divisible by 32, got {side}")
    rng = np.random.default_rng(seed)
    n_sub = side * SUPERSAMPLE
    sub = (np.arange(n_sub) + 0.5) / SUPERSAMPLE
    px, py = np.meshgrid(sub, sub)
    for _ in range(MAX_TRIES):
        bg = _background(rng, side)
        image = bg.copy()
        mask = np.zeros((side, side), dtype=bool)
        for _ in range(rng.integers(1, 4)):
            kind = SHAPES[rng.integers(len(SHAPES))]
            fine = _inside(kind, rng, side, px, py)
            coverage = fine.reshape(side, SUPERSAMPLE, side, SUPERSAMPLE).mean(axis=(1, 3))
            shape = coverage >= 0.5
            color = _shape_color(rng)
            image[:, shape] = color[:, None] + rng.normal(0.0, 0.03, size=(3, int(shape.sum())))
            mask |= shape
        frac = mask.mean()
        if FG_RANGE[0] <= frac <= FG_RANGE[1]:
            return Sample(np.clip(image, 0.0, 1.0), mask[None].astype(np.float64), seed)
    raise GenerationError(f"seed {seed}: no sample within foreground range after {MAX_TRIES} tries")


def apply_augment(sample, k, flip):
    """Rotate by k*90 degrees, then optionally flip horizontally; image and mask alike."""
    def tf(a):
        a = np.rot90(a, k, axes=(1, 2))
        return np.ascontiguousarray(a[:, :, ::-1] if flip else a)
    return Sample(tf(sample.image), tf(sample.mask), sample.seed)


def augment(sample, seed):
    """Random 90-degree rotation (k uniform in 0..3) and horizontal flip with probability 0.5."""
    if sample.image.shape[1] != sample.image.shape[2]:
        raise ConfigurationError("augmentation requires square samples")
    rng = np.random.default_rng(seed)
    k = int(rng.integers(0, 4))
    flip = bool(rng.random() < 0.5)
    return apply_augment(sample, k, flip)


def build_split(seeds, side):
    """Stack samples for ``seeds`` into ``(images [N,3,S,S], masks [N,1,S,S])``."""
    samples = [generate_sample(s, side) for s in seeds]
    return np.stack([s.image for s in samples]), np.stack([s.mask for s in samples])


# ---------------------------------------------------------------- image IO

def to_uint8(a):
    return np.clip(np.floor(np.asarray(a, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def read_gray(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def read_rgb(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def write_gray(path, arr):
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        arr = to_uint8(arr)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="L").save(path)


def write_rgb(path, image_chw):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(np.transpose(image_chw, (1, 2, 0))), mode="RGB").save(path)


def export_samples(out_dir, seeds, side=64):
    """Write ``images/<seed>.png`` and ``masks/<seed>.png`` for inspection."""
    out = Path(out_dir)
    for seed in seeds:
        s = generate_sample(seed, side)
        write_rgb(out / "images" / f"{seed:05d}.png", s.image)
        write_gray(out / "masks" / f"{seed:05d}.png", s.mask[0])
