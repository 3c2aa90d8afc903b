"""Boundary-weighted BCE per decoder stage, the staged sum, and the total objective."""
from dataclasses import dataclass, field

import numpy as np

from .autodiff import ops
from .autodiff.tensor import Tensor
from .errors import DimensionError, NumericalError, ValidationError

STAGE_WEIGHTS = (0.5, 0.7, 0.9, 1.1)  # stage 1 (shallow) .. stage 4 (deep)
BOUNDARY_GAIN = 5.0
PROB_EPS = 1e-12


def pool_window(side):
    """Boundary pooling window: 31 px at side 224, scaled with side, odd, at least 3."""
    k = 31.0 * side / 224.0
    k = 2 * int(np.floor((k - 1.0) / 2.0 + 0.5)) + 1
    return max(k, 3)


def mean_pool_same(g, k):
    """k x k box mean, stride 1, averaged over the in-image pixels of each window.

    Excluding the padding keeps a constant mask's weights at exactly 1.
    """
    pad = k // 2
    H, W = g.shape[-2:]

    def box(a):
        p = np.pad(a, [(0, 0)] * (a.ndim - 2) + [(pad + 1, pad), (pad + 1, pad)])
        c = p.cumsum(-2).cumsum(-1)
        return c[..., k:k + H, k:k + W] - c[..., :H, k:k + W] - c[..., k:k + H, :W] + c[..., :H, :W]
    return box(g) / box(np.ones((H, W)))


def boundary_weights(gt, window):
    """1 + 5 * |mean_pool(G) - G|: 1 in flat regions, larger near mask edges."""
    return 1.0 + BOUNDARY_GAIN * np.abs(mean_pool_same(gt, window) - gt)


def _check_gt(pred_shape, gt):
    gt = np.asarray(gt, dtype=np.float64)
    if gt.shape != tuple(pred_shape):
        raise DimensionError(f"prediction {tuple(pred_shape)} vs ground truth {gt.shape}")
    if not np.isin(gt, (0.0, 1.0)).all():
        raise ValidationError("ground truth must be binary {0, 1}")
    return gt


def _weighted_mean(per_pixel, w):
    # per image: sum(w * l) / sum(w), then mean over the batch
    axes = tuple(range(1, per_pixel.ndim))
    return ops.mean(ops.sum(per_pixel * w, axis=axes) * (1.0 / w.sum(axis=axes)))


def weighted_bce(pred, gt, window=None):
    """Boundary-weighted BCE of probabilities ``pred`` [B,1,H,W] against binary ``gt``."""
    pred = pred if isinstance(pred, Tensor) else Tensor(pred)
    gt = _check_gt(pred.shape, gt)
    window = window or pool_window(gt.shape[-1])
    w = boundary_weights(gt, window)
    clipped = np.clip(pred.data, PROB_EPS, 1.0 - PROB_EPS)
    if np.any(clipped != pred.data):
        pred = pred + (clipped - pred.data)  # value clamp, gradient passes through
    bce = -(ops.log(pred) * gt + ops.log(1.0 - pred) * (1.0 - gt))
    return _weighted_mean(bce, w)


def weighted_bce_logits(logits, gt, window=None, weights=None):
    """Same loss evaluated from logits (numerically stable; used for training)."""
    gt = _check_gt(logits.shape, gt)
    if weights is None:
        weights = boundary_weights(gt, window or pool_window(gt.shape[-1]))
    return _weighted_mean(ops.bce_with_logits(logits, gt), weights)


@dataclass
class LossBreakdown:
    global_loss: float
    stage_p1: list = field(default_factory=list)
    stage_p2: list = field(default_factory=list)
    weights: tuple = STAGE_WEIGHTS
    local_loss: float = 0.0
    total: float = 0.0

    def as_row(self):
        row = {"L_g": self.global_loss}
        for i, (a, b) in enumerate(zip(self.stage_p1, self.stage_p2), start=1):
            row[f"L_w{i}_P1"] = a
            row[f"L_w{i}_P2"] = b
        row["L_l"] = self.local_loss
        row["L"] = self.total
        return row


def decoder_loss(stages, gt, window=None):
    """Sum over stages of lambda_i * (L_w(P1) + L_w(P2)), all against the full-resolution gt.

    Returns ``(loss_tensor, per_stage_p1, per_stage_p2)``.
    """
    if len(stages) != 4:
        raise DimensionError(f"expected 4 decoder stages, got {len(stages)}")
    gt = np.asarray(gt, dtype=np.float64)
    weights = boundary_weights(gt, window or pool_window(gt.shape[-1]))
    total = None
    p1_terms, p2_terms = [], []
    for stage, lam in zip(stages, STAGE_WEIGHTS):
        l1 = weighted_bce_logits(stage.fullres_logits(1), gt, weights=weights)
        l2 = weighted_bce_logits(stage.fullres_logits(2), gt, weights=weights)
        p1_terms.append(l1.item())
        p2_terms.append(l2.item())
        term = (l1 + l2) * lam
        total = term if total is None else total + term
    return total, p1_terms, p2_terms


def combine_stage_losses(p1_terms, p2_terms):
    """Scalar form of the staged sum for already-evaluated per-stage losses."""
    return float(sum(lam * (a + b) for lam, a, b in zip(STAGE_WEIGHTS, p1_terms, p2_terms)))


def total_loss(global_term, local_term):
    for name, v in (("L_g", global_term), ("L_l", local_term)):
        value = v.item() if isinstance(v, Tensor) else float(v)
        if not np.isfinite(value):
            raise NumericalError(f"{name} is not finite ({value})")
    return global_term + local_term
