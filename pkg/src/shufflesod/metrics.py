"""Saliency evaluation: MAE, F-beta, E-measure, S-measure, PR and F curves.

Predictions are quantized to 8 bits before any threshold sweep so curves are
reproducible. Dataset figures are means of per-image values.
"""
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DimensionError, ValidationError

BETA2 = 0.3
ALPHA = 0.5
N_THRESHOLDS = 256
EPS = np.finfo(np.float64).eps


def _pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise DimensionError(f"prediction {pred.shape} vs ground truth {gt.shape}")
    return pred, gt


def _binary_gt(gt):
    if not np.isin(gt, (0.0, 1.0)).all():
        raise ValidationError("ground truth must be binary {0, 1}")
    return gt > 0.5


def quantize(pred):
    """Map [0, 1] values to integer levels 0..255."""
    return np.clip(np.floor(np.asarray(pred, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def mae(pred, gt):
    pred, gt = _pair(pred, gt)
    return float(np.mean(np.abs(pred - gt)))


def f_from_pr(precision, recall, beta2=BETA2):
    precision = np.asarray(precision, dtype=np.float64)
    recall = np.asarray(recall, dtype=np.float64)
    den = beta2 * precision + recall
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(den > 0, (1.0 + beta2) * precision * recall / np.where(den > 0, den, 1.0), 0.0)
    return f


def threshold_pr(pred, gt):
    """Precision and recall of ``quantized(pred) >= t`` for t = 0..255.

    Empty selections give precision 0; an empty ground truth gives recall 0.
    """
    pred, gt = _pair(pred, gt)
    fg = _binary_gt(gt)
    hist_all, hist_fg = kernels.level_counts(quantize(pred), fg)
    # counts of pixels with level >= t
    selected = np.cumsum(hist_all[::-1])[::-1].astype(np.float64)
    tp = np.cumsum(hist_fg[::-1])[::-1].astype(np.float64)
    n_fg = float(fg.sum())
    precision = np.where(selected > 0, tp / np.maximum(selected, 1.0), 0.0)
    recall = tp / n_fg if n_fg > 0 else np.zeros(N_THRESHOLDS)
    return precision, recall


def adaptive_threshold(pred):
    """Twice the mean prediction, capped at 1."""
    return min(2.0 * float(np.mean(pred)), 1.0)


def adaptive_level(pred):
    """Integer level equivalent to binarizing the quantized map at the adaptive threshold.

    Level 0 would mark every pixel as foreground, so the level is at least 1.
    """
    return max(int(np.ceil(adaptive_threshold(quantize(pred) / 255.0) * 255.0 - 1e-9)), 1)


@dataclass
class FbetaResult:
    value: float
    threshold: int        # 8-bit level used (argmax over 1..255 for the max policy)
    empty_gt: bool        # recall undefined; value guarded to 0


def fbeta_detail(pred, gt, policy="max", beta2=BETA2):
    if policy not in ("max", "adaptive"):
        raise ValueError(f"unknown threshold policy {policy!r}")
    precision, recall = threshold_pr(pred, gt)
    empty = not np.any(np.asarray(gt) > 0.5)
    f = f_from_pr(precision, recall, beta2)
    # level 0 selects every pixel whatever the prediction, so per-image scores start at 1
    t = 1 + int(np.argmax(f[1:])) if policy == "max" else adaptive_level(pred)
    return FbetaResult(float(f[t]), t, empty)


def fbeta(pred, gt, policy="max", beta2=BETA2):
    """F-beta with beta^2 = 0.3 at the best of 256 thresholds ("max") or at 2*mean ("adaptive")."""
    return fbeta_detail(pred, gt, policy, beta2).value


def e_measure(pred_binary, gt):
    """Enhanced-alignment measure between a binary prediction and the ground truth."""
    fm, gt = _pair(pred_binary, gt)
    g = _binary_gt(gt).astype(np.float64)
    fm = (fm > 0.5).astype(np.float64)
    if g.sum() == 0:
        enhanced = 1.0 - fm
    elif g.sum() == g.size:
        enhanced = fm
    else:
        dfm = fm - fm.mean()
        dgt = g - g.mean()
        align = 2.0 * dgt * dfm / (dgt * dgt + dfm * dfm + EPS)
        enhanced = (align + 1.0) ** 2 / 4.0
    return float(np.mean(enhanced))


def adaptive_binarize(pred):
    return (quantize(pred).astype(np.int64) >= adaptive_level(pred)).astype(np.float64)


# ---------------------------------------------------------------- structure measure

def _object_score(values):
    if values.size == 0:
        return 0.0
    x = values.mean()
    sigma = values.std(ddof=1) if values.size > 1 else 0.0
    return 2.0 * x / (x * x + 1.0 + sigma + EPS)


def s_object(pred, gt):
    fg = gt > 0.5
    u = fg.mean()
    o_fg = _object_score(pred[fg])
    o_bg = _object_score(1.0 - pred[~fg])
    return u * o_fg + (1.0 - u) * o_bg


def _split_index(total, count, n):
    """Pixel boundary nearest to the centroid ``total / count`` (pixel-centre coordinates).

    Computed in integers; exact ties go toward the image centre so that the
    split of a mirrored mask is the mirrored split.
    """
    num, den = 2 * total + count, 2 * count  # centroid + 0.5 as a fraction
    q, rem = divmod(num, den)
    if 2 * rem > den or (2 * rem == den and 2 * num < n * den):
        q += 1
    return q


def _centroid(fg):
    h, w = fg.shape
    if not fg.any():
        return w // 2, h // 2
    ys, xs = np.nonzero(fg)
    n = len(xs)
    return _split_index(int(xs.sum()), n, w), _split_index(int(ys.sum()), n, h)


def _ssim(pred, gt):
    n = pred.size
    if n == 0:
        return 0.0
    x, y = pred.mean(), gt.mean()
    sx = ((pred - x) ** 2).sum() / (n - 1 + EPS)
    sy = ((gt - y) ** 2).sum() / (n - 1 + EPS)
    sxy = ((pred - x) * (gt - y)).sum() / (n - 1 + EPS)
    alpha = 4.0 * x * y * sxy
    beta = (x * x + y * y) * (sx + sy)
    if alpha != 0:
        return alpha / (beta + EPS)
    if beta == 0:
        return 1.0
    return 0.0


def s_region(pred, gt):
    fg = gt > 0.5
    h, w = fg.shape
    X, Y = _centroid(fg)
    g = fg.astype(np.float64)
    area = h * w
    w1 = X * Y / area
    w2 = (w - X) * Y / area
    w3 = X * (h - Y) / area
    w4 = 1.0 - w1 - w2 - w3
    parts = [(slice(0, Y), slice(0, X)), (slice(0, Y), slice(X, w)),
             (slice(Y, h), slice(0, X)), (slice(Y, h), slice(X, w))]
    scores = [_ssim(pred[r, c], g[r, c]) for r, c in parts]
    return w1 * scores[0] + w2 * scores[1] + w3 * scores[2] + w4 * scores[3]


def combine_structure(so, sr, alpha=ALPHA):
    return alpha * so + (1.0 - alpha) * sr


def s_measure(pred, gt, alpha=ALPHA):
    """Structure measure: alpha * object-aware + (1 - alpha) * region-aware similarity."""
    pred, gt = _pair(pred, gt)
    if pred.ndim != 2:
        raise DimensionError(f"s_measure expects 2-D maps, got {pred.shape}")
    _binary_gt(gt)
    y = gt.mean()
    if y == 0:
        return float(1.0 - pred.mean())
    if y == 1:
        return float(pred.mean())
    return float(max(combine_structure(s_object(pred, gt), s_region(pred, gt), alpha), 0.0))


# ---------------------------------------------------------------- dataset level

@dataclass
class PairMetrics:
    mae: float
    fbeta_max: float
    fbeta_adaptive: float
    e_measure: float
    s_measure: float
    precision: np.ndarray
    recall: np.ndarray
    f_curve: np.ndarray


def pair_metrics(pred, gt):
    """All metrics for one 2-D prediction in [0, 1] and binary ground truth."""
    pred, gt = _pair(pred, gt)
    pred_q = quantize(pred) / 255.0
    precision, recall = threshold_pr(pred_q, gt)
    f = f_from_pr(precision, recall)
    return PairMetrics(
        mae=mae(pred_q, gt),
        fbeta_max=float(f[1:].max()),
        fbeta_adaptive=fbeta(pred_q, gt, "adaptive"),
        e_measure=e_measure(adaptive_binarize(pred_q), gt),
        s_measure=s_measure(pred_q, gt),
        precision=precision, recall=recall, f_curve=f,
    )


@dataclass
class MetricReport:
    mae: float
    fbeta_max: float
    fbeta_mean: float
    fbeta_adaptive: float
    e_measure: float
    s_measure: float
    pr_curve: np.ndarray   # [256, 2] (precision, recall) per threshold
    f_curve: np.ndarray    # [256]
    count: int
    missing: list = field(default_factory=list)

    def scalars(self):
        return {"mae": self.mae, "fbeta_max": self.fbeta_max, "fbeta_mean": self.fbeta_mean,
                "fbeta_adaptive": self.fbeta_adaptive, "e_measure": self.e_measure,
                "s_measure": self.s_measure}

    def table(self):
        lines = [f"{'metric':<16}{'value':>10}"]
        lines += [f"{k:<16}{v:>10.4f}" for k, v in self.scalars().items()]
        lines.append(f"{'images':<16}{self.count:>10d}")
        return "\n".join(lines)

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "value"])
            for k, v in self.scalars().items():
                w.writerow([k, repr(float(v))])
            w.writerow(["images", self.count])
        with open(out / "pr_curve.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["threshold", "precision", "recall"])
            for t in range(N_THRESHOLDS):
                w.writerow([t, repr(float(self.pr_curve[t, 0])), repr(float(self.pr_curve[t, 1]))])
        with open(out / "f_curve.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["threshold", "f"])
            for t in range(N_THRESHOLDS):
                w.writerow([t, repr(float(self.f_curve[t]))])


def aggregate(pairs, missing=()):
    if not pairs:
        raise ValidationError("cannot evaluate an empty dataset")
    precision = np.mean([p.precision for p in pairs], axis=0)
    recall = np.mean([p.recall for p in pairs], axis=0)
    f_curve = np.mean([p.f_curve for p in pairs], axis=0)
    return MetricReport(
        mae=float(np.mean([p.mae for p in pairs])),
        fbeta_max=float(f_curve[1:].max()),
        fbeta_mean=float(f_curve[1:].mean()),
        fbeta_adaptive=float(np.mean([p.fbeta_adaptive for p in pairs])),
        e_measure=float(np.mean([p.e_measure for p in pairs])),
        s_measure=float(np.mean([p.s_measure for p in pairs])),
        pr_curve=np.stack([precision, recall], axis=1),
        f_curve=f_curve,
        count=len(pairs),
        missing=list(missing),
    )


def pr_curves(preds, gts):
    """Dataset-mean precision/recall and F curves over 256 thresholds."""
    pairs = [pair_metrics(p, g) for p, g in zip(preds, gts)]
    report = aggregate(pairs)
    return report.pr_curve, report.f_curve


def evaluate_arrays(preds, gts):
    return aggregate([pair_metrics(p, g) for p, g in zip(preds, gts)])


_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


def _stems(directory):
    return {p.stem: p for p in sorted(Path(directory).iterdir()) if p.suffix.lower() in _IMAGE_SUFFIXES}


def evaluate_dataset(pred_dir, gt_dir):
    """Evaluate 8-bit grayscale predictions against same-stem ground-truth files.

    Stems present on only one side are skipped and listed in ``report.missing``.
    """
    from .data import read_gray

    preds, gts = _stems(pred_dir), _stems(gt_dir)
    missing = sorted(set(preds) ^ set(gts))
    pairs = []
    for stem in sorted(set(preds) & set(gts)):
        pred = read_gray(preds[stem]) / 255.0
        gt = (read_gray(gts[stem]) >= 128).astype(np.float64)
        if pred.shape != gt.shape:
            raise DimensionError(f"{stem}: prediction {pred.shape} vs ground truth {gt.shape}")
        pairs.append(pair_metrics(pred, gt))
    return aggregate(pairs, missing)
