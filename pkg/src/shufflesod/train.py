"""Training loop, evaluation driver and single-image inference."""
import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Adam, Tensor, backward, load_checkpoint, no_grad, save_checkpoint
from .autodiff.ops import bilinear_matrix
from .config import RunConfig
from .data import Sample, augment, build_split, read_rgb, to_uint8, write_gray
from .errors import CheckpointError, NumericalError
from .global_branch import global_loss_from_logits, patchwise_gt
from .losses import LossBreakdown, decoder_loss, total_loss
from .metrics import evaluate_arrays
from .model import SaliencyNetwork

log = logging.getLogger(__name__)

EVAL_BATCH = 20


def compute_loss(net, images, masks, patch=16):
    """Forward pass plus the full objective; returns ``(loss_tensor, LossBreakdown, output)``."""
    out = net(images)
    local, p1_terms, p2_terms = decoder_loss(out.stages, masks)
    if out.global_map is not None:
        lg = global_loss_from_logits(out.global_map.logits, patchwise_gt(masks, patch))
        lg_value = lg.item()
    else:
        lg, lg_value = 0.0, 0.0
    loss = total_loss(lg, local)
    breakdown = LossBreakdown(lg_value, p1_terms, p2_terms, local_loss=local.item(), total=loss.item())
    return loss, breakdown, out


def _augment_seed(run_seed, epoch, sample_seed):
    return int(np.random.SeedSequence([run_seed, epoch, sample_seed]).generate_state(1)[0])


def stage_mae(net, images, masks):
    """Mean absolute error of every stage's P1 and P2 (full resolution), eval mode.

    Returns ``{"P1": [4 values], "P2": [4 values], "pred": stage-1 P2 maps}``.
    """
    net.eval()
    sums = np.zeros((2, 4))
    preds = []
    with no_grad():
        for i in range(0, len(images), EVAL_BATCH):
            x, g = images[i:i + EVAL_BATCH], masks[i:i + EVAL_BATCH]
            out = net(x)
            for s, stage in enumerate(out.stages):
                for w in (1, 2):
                    err = np.abs(stage.fullres(w).data - g).mean(axis=(1, 2, 3))
                    sums[w - 1, s] += err.sum()
            preds.append(out.stages[0].fullres(2).data[:, 0])
    net.train()
    mae = sums / len(images)
    return {"P1": mae[0].tolist(), "P2": mae[1].tolist(), "pred": np.concatenate(preds)}


@dataclass
class TrainResult:
    out_dir: Path
    best_epoch: int
    best_val_mae: float
    epoch_losses: list    # mean total loss per epoch
    val_history: list     # per epoch {"P1": [...], "P2": [...]}


def checkpoint_meta(cfg, **extra):
    # out_dir is left out so identical runs written to different places give identical bytes
    text = "".join(l for l in cfg.to_text().splitlines(keepends=True) if not l.startswith("out_dir "))
    meta = {"config": text}
    meta.update(extra)
    return meta


def train(cfg, progress=None):
    """Train from scratch under ``cfg``; writes logs and checkpoints into ``cfg.out_dir``.

    Files: ``config.txt``, ``steps.csv`` (loss breakdown per step), ``val.csv``
    (per-epoch stage MAE), ``init.ckpt``, ``best.ckpt``, ``final.ckpt``.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.txt")
    net = SaliencyNetwork.from_config(cfg)
    save_checkpoint(out / "init.ckpt", net.state_dict(), checkpoint_meta(cfg, epoch=0))

    train_seeds = list(cfg.train_range)
    images, masks = build_split(train_seeds, cfg.side)
    val_images, val_masks = build_split(cfg.val_range, cfg.side)

    opt = Adam(net.parameter_groups(), cfg.lrs(0))
    epoch_losses, val_history = [], []
    best_mae, best_epoch = np.inf, -1
    with open(out / "steps.csv", "w", newline="") as steps_fh, open(out / "val.csv", "w", newline="") as val_fh:
        steps = None
        val_writer = csv.writer(val_fh)
        val_writer.writerow(["epoch"] + [f"mae_stage{i}_P{w}" for w in (1, 2) for i in range(1, 5)])
        step = 0
        for epoch in range(cfg.epochs):
            opt.lrs = cfg.lrs(epoch)
            order = np.random.default_rng([cfg.seed, epoch]).permutation(len(train_seeds))
            totals = []
            for b in range(0, len(order) - cfg.batch_size + 1, cfg.batch_size):
                idx = order[b:b + cfg.batch_size]
                if cfg.augment:
                    batch = [augment(Sample(images[i], masks[i], train_seeds[i]),
                                     _augment_seed(cfg.seed, epoch, train_seeds[i])) for i in idx]
                    x = np.stack([s.image for s in batch])
                    g = np.stack([s.mask for s in batch])
                else:
                    x, g = images[idx], masks[idx]
                loss, breakdown, _ = _guarded_loss(net, x, g, cfg, out, epoch, step,
                                                   [train_seeds[i] for i in idx])
                opt.zero_grad()
                backward(loss)
                opt.step()
                row = {"epoch": epoch, "step": step, **breakdown.as_row()}
                if steps is None:
                    steps = csv.DictWriter(steps_fh, fieldnames=list(row))
                    steps.writeheader()
                steps.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
                totals.append(breakdown.total)
                step += 1
            epoch_losses.append(float(np.mean(totals)))
            val = stage_mae(net, val_images, val_masks)
            del val["pred"]
            val_history.append(val)
            val_writer.writerow([epoch] + [repr(v) for v in val["P1"] + val["P2"]])
            val_fh.flush()
            if val["P2"][0] < best_mae:
                best_mae, best_epoch = val["P2"][0], epoch
                save_checkpoint(out / "best.ckpt", net.state_dict(),
                                checkpoint_meta(cfg, epoch=epoch, val_mae=repr(best_mae)))
            if progress:
                progress(epoch, epoch_losses[-1], val)
    save_checkpoint(out / "final.ckpt", net.state_dict(), checkpoint_meta(cfg, epoch=cfg.epochs))
    summary = {"best_epoch": best_epoch, "best_val_mae": best_mae, "epoch_losses": epoch_losses,
               "val_history": val_history, "fingerprint": cfg.fingerprint()}
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    return TrainResult(out, best_epoch, best_mae, epoch_losses, val_history)


def _guarded_loss(net, x, g, cfg, out, epoch, step, seeds):
    loss, breakdown, output = None, None, None
    try:
        loss, breakdown, output = compute_loss(net, x, g, cfg.patch)
        ok = np.isfinite(breakdown.total)
    except NumericalError:
        ok = False
    if not ok:
        dump = {"epoch": epoch, "step": step, "batch_seeds": [int(s) for s in seeds],
                "breakdown": breakdown.as_row() if breakdown else None}
        (out / "nonfinite_dump.json").write_text(json.dumps(dump, indent=1, default=repr))
        raise NumericalError(f"non-finite loss at epoch {epoch} step {step}; batch seeds {seeds}")
    return loss, breakdown, output


def load_model(checkpoint, cfg=None):
    """Rebuild the network for ``checkpoint``; ``cfg`` defaults to the one stored inside it."""
    state, meta = load_checkpoint(checkpoint)
    if cfg is None:
        if "config" not in meta:
            raise CheckpointError(f"{checkpoint} carries no config; pass one explicitly")
        cfg = RunConfig.from_text(meta["config"], {"out_dir": str(Path(checkpoint).parent)})
    net = SaliencyNetwork.from_config(cfg)
    net.load_state_dict(state)
    net.eval()
    return net, cfg, meta


def evaluate(cfg, checkpoint, split="val", out_dir=None):
    """Run a checkpoint over a seed split; write predictions and metric files.

    Returns ``(MetricReport, stage_mae_dict)``.
    """
    net, cfg, _ = load_model(checkpoint, cfg)
    seeds = cfg.val_range if split == "val" else cfg.train_range
    images, masks = build_split(seeds, cfg.side)
    stages = stage_mae(net, images, masks)
    preds = stages.pop("pred")
    report = evaluate_arrays(preds, masks[:, 0])
    out = Path(out_dir or Path(cfg.out_dir) / f"eval_{split}")
    report.write(out)
    with open(out / "stage_mae.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "mae_P1", "mae_P2"])
        for i in range(4):
            w.writerow([i + 1, repr(stages["P1"][i]), repr(stages["P2"][i])])
    for seed, p in zip(seeds, preds):
        write_gray(out / "pred" / f"{seed:05d}.png", to_uint8(p))
    for seed, m in zip(seeds, masks):
        write_gray(out / "gt" / f"{seed:05d}.png", to_uint8(m[0]))
    return report, stages


def _resize(arr_chw, h, w):
    A = bilinear_matrix(h, arr_chw.shape[-2])
    B = bilinear_matrix(w, arr_chw.shape[-1])
    return A @ arr_chw @ B.T


def predict_image(net, side, image_hwc):
    """Saliency map at the image's own size; bilinear only at the input and output boundary."""
    H, W = image_hwc.shape[:2]
    x = _resize(np.transpose(image_hwc.astype(np.float64) / 255.0, (2, 0, 1)), side, side)
    with no_grad():
        out = net(x[None])
    full = out.prediction.data[0]
    return np.clip(_resize(full, H, W)[0], 0.0, 1.0), out


def infer(checkpoint, image_path, out_path, dump_dir=None):
    """Write an 8-bit saliency map for ``image_path`` with the input's spatial size."""
    net, cfg, _ = load_model(checkpoint)
    image = read_rgb(image_path)
    sal, out = predict_image(net, cfg.side, image)
    write_gray(out_path, to_uint8(sal))
    if dump_dir is not None:
        dump_maps(out, dump_dir)
    return sal


def dump_maps(out, dump_dir):
    """Global-context map plus per-stage P1, gate and P2 maps as grayscale images."""
    d = Path(dump_dir)
    if out.global_map is not None:
        write_gray(d / "global_context.png", to_uint8(out.global_map.prob.data[0, 0]))
    for stage in out.stages:
        i = stage.index
        write_gray(d / f"stage{i}_P1.png", to_uint8(stage.fullres(1).data[0, 0]))
        write_gray(d / f"stage{i}_P2.png", to_uint8(stage.fullres(2).data[0, 0]))
        gate = stage.gate.data[0].mean(axis=0)
        span = gate.max() - gate.min()
        write_gray(d / f"stage{i}_local_context.png", to_uint8((gate - gate.min()) / span if span > 0 else gate * 0))


def overfit_global(n_samples=20, steps=500, side=64, seed=0, lr=1e-3, target=0.1):
    """Train encoder + global branch alone on fixed samples; returns the loss trace.

    Stops early once the full-batch patch loss drops below ``target``.
    """
    cfg = RunConfig(side=side, seed=seed)
    net = SaliencyNetwork.from_config(cfg)
    images, masks = build_split(range(n_samples), side)
    x = Tensor(images)
    gg = patchwise_gt(masks, cfg.patch)
    params = net.encoder.parameters() + net.branch.parameters()
    opt = Adam({"all": params}, {"all": lr})
    trace = []
    for _ in range(steps):
        pyramid = net.encoder(x)
        gmap = net.branch(pyramid)
        loss = global_loss_from_logits(gmap.logits, gg)
        trace.append(loss.item())
        if trace[-1] < target:
            break
        opt.zero_grad()
        backward(loss)
        opt.step()
    return trace


def train_cached(cfg, cache_root):
    """Train once per config fingerprint under ``cache_root``; later calls reuse the finished run.

    Training is bit-deterministic, so a finished run directory whose recorded
    fingerprint matches stands in for a fresh run.
    """
    run_dir = Path(cache_root) / cfg.fingerprint()
    summary_file = run_dir / "summary.json"
    if summary_file.exists():
        summary = json.loads(summary_file.read_text())
        if summary.get("fingerprint") == cfg.fingerprint():
            return TrainResult(run_dir, summary["best_epoch"], summary["best_val_mae"],
                               summary["epoch_losses"], summary["val_history"])
    return train(cfg.replace(out_dir=str(run_dir)))
