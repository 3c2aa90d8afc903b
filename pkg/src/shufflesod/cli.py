"""Command-line entry point: ``shufflesod <verb> ...``.

Relative output paths are resolved under ``$SHUFFLESOD_OUTPUT`` when it is
set. Exit status is 0 on success, 1 on validation or input errors, 2 on
numerical failures (non-finite loss, failed gradient checks).
"""
import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import NumericalError

OUTPUT_ENV = "SHUFFLESOD_OUTPUT"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2

log = logging.getLogger("shufflesod")


def output_path(path):
    p = Path(path)
    root = os.environ.get(OUTPUT_ENV)
    return p if p.is_absolute() or not root else Path(root) / p


def load_config(args):
    from .config import RunConfig, parse_pairs
    overrides = parse_pairs(args.set or [])
    if args.config:
        cfg = RunConfig.from_file(args.config, overrides)
    else:
        cfg = RunConfig.from_mapping(overrides)
    return cfg.replace(out_dir=str(output_path(cfg.out_dir)))


def cmd_train(args):
    from .train import train
    cfg = load_config(args)

    def progress(epoch, loss, val):
        print(f"epoch {epoch + 1:3d}/{cfg.epochs} loss {loss:.4f} "
              f"val stage1 P1 {val['P1'][0]:.4f} P2 {val['P2'][0]:.4f}", flush=True)
    result = train(cfg, progress)
    print(f"best epoch {result.best_epoch + 1} val MAE {result.best_val_mae:.6f} -> {result.out_dir}")
    return EXIT_OK


def cmd_eval(args):
    from .train import evaluate
    cfg = load_config(args) if (args.config or args.set) else None
    out = output_path(args.out) if args.out else None
    report, stages = evaluate(cfg, args.checkpoint, args.split, out)
    print(report.table())
    for i in range(4):
        print(f"stage {i + 1}: MAE P1 {stages['P1'][i]:.6f}  P2 {stages['P2'][i]:.6f}")
    return EXIT_OK


def cmd_infer(args):
    from .train import infer
    dump = output_path(args.dump_maps) if args.dump_maps else None
    infer(args.checkpoint, args.image, output_path(args.out), dump)
    return EXIT_OK


def cmd_metrics(args):
    from .metrics import evaluate_dataset
    report = evaluate_dataset(args.pred_dir, args.gt_dir)
    report.write(output_path(args.out))
    print(report.table())
    if report.missing:
        print(f"skipped {len(report.missing)} unmatched: {', '.join(report.missing)}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_gradcheck(args):
    from .gradsuite import run_suite
    failed = []

    def report(case, results):
        worst = max(r.max_error for r in results)
        ok = all(r.passed for r in results)
        if not ok:
            failed.append(case.name)
        print(f"{'PASS' if ok else 'FAIL'} {case.name:<18} max_rel_err {worst:.3e} (tol {case.tol:g})", flush=True)
    run_suite(range(args.seeds), args.case, report)
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_demo_shuffle(args):
    """Compare lossless pixel-unshuffle downsampling with bilinear downsampling."""
    from .autodiff.ops import bilinear_matrix
    from .data import generate_sample, write_gray, write_rgb
    from .pixel_shuffle import shuffle, unshuffle
    out = output_path(args.out)
    s = generate_sample(args.seed, args.side)
    r, side = args.factor, args.side
    small = side // r
    write_rgb(out / "input.png", s.image)
    # bilinear: one low-res map, detail is averaged away
    A = bilinear_matrix(small, side)
    bilinear = A @ s.mask[0] @ A.T
    write_gray(out / "bilinear_down.png", np.kron(bilinear, np.ones((r, r))))
    # unshuffle: r*r low-res maps that together keep every pixel
    cells = unshuffle(s.mask[None], r)[0]
    mosaic = cells.reshape(r, r, small, small).transpose(0, 2, 1, 3).reshape(side, side)
    write_gray(out / "unshuffle_mosaic.png", mosaic)
    restored = shuffle(cells[None], r)[0, 0]
    write_gray(out / "shuffle_restored.png", restored)
    exact = np.array_equal(restored, s.mask[0])
    lost = float(np.abs(np.kron(bilinear, np.ones((r, r))) - s.mask[0]).mean())
    print(f"unshuffle/shuffle round trip exact: {exact}; bilinear round trip MAE: {lost:.4f} -> {out}")
    return EXIT_OK if exact else EXIT_NUMERICAL


def build_parser():
    p = argparse.ArgumentParser(prog="shufflesod", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def config_args(sp):
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")

    sp = sub.add_parser("train", help="train a model from scratch")
    config_args(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a checkpoint on a seed split")
    sp.add_argument("checkpoint")
    sp.add_argument("--split", choices=("val", "train"), default="val")
    sp.add_argument("--out", help="report directory (default <out_dir>/eval_<split>)")
    config_args(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("infer", help="saliency map for one image")
    sp.add_argument("checkpoint")
    sp.add_argument("image")
    sp.add_argument("out")
    sp.add_argument("--dump-maps", metavar="DIR", help="also write global-context and per-stage maps")
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("metrics", help="score a directory of predictions against ground truth")
    sp.add_argument("pred_dir")
    sp.add_argument("gt_dir")
    sp.add_argument("--out", default="metrics")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    sp.add_argument("--seeds", type=int, default=20)
    sp.add_argument("--case", action="append", help="restrict to named cases (repeatable)")
    sp.set_defaults(func=cmd_gradcheck)

    sp = sub.add_parser("demo-shuffle", help="pixel-unshuffle versus bilinear downsampling images")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--side", type=int, default=64)
    sp.add_argument("--factor", type=int, default=4)
    sp.add_argument("--out", default="demo_shuffle")
    sp.set_defaults(func=cmd_demo_shuffle)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; keep 2 for numerical failures
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
