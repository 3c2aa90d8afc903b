"""Populate the training-run cache used by the trend acceptance tests.

Runs the full model, the no-global-branch ablation and the bilinear ablation
for seeds 1, 2, 3 at the desk-scale defaults. Finished runs are skipped.
"""
import os
import sys
import time

from shufflesod.config import RunConfig
from shufflesod.train import train_cached

VARIANTS = {"full": {}, "no_global": {"use_global": False}, "bilinear": {"rescale_mode": "bilinear"}}
SEEDS = (1, 2, 3)


def variant_configs():
    for name, change in VARIANTS.items():
        for seed in SEEDS:
            yield name, seed, RunConfig(seed=seed, **change)


if __name__ == "__main__":
    root = sys.argv[1] if len(sys.argv) > 1 else os.environ.get("SHUFFLESOD_RUN_CACHE", "acceptance_runs")
    order = sorted(variant_configs(), key=lambda t: (t[1], list(VARIANTS).index(t[0])))
    for name, seed, cfg in order:
        t0 = time.time()
        res = train_cached(cfg, root)
        print(f"{name} seed {seed}: best val MAE {res.best_val_mae:.5f} "
              f"loss {res.epoch_losses[0]:.3f} -> {res.epoch_losses[-1]:.3f} ({time.time() - t0:.0f}s) {res.out_dir}",
              flush=True)
