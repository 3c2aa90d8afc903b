"""Time the compiled kernels against the numpy fallback on training-sized inputs.

Usage: ``python benchmarks/bench_kernels.py [repeats]``. Prints one line per
kernel with the median time of each backend and the speedup.
"""
import sys
import timeit

import numpy as np

from shufflesod import _kernels_py

try:
    from shufflesod import _kernels as compiled
except ImportError:
    sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation` first")


def cases():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(8, 32, 64, 64))
    packed = np.ascontiguousarray(_kernels_py.unshuffle(x, 4))
    xp = rng.normal(size=(8, 16, 66, 66))
    Ho = 64
    cols = np.ascontiguousarray(_kernels_py.im2col(xp, 3, 3, 1, Ho, Ho))
    q = rng.integers(0, 256, size=224 * 224, dtype=np.uint8)
    fg = (rng.random(224 * 224) > 0.7).astype(np.uint8)
    return {
        "unshuffle r=4 [8,32,64,64]": lambda k: k.unshuffle(x, 4),
        "shuffle r=4 [8,512,16,16]": lambda k: k.shuffle(packed, 4),
        "im2col 3x3 [8,16,66,66]": lambda k: k.im2col(xp, 3, 3, 1, Ho, Ho),
        "col2im 3x3 [8,16,66,66]": lambda k: k.col2im(cols, 16, 66, 66, 3, 3, 1, Ho, Ho),
        "level_counts 224x224": lambda k: k.level_counts(q, fg),
    }


def main(repeats=7):
    print(f"{'kernel':<30}{'numpy ms':>10}{'cython ms':>11}{'speedup':>9}")
    for name, fn in cases().items():
        times = []
        for impl in (_kernels_py, compiled):
            runs = timeit.repeat(lambda: fn(impl), number=1, repeat=repeats)
            times.append(1e3 * float(np.median(runs)))
        print(f"{name:<30}{times[0]:>10.3f}{times[1]:>11.3f}{times[0] / times[1]:>8.2f}x")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 7)
