"""Compare the numba and pure-numpy confusion-count kernels.

Run: python benchmarks/bench_kernels.py [--size 512] [--pairs 200]
"""

import argparse
import time

import numpy as np

from segfair.kernels import _confusion_numpy


def bench(fn, pairs, repeats=3):
    fn(*pairs[0])  # warm up (triggers JIT for the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for gt, pred in pairs:
            fn(gt, pred)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--pairs", type=int, default=200)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    pairs = [
        (
            rng.integers(0, 5, size=(args.size, args.size)).astype(np.uint8),
            rng.integers(0, 5, size=(args.size, args.size)).astype(np.uint8),
        )
        for _ in range(args.pairs)
    ]

    t_np = bench(lambda g, p: _confusion_numpy(g, p), pairs)
    print(f"numpy bincount: {t_np:.3f}s for {args.pairs} pairs of {args.size}x{args.size}")

    try:
        from numba import njit
    except ImportError:
        print("numba not installed; skipping JIT benchmark")
        return

    flat_pairs = [(g.ravel(), p.ravel()) for g, p in pairs]

    @njit(cache=True)
    def conf_njit(gt, pred):
        conf = np.zeros((5, 5), dtype=np.int64)
        for i in range(gt.size):
            conf[gt[i], pred[i]] += 1
        return conf

    t_nb = bench(conf_njit, flat_pairs)
    print(f"numba njit:     {t_nb:.3f}s  (x{t_np / t_nb:.1f} vs numpy)")

    ref = _confusion_numpy(*pairs[0])
    assert np.array_equal(ref, conf_njit(*flat_pairs[0])), "backends disagree"
    print("backends agree on counts")


if __name__ == "__main__":
    main()
