"""Pixel-counting kernels.

The only hot loop in the toolkit is the per-pair 5x5 label confusion count.
It is JIT-compiled with numba by default; set SEGFAIR_NO_NUMBA=1 to force the
pure-numpy bincount path (same results, exact integer counts either way).
"""

from __future__ import annotations

import os

import numpy as np

from .model import NUM_CLASSES

_FORCE_NUMPY = os.environ.get("SEGFAIR_NO_NUMBA", "") not in ("", "0")


def _confusion_numpy(gt: np.ndarray, pred: np.ndarray) -> np.ndarray:
    """5x5 confusion counts via one flat bincount. Rows = gt class, cols = pred class."""
    joint = gt.ravel().astype(np.int64) * NUM_CLASSES + pred.ravel()
    return np.bincount(joint, minlength=NUM_CLASSES * NUM_CLASSES).reshape(
        NUM_CLASSES, NUM_CLASSES
    )


if not _FORCE_NUMPY:
    try:
        from numba import njit

        @njit(cache=True)
        def _confusion_njit(gt, pred):  # pragma: no cover - exercised via wrapper
            conf = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
            for i in range(gt.size):
                conf[gt[i], pred[i]] += 1
            return conf

        def confusion_counts(gt: np.ndarray, pred: np.ndarray) -> np.ndarray:
            return _confusion_njit(
                np.ascontiguousarray(gt, dtype=np.uint8).ravel(),
                np.ascontiguousarray(pred, dtype=np.uint8).ravel(),
            )

        BACKEND = "numba"
    except ImportError:
        confusion_counts = _confusion_numpy
        BACKEND = "numpy"
else:
    confusion_counts = _confusion_numpy
    BACKEND = "numpy"


def pair_counts(gt: np.ndarray, pred: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-class (intersection, gt size, pred size) integer counts for one mask pair."""
    conf = confusion_counts(gt, pred)
    inter = np.diag(conf).copy()
    gt_sizes = conf.sum(axis=1)
    pred_sizes = conf.sum(axis=0)
    return inter, gt_sizes, pred_sizes
