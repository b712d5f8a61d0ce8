"""Segmentation quality metrics: per-class IoU/Dice, per-image means, pass rate,
and pairwise inter-annotator agreement.

All scores are computed from exact integer pixel counts with a single floating
division at the end, so results are independent of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .kernels import pair_counts
from .model import (
    FOREGROUND_CLASSES,
    AuditConfig,
    ClassExclusion,
    DimensionMismatch,
    EmptyInput,
    InsufficientAnnotators,
    NoForeground,
    validate_mask,
)


@dataclass(frozen=True)
class ClassScores:
    """Per-class and mean IoU/Dice for one mask pair.

    per_class maps foreground class code -> (iou, dice); entries are None when
    the class has zero pixels in both masks (Absent).
    """

    per_class: dict[int, tuple[float, float] | None]
    mean_iou: float
    mean_dice: float


def _check_dims(gt: np.ndarray, pred: np.ndarray) -> None:
    if gt.shape != pred.shape:
        raise DimensionMismatch(f"gt shape {gt.shape} != pred shape {pred.shape}")


def class_iou(gt: np.ndarray, pred: np.ndarray, c: int) -> float | None:
    """IoU of class c between two masks; None when c is absent in both."""
    _check_dims(gt, pred)
    inter, gt_sz, pred_sz = pair_counts(gt, pred)
    union = gt_sz[c] + pred_sz[c] - inter[c]
    if union == 0:
        return None
    return float(inter[c]) / float(union)


def class_dice(gt: np.ndarray, pred: np.ndarray, c: int) -> float | None:
    """Dice of class c between two masks; None when c is absent in both."""
    _check_dims(gt, pred)
    inter, gt_sz, pred_sz = pair_counts(gt, pred)
    denom = gt_sz[c] + pred_sz[c]
    if denom == 0:
        return None
    return 2.0 * float(inter[c]) / float(denom)


def mask_scores(gt: np.ndarray, pred: np.ndarray, cfg: AuditConfig | None = None) -> ClassScores:
    """Per-class IoU/Dice over the four anatomy classes plus their means.

    Classes absent in both masks are Absent (None) and excluded from the mean
    under ExcludeAbsentInBoth, or counted as a perfect 1.0 under CountAbsentAsOne.
    Raises NoForeground when every foreground class is absent in both masks.
    """
    cfg = cfg or AuditConfig()
    _check_dims(gt, pred)
    inter, gt_sz, pred_sz = pair_counts(gt, pred)

    per_class: dict[int, tuple[float, float] | None] = {}
    ious, dices = [], []
    n_absent = 0
    for c in FOREGROUND_CLASSES:
        union = gt_sz[c] + pred_sz[c] - inter[c]
        if union == 0:
            n_absent += 1
            if cfg.class_exclusion is ClassExclusion.CountAbsentAsOne:
                per_class[c] = (1.0, 1.0)
                ious.append(1.0)
                dices.append(1.0)
            else:
                per_class[c] = None
            continue
        iou = float(inter[c]) / float(union)
        dice = 2.0 * float(inter[c]) / float(gt_sz[c] + pred_sz[c])
        per_class[c] = (iou, dice)
        ious.append(iou)
        dices.append(dice)

    if n_absent == len(FOREGROUND_CLASSES):
        raise NoForeground("gt and pred contain only background")
    return ClassScores(
        per_class=per_class,
        mean_iou=float(np.mean(ious)),
        mean_dice=float(np.mean(dices)),
    )


def pass_rate_at_iou(scores: list[ClassScores], tau: float) -> float:
    """Fraction of images with mean_iou >= tau (inclusive at the boundary)."""
    if not scores:
        raise EmptyInput("pass_rate_at_iou needs at least one image")
    if not (0.0 < tau <= 1.0):
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    passed = sum(1 for s in scores if s.mean_iou >= tau)
    return passed / len(scores)


def pairwise_agreement(
    annotations: list[tuple[str, str, np.ndarray]],
) -> tuple[float, float]:
    """Mean pairwise IoU and Dice over all annotator pairs and shared images.

    annotations: (annotator_id, image_id, mask) triples. For every unordered
    annotator pair and every image both annotated, the per-image mean IoU/Dice
    is one cell; the returned values are grand means over all cells.
    """
    by_image: dict[str, dict[str, np.ndarray]] = {}
    for annotator, image, mask in annotations:
        validate_mask(mask)
        by_image.setdefault(image, {})[annotator] = mask

    iou_cells, dice_cells = [], []
    for image in sorted(by_image):
        masks = by_image[image]
        for a, b in combinations(sorted(masks), 2):
            scores = mask_scores(masks[a], masks[b])
            iou_cells.append(scores.mean_iou)
            dice_cells.append(scores.mean_dice)
    if not iou_cells:
        raise InsufficientAnnotators("need at least two annotators sharing one image")
    return float(np.mean(iou_cells)), float(np.mean(dice_cells))
