"""Synthetic cohorts with controllable per-group IoU.

Ground-truth masks are four seeded non-overlapping blobs (one per anatomy
class). Predictions are degraded copies steered to a target mean IoU by
removing k foreground pixels per class and adding k false positives on
background, so per class IoU = (n-k)/(n+k); the real metrics module measures
the result and a short bisection corrects any rounding slip.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import CohortTable, write_mask, write_metadata
from .metrics import mask_scores
from .model import (
    BACKGROUND,
    FOREGROUND_CLASSES,
    CohortRecord,
    GroupKey,
    Attribute,
    Race,
    Sex,
    SizeTooSmall,
    Split,
    Unachievable,
)

MAX_STEER_ITERS = 64


@dataclass(frozen=True)
class SynthSpec:
    n_per_group: dict[GroupKey, int]
    target_iou: dict[GroupKey, float]
    image_size: tuple[int, int] = (64, 64)
    iou_tolerance: float = 0.02
    seed: int = 0

    def __post_init__(self):
        for key, n in self.n_per_group.items():
            if n < 1:
                raise ValueError(f"count for {key.value} must be >= 1")
        for key, t in self.target_iou.items():
            if not (0.0 <= t <= 1.0):
                raise ValueError(f"target IoU for {key.value} must be in [0, 1]")


def generate_gt(seed: int, image_size: tuple[int, int] = (64, 64)) -> np.ndarray:
    """Seeded ground truth with all four anatomy classes, one blob per quadrant."""
    w, h = image_size
    if w < 16 or h < 16:
        raise SizeTooSmall(f"image size {w}x{h} is below the 16x16 minimum")
    rng = np.random.default_rng(seed)
    mask = np.zeros((h, w), dtype=np.uint8)
    quads = [
        (0, 0, h // 2, w // 2),
        (0, w // 2, h // 2, w),
        (h // 2, 0, h, w // 2),
        (h // 2, w // 2, h, w),
    ]
    for c, (r0, c0, r1, c1) in zip(FOREGROUND_CLASSES, quads):
        qh, qw = r1 - r0, c1 - c0
        # Blob occupies roughly the middle half of its quadrant, jittered.
        bh = int(rng.integers(qh // 3, max(qh // 3 + 1, 2 * qh // 3)))
        bw = int(rng.integers(qw // 3, max(qw // 3 + 1, 2 * qw // 3)))
        top = r0 + 1 + int(rng.integers(0, max(1, qh - bh - 1)))
        left = c0 + 1 + int(rng.integers(0, max(1, qw - bw - 1)))
        if rng.random() < 0.5:
            mask[top : top + bh, left : left + bw] = c
        else:
            yy, xx = np.mgrid[0:h, 0:w]
            cy, cx = top + bh / 2, left + bw / 2
            ellipse = ((yy - cy) / max(bh / 2, 1)) ** 2 + ((xx - cx) / max(bw / 2, 1)) ** 2 <= 1
            # Keep the ellipse inside the quadrant so blobs never touch.
            region = np.zeros_like(ellipse)
            region[r0:r1, c0:c1] = True
            mask[ellipse & region] = c
        if not (mask == c).any():  # degenerate jitter: fall back to a small square
            mask[r0 + 2 : r0 + 6, c0 + 2 : c0 + 6] = c
    return mask


def _damaged(gt: np.ndarray, removals: dict[int, np.ndarray], additions: dict[int, np.ndarray], k: dict[int, int]) -> np.ndarray:
    pred = gt.copy()
    flat = pred.ravel()
    for c in FOREGROUND_CLASSES:
        kc = k[c]
        flat[removals[c][:kc]] = BACKGROUND
        flat[additions[c][:kc]] = c
    return pred


def degrade_mask(gt: np.ndarray, target_iou: float, tol: float = 0.02, seed: int = 0) -> np.ndarray:
    """Prediction mask whose measured mean IoU is within tol of target_iou."""
    if not (0.0 <= target_iou <= 1.0):
        raise ValueError(f"target IoU must be in [0, 1], got {target_iou}")
    if target_iou == 1.0:
        return gt.copy()
    if target_iou == 0.0:
        # Cyclic relabeling makes every per-class intersection empty.
        pred = gt.copy()
        fg = pred > 0
        pred[fg] = (pred[fg] % len(FOREGROUND_CLASSES)) + 1
        return pred

    rng = np.random.default_rng(seed)
    flat_gt = gt.ravel()
    bg_pool = np.flatnonzero(flat_gt == BACKGROUND)
    bg_order = bg_pool[rng.permutation(len(bg_pool))]
    removals: dict[int, np.ndarray] = {}
    additions: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    offset = 0
    for c in FOREGROUND_CLASSES:
        own = np.flatnonzero(flat_gt == c)
        counts[c] = len(own)
        removals[c] = own[rng.permutation(len(own))]
        additions[c] = bg_order[offset : offset + len(own)]
        offset += len(own)
        if len(additions[c]) < len(own):
            raise Unachievable(target_iou, tol)

    def damage_for(scale: float) -> dict[int, int]:
        # Per class: IoU = (n-k)/(n+k)  =>  k = n(1-t)/(1+t), scaled for search.
        out = {}
        for c in FOREGROUND_CLASSES:
            n = counts[c]
            k = round(scale * n * (1 - target_iou) / (1 + target_iou))
            out[c] = min(max(k, 0), n)
        return out

    lo, hi = 0.0, 2.0
    scale = 1.0
    best = None
    for _ in range(MAX_STEER_ITERS):
        pred = _damaged(gt, removals, additions, damage_for(scale))
        measured = mask_scores(gt, pred).mean_iou
        if abs(measured - target_iou) <= tol:
            return pred
        if best is None or abs(measured - target_iou) < best[0]:
            best = (abs(measured - target_iou), pred)
        if measured > target_iou:
            lo = scale
        else:
            hi = scale
        scale = (lo + hi) / 2
    raise Unachievable(target_iou, tol)


def _complement(key: GroupKey, index: int) -> tuple[Sex, Race]:
    """Fill the attribute the group key does not pin, alternating per image."""
    if key.attribute is Attribute.Sex:
        sex = Sex(key.value)
        race = list(Race)[index % 2]
    elif key.attribute is Attribute.Race:
        race = Race(key.value)
        sex = list(Sex)[index % 2]
    else:
        sex_v, race_v = key.value.split("|")
        sex, race = Sex(sex_v), Race(race_v)
    return sex, race


def generate_cohort(spec: SynthSpec, out_dir: str | Path, mask_format: str = "png") -> CohortTable:
    """Write gt/, pred/ mask files and metadata.csv realizing the spec."""
    out_dir = Path(out_dir)
    gt_dir = out_dir / "gt"
    pred_dir = out_dir / "pred"
    gt_dir.mkdir(parents=True, exist_ok=True)
    pred_dir.mkdir(parents=True, exist_ok=True)
    ext = "." + mask_format

    records = []
    counter = 0
    for key, n in spec.n_per_group.items():
        target = spec.target_iou[key]
        safe_label = key.value.replace("|", "-")
        for i in range(n):
            rid = f"{safe_label}_{i:04d}"
            gt = generate_gt(spec.seed + counter, spec.image_size)
            pred = degrade_mask(gt, target, spec.iou_tolerance, seed=spec.seed + counter + 1)
            write_mask(gt, gt_dir / f"{rid}{ext}")
            write_mask(pred, pred_dir / f"{rid}{ext}")
            sex, race = _complement(key, i)
            records.append(CohortRecord(id=rid, sex=sex, race=race, split=Split.Train))
            counter += 2
    table = CohortTable(records=tuple(records), source_path=str(out_dir / "metadata.csv"))
    write_metadata(table, out_dir / "metadata.csv")
    return table
