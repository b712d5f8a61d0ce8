"""Toy segmentation trainer.

A small convolutional encoder-decoder with skip connections learns the
4-class anatomy segmentation. It exists to validate the plan/mask contracts
end to end, not to reach clinical accuracy: batches are consumed exactly in
plan-file order (the plan defines one epoch and the consumption is written
to an instrumentation log), and predictions are emitted as audit-ready
grayscale label masks.

Inputs: `<data_dir>/images/<id>.png` if present; otherwise a synthetic
radiograph is derived from the ground-truth mask (per-class intensity bands
plus seeded Gaussian noise), which keeps the demo self-contained. The loss
is per-pixel binary cross-entropy over the four foreground-class probability
maps; at prediction time each map is binarized at 0.5 and overlaps resolve
by argmax.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .io import ContractError, find_mask, load_mask, load_plan, write_mask

N_FG = 4
BINARIZE_THRESHOLD = 0.5


@dataclass
class TrainerConfig:
    plan_path: str
    data_dir: str
    out_dir: str
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 0.0004
    binarize_threshold: float = BINARIZE_THRESHOLD
    seed: int = 0


class PlanMismatch(Exception):
    pass


class SmallUNet(nn.Module):
    """Two-level encoder-decoder with skip connections; 1 input channel,
    one logit map per foreground class."""

    def __init__(self, width: int = 16):
        super().__init__()

        def block(cin, cout):
            return nn.Sequential(
                nn.Conv2d(cin, cout, 3, padding=1),
                nn.ReLU(inplace=True),
                nn.Conv2d(cout, cout, 3, padding=1),
                nn.ReLU(inplace=True),
            )

        self.enc1 = block(1, width)
        self.enc2 = block(width, width * 2)
        self.bottom = block(width * 2, width * 4)
        self.pool = nn.MaxPool2d(2)
        self.up2 = nn.ConvTranspose2d(width * 4, width * 2, 2, stride=2)
        self.dec2 = block(width * 4, width * 2)
        self.up1 = nn.ConvTranspose2d(width * 2, width, 2, stride=2)
        self.dec1 = block(width * 2, width)
        self.head = nn.Conv2d(width, N_FG, 1)

    def forward(self, x):
        e1 = self.enc1(x)
        e2 = self.enc2(self.pool(e1))
        b = self.bottom(self.pool(e2))
        d2 = self.dec2(torch.cat([self.up2(b), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up1(d2), e1], dim=1))
        return self.head(d1)


def derive_image(gt: np.ndarray, record_id: str) -> np.ndarray:
    """Synthetic radiograph: intensity band per class + seeded noise."""
    seed = int.from_bytes(hashlib.sha256(record_id.encode()).digest()[:4], "big")
    rng = np.random.default_rng(seed)
    img = gt.astype(np.float32) * 45.0 + 30.0
    img += rng.normal(0.0, 8.0, size=img.shape)
    return np.clip(img, 0, 255) / 255.0


def load_input(data_dir: Path, record_id: str, gt: np.ndarray) -> np.ndarray:
    images = data_dir / "images"
    if images.is_dir():
        try:
            return load_mask(find_mask(images, record_id)).astype(np.float32) / 255.0
        except ContractError:
            pass
    return derive_image(gt, record_id)


def _mean_fg_iou(pred: np.ndarray, gt: np.ndarray) -> float | None:
    """Per-image mean foreground IoU, skipping classes absent in both."""
    ious = []
    for c in range(1, N_FG + 1):
        p, g = pred == c, gt == c
        union = np.logical_or(p, g).sum()
        if union == 0:
            continue
        ious.append(np.logical_and(p, g).sum() / union)
    return float(np.mean(ious)) if ious else None


def _to_labels(logits: torch.Tensor, threshold: float) -> np.ndarray:
    """Per-class sigmoid maps binarized at threshold; overlaps resolve by
    argmax, pixels below threshold everywhere stay background."""
    probs = torch.sigmoid(logits).numpy()
    labels = np.where(probs.max(axis=0) >= threshold, probs.argmax(axis=0) + 1, 0)
    return labels.astype(np.uint8)


def train(config: TrainerConfig) -> Path:
    """Train on the plan's batches; returns the checkpoint path."""
    plan = load_plan(config.plan_path)
    if plan["batch_size"] != config.batch_size:
        raise PlanMismatch(
            f"plan batch_size {plan['batch_size']} != config batch_size {config.batch_size}"
        )
    data_dir = Path(config.data_dir)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    gt_dir = data_dir / "gt"
    ids = sorted({i for batch in plan["batches"] for i in batch})
    gts = {i: load_mask(find_mask(gt_dir, i)) for i in ids}
    inputs = {i: load_input(data_dir, i, gts[i]) for i in ids}

    torch.manual_seed(config.seed)
    model = SmallUNet()
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    # Foreground pixels are ~5% per class map; upweight positives so the
    # model does not sink into the all-background local optimum.
    loss_fn = nn.BCEWithLogitsLoss(pos_weight=torch.tensor(10.0))

    log_path = out_dir / "batch_log.jsonl"
    best_iou = -1.0
    best_state = None
    with open(log_path, "w", encoding="utf-8") as log:
        for epoch in range(config.epochs):
            model.train()
            for batch_index, batch_ids in enumerate(plan["batches"]):
                log.write(
                    json.dumps({"epoch": epoch, "batch": batch_index, "ids": list(batch_ids)})
                    + "\n"
                )
                x = torch.from_numpy(
                    np.stack([inputs[i] for i in batch_ids])[:, None, :, :]
                ).float()
                target = np.stack(
                    [
                        [(gts[i] == c).astype(np.float32) for c in range(1, N_FG + 1)]
                        for i in batch_ids
                    ]
                )
                y = torch.from_numpy(target)
                optimizer.zero_grad()
                loss = loss_fn(model(x), y)
                loss.backward()
                optimizer.step()

            model.eval()
            with torch.no_grad():
                ious = []
                for start in range(0, len(ids), config.batch_size):
                    chunk = ids[start : start + config.batch_size]
                    x = torch.from_numpy(
                        np.stack([inputs[i] for i in chunk])[:, None, :, :]
                    ).float()
                    out = model(x)
                    for j, i in enumerate(chunk):
                        labels = _to_labels(out[j], config.binarize_threshold)
                        iou = _mean_fg_iou(labels, gts[i])
                        if iou is not None:
                            ious.append(iou)
                mean_iou = float(np.mean(ious)) if ious else 0.0
            if mean_iou > best_iou:
                best_iou = mean_iou
                best_state = {k: v.clone() for k, v in model.state_dict().items()}
            print(f"epoch {epoch + 1}/{config.epochs}: train mean IoU {mean_iou:.3f}")

    checkpoint = out_dir / "model.pt"
    torch.save(
        {
            "state_dict": best_state,
            "binarize_threshold": config.binarize_threshold,
            "final_train_iou": best_iou,
        },
        checkpoint,
    )
    return checkpoint


def predict(checkpoint: str | Path, ids: list[str], data_dir: str | Path, out_dir: str | Path) -> None:
    """Write `<id>.png` label masks for every id, consumable by the audit."""
    data_dir, out_dir = Path(data_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    state = torch.load(checkpoint, weights_only=True)
    model = SmallUNet()
    model.load_state_dict(state["state_dict"])
    model.eval()
    threshold = state.get("binarize_threshold", BINARIZE_THRESHOLD)
    gt_dir = data_dir / "gt"
    with torch.no_grad():
        for record_id in ids:
            gt = load_mask(find_mask(gt_dir, record_id))
            x = torch.from_numpy(load_input(data_dir, record_id, gt)[None, None, :, :]).float()
            labels = _to_labels(model(x)[0], threshold)
            write_mask(labels, out_dir / f"{record_id}.png")
