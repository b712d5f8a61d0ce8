"""File contracts shared with the audit toolkit: label-mask rasters
(grayscale PNG / binary PGM, pixel value = class code 0-4), the cohort CSV,
and the sampler-plan JSON. Implemented against the documented formats, not
against the toolkit's internals."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image

PLAN_SCHEMA_VERSION = "1"
NUM_CLASSES = 5


class ContractError(Exception):
    pass


def load_mask(path: str | Path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"P5":
        pos = 2
        tokens: list[bytes] = []
        while len(tokens) < 3:
            while data[pos : pos + 1].isspace():
                pos += 1
            if data[pos : pos + 1] == b"#":
                while data[pos] != 0x0A:
                    pos += 1
                continue
            start = pos
            while not data[pos : pos + 1].isspace():
                pos += 1
            tokens.append(data[start:pos])
        pos += 1
        w, h, maxval = (int(t) for t in tokens)
        if maxval != 255:
            raise ContractError(f"{path}: PGM maxval must be 255")
        arr = np.frombuffer(data[pos : pos + w * h], dtype=np.uint8).reshape(h, w)
    else:
        img = Image.open(path)
        if img.mode != "L":
            raise ContractError(f"{path}: mask PNG must be 8-bit grayscale")
        arr = np.asarray(img, dtype=np.uint8)
    if arr.max(initial=0) >= NUM_CLASSES:
        raise ContractError(f"{path}: pixel values exceed class code 4")
    return arr


def write_mask(mask: np.ndarray, path: str | Path) -> None:
    arr = np.ascontiguousarray(mask, dtype=np.uint8)
    if arr.max(initial=0) >= NUM_CLASSES:
        raise ContractError("mask contains invalid class codes")
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_plan(path: str | Path) -> dict:
    plan = json.loads(Path(path).read_text(encoding="utf-8"))
    if plan.get("schema_version") != PLAN_SCHEMA_VERSION:
        raise ContractError(f"{path}: unsupported plan schema_version")
    return plan


def load_ids(meta_path: str | Path) -> list[str]:
    with open(meta_path, newline="", encoding="utf-8") as f:
        return [row["id"] for row in csv.DictReader(f)]


def find_mask(directory: Path, record_id: str) -> Path:
    for ext in (".png", ".pgm"):
        candidate = directory / f"{record_id}{ext}"
        if candidate.exists():
            return candidate
    raise ContractError(f"no mask for id {record_id!r} in {directory}")
