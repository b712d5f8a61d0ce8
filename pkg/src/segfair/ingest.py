"""On-disk formats: grayscale PNG / binary PGM label rasters and the cohort CSV.

Mask files store the class code directly as the 8-bit pixel value. The CSV is
`id,sex,race[,split]` with the short codes M/F, WC/BAA, train/val/test.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .model import (
    BadEnumValue,
    CohortRecord,
    DimensionMismatch,
    DuplicateId,
    MissingColumn,
    MissingMask,
    Race,
    Sex,
    Split,
    UnsupportedFormat,
    validate_mask,
)

SEX_CODES = {"M": Sex.Male, "F": Sex.Female}
RACE_CODES = {"WC": Race.WhiteOrCaucasian, "BAA": Race.BlackOrAfricanAmerican}
SPLIT_CODES = {"train": Split.Train, "val": Split.Val, "test": Split.Test}
SEX_TO_CODE = {v: k for k, v in SEX_CODES.items()}
RACE_TO_CODE = {v: k for k, v in RACE_CODES.items()}
SPLIT_TO_CODE = {v: k for k, v in SPLIT_CODES.items()}


@dataclass(frozen=True)
class CohortTable:
    records: tuple[CohortRecord, ...]
    source_path: str


@dataclass(frozen=True)
class MaskPair:
    id: str
    gt: np.ndarray
    pred: np.ndarray


def _load_pgm(data: bytes, path: str) -> np.ndarray:
    # P5 header: magic, width, height, maxval, then raw bytes. Comments allowed.
    tokens = []
    pos = 2  # after "P5"
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise UnsupportedFormat(f"{path}: malformed PGM header")
    if maxval != 255:
        raise UnsupportedFormat(f"{path}: PGM maxval must be 255, got {maxval}")
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise DimensionMismatch(f"{path}: PGM raster has {len(raster)} bytes, expected {width * height}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def load_mask(path: str | Path) -> np.ndarray:
    """Decode an 8-bit grayscale PNG or binary PGM into a validated label mask."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"P5":
        arr = _load_pgm(data, str(path))
    elif data[:8] == b"\x89PNG\r\n\x1a\n":
        img = Image.open(io.BytesIO(data))
        if img.mode != "L":
            raise UnsupportedFormat(
                f"{path}: PNG mode {img.mode!r} not supported (need 8-bit grayscale)"
            )
        arr = np.asarray(img, dtype=np.uint8)
    else:
        raise UnsupportedFormat(f"{path}: not a PNG or PGM file")
    return validate_mask(arr)


def write_mask(mask: np.ndarray, path: str | Path) -> None:
    """Write a label mask as grayscale PNG or binary PGM, chosen by extension."""
    path = Path(path)
    arr = np.ascontiguousarray(validate_mask(mask), dtype=np.uint8)
    if path.suffix.lower() == ".pgm":
        h, w = arr.shape
        path.write_bytes(b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes())
    elif path.suffix.lower() == ".png":
        Image.fromarray(arr, mode="L").save(path, format="PNG")
    else:
        raise UnsupportedFormat(f"{path}: unsupported mask extension")


def load_metadata(path: str | Path) -> CohortTable:
    """Parse the cohort CSV, preserving row order and rejecting bad enum codes."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        fields = reader.fieldnames or []
        for col in ("id", "sex", "race"):
            if col not in fields:
                raise MissingColumn(f"{path}: missing required column {col!r}")
        has_split = "split" in fields

        records = []
        seen: set[str] = set()
        for row_no, row in enumerate(reader, start=2):
            rid = (row["id"] or "").strip()
            if rid in seen:
                raise DuplicateId(f"{path}: duplicate id {rid!r}")
            seen.add(rid)
            sex_code = (row["sex"] or "").strip()
            if sex_code not in SEX_CODES:
                raise BadEnumValue(row_no, "sex", sex_code)
            race_code = (row["race"] or "").strip()
            if race_code not in RACE_CODES:
                raise BadEnumValue(row_no, "race", race_code)
            split = None
            if has_split:
                split_code = (row["split"] or "").strip()
                if split_code:
                    if split_code not in SPLIT_CODES:
                        raise BadEnumValue(row_no, "split", split_code)
                    split = SPLIT_CODES[split_code]
            records.append(
                CohortRecord(id=rid, sex=SEX_CODES[sex_code], race=RACE_CODES[race_code], split=split)
            )
    return CohortTable(records=tuple(records), source_path=str(path))


def write_metadata(table: CohortTable, path: str | Path) -> None:
    """Write a cohort back out in the load_metadata CSV format."""
    has_split = any(r.split is not None for r in table.records)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["id", "sex", "race"] + (["split"] if has_split else []))
        for r in table.records:
            row = [r.id, SEX_TO_CODE[r.sex], RACE_TO_CODE[r.race]]
            if has_split:
                row.append(SPLIT_TO_CODE[r.split] if r.split else "")
            writer.writerow(row)


def _find_mask(directory: Path, record_id: str) -> Path | None:
    for ext in (".png", ".pgm"):
        candidate = directory / f"{record_id}{ext}"
        if candidate.exists():
            return candidate
    return None


def resolve_pairs(table: CohortTable, gt_dir: str | Path, pred_dir: str | Path) -> list[MaskPair]:
    """Load the gt/pred mask pair for every cohort record, strictly."""
    gt_dir, pred_dir = Path(gt_dir), Path(pred_dir)
    pairs = []
    for record in table.records:
        gt_path = _find_mask(gt_dir, record.id)
        if gt_path is None:
            raise MissingMask(record.id, str(gt_dir))
        pred_path = _find_mask(pred_dir, record.id)
        if pred_path is None:
            raise MissingMask(record.id, str(pred_dir))
        gt = load_mask(gt_path)
        pred = load_mask(pred_path)
        if gt.shape != pred.shape:
            raise DimensionMismatch(
                f"id {record.id}: gt {gt.shape} vs pred {pred.shape}"
            )
        pairs.append(MaskPair(id=record.id, gt=gt, pred=pred))
    return pairs
