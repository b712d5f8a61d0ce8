"""Shared domain model: label schema, mask validation, cohort records, audit config."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

# Fixed label encoding: background is always 0, the four anatomy classes follow.
CLASS_NAMES = ("background", "femur", "tibia", "fibula", "patella")
BACKGROUND = 0
FOREGROUND_CLASSES = (1, 2, 3, 4)
NUM_CLASSES = 5

CODE_TO_NAME = {code: name for code, name in enumerate(CLASS_NAMES)}
NAME_TO_CODE = {name: code for code, name in enumerate(CLASS_NAMES)}


class SegfairError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidLabel(SegfairError):
    def __init__(self, code: int, pixel_index: int):
        super().__init__(f"invalid label code {code} at pixel index {pixel_index}")
        self.code = code
        self.pixel_index = pixel_index


class DimensionMismatch(SegfairError):
    pass


class UnsupportedFormat(SegfairError):
    pass


class MissingColumn(SegfairError):
    pass


class BadEnumValue(SegfairError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}: bad value {value!r} for column {column!r}")
        self.row = row
        self.column = column
        self.value = value


class DuplicateId(SegfairError):
    pass


class MissingMask(SegfairError):
    def __init__(self, record_id: str, which_dir: str):
        super().__init__(f"no mask file for id {record_id!r} in {which_dir}")
        self.record_id = record_id
        self.which_dir = which_dir


class NoForeground(SegfairError):
    pass


class EmptyInput(SegfairError):
    pass


class TooFewGroups(SegfairError):
    pass


class InsufficientAnnotators(SegfairError):
    pass


class StratumTooSmall(SegfairError):
    pass


class BatchTooSmall(SegfairError):
    pass


class SchemaMismatch(SegfairError):
    pass


class SizeTooSmall(SegfairError):
    pass


class Unachievable(SegfairError):
    def __init__(self, target: float, tol: float):
        super().__init__(f"could not reach target IoU {target} within ±{tol}")
        self.target = target
        self.tol = tol


class Sex(str, enum.Enum):
    Male = "Male"
    Female = "Female"


class Race(str, enum.Enum):
    WhiteOrCaucasian = "WhiteOrCaucasian"
    BlackOrAfricanAmerican = "BlackOrAfricanAmerican"


class Split(str, enum.Enum):
    Train = "Train"
    Val = "Val"
    Test = "Test"


class Attribute(str, enum.Enum):
    Sex = "Sex"
    Race = "Race"
    SexByRace = "SexByRace"


class SdMode(str, enum.Enum):
    Sample = "Sample"
    Population = "Population"


class ClassExclusion(str, enum.Enum):
    ExcludeAbsentInBoth = "ExcludeAbsentInBoth"
    CountAbsentAsOne = "CountAbsentAsOne"


# Canonical ordering of group levels, used everywhere groups are listed.
SEX_LEVELS = (Sex.Male, Sex.Female)
RACE_LEVELS = (Race.WhiteOrCaucasian, Race.BlackOrAfricanAmerican)


def attribute_levels(attribute: Attribute) -> tuple[str, ...]:
    """Canonical level order for a grouping attribute."""
    if attribute is Attribute.Sex:
        return tuple(s.value for s in SEX_LEVELS)
    if attribute is Attribute.Race:
        return tuple(r.value for r in RACE_LEVELS)
    return tuple(f"{s.value}|{r.value}" for s in SEX_LEVELS for r in RACE_LEVELS)


@dataclass(frozen=True)
class CohortRecord:
    id: str
    sex: Sex
    race: Race
    split: Split | None = None

    def __post_init__(self):
        if not self.id or not all(c.isalnum() or c in "_-" for c in self.id):
            raise SegfairError(f"record id {self.id!r} is not a valid filename stem")

    def group_value(self, attribute: Attribute) -> str:
        if attribute is Attribute.Sex:
            return self.sex.value
        if attribute is Attribute.Race:
            return self.race.value
        return f"{self.sex.value}|{self.race.value}"


@dataclass(frozen=True)
class GroupKey:
    attribute: Attribute
    value: str

    def __post_init__(self):
        if self.value not in attribute_levels(self.attribute):
            raise SegfairError(
                f"{self.value!r} is not a level of attribute {self.attribute.value}"
            )


@dataclass(frozen=True)
class AuditConfig:
    iou_pass_threshold: float = 0.5
    grouping: Attribute = Attribute.Sex
    sd_mode: SdMode = SdMode.Sample
    class_exclusion: ClassExclusion = ClassExclusion.ExcludeAbsentInBoth

    def __post_init__(self):
        if not (0.0 < self.iou_pass_threshold <= 1.0):
            raise SegfairError(
                f"iou_pass_threshold must be in (0, 1], got {self.iou_pass_threshold}"
            )


def validate_mask(mask: np.ndarray) -> np.ndarray:
    """Check a label raster: 2D, nonempty, every code in 0..4. Returns it unchanged."""
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"mask must be a nonempty 2D array, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise InvalidLabel(-1, -1)
    bad = (arr < 0) | (arr > NUM_CLASSES - 1)
    if bad.any():
        idx = int(np.flatnonzero(bad.ravel())[0])
        raise InvalidLabel(int(arr.ravel()[idx]), idx)
    return arr


def classes_present(mask: np.ndarray) -> set[int]:
    """Set of label codes occurring in the mask."""
    return set(int(c) for c in np.unique(mask))
