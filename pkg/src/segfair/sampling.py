"""Seeded, deterministic sampler plans for the four training configurations,
plus the stratified 70/15/15 split.

All randomness comes from numpy's default_rng (PCG64); the generator identity
and call order are part of the plan contract, so identical inputs and seed
always serialize to identical bytes.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import SPLIT_CODES, SPLIT_TO_CODE, CohortTable
from .model import (
    Attribute,
    BatchTooSmall,
    CohortRecord,
    EmptyInput,
    SchemaMismatch,
    Split,
    StratumTooSmall,
    TooFewGroups,
    attribute_levels,
)

PLAN_SCHEMA_VERSION = "1"
DEFAULT_FRACTIONS = (0.70, 0.15, 0.15)


class Strategy(str, enum.Enum):
    Baseline = "Baseline"
    Balanced = "Balanced"
    StratifiedBatch = "StratifiedBatch"
    GroupSpecific = "GroupSpecific"


@dataclass(frozen=True)
class SplitAssignment:
    assignments: dict[str, Split]
    fractions: tuple[float, float, float]
    seed: int


@dataclass(frozen=True)
class SamplerPlan:
    strategy: Strategy
    seed: int
    batch_size: int
    batches: tuple[tuple[str, ...], ...]
    attribute: Attribute | None = None
    group_label: str | None = None
    schema_version: str = PLAN_SCHEMA_VERSION


def largest_remainder(n: int, fractions: tuple[float, ...]) -> list[int]:
    """Apportion n items to parts by largest remainder; ties go to later parts."""
    quotas = [n * f for f in fractions]
    sizes = [math.floor(q) for q in quotas]
    leftover = n - sum(sizes)
    # Sort by remainder descending, later part first on ties.
    order = sorted(range(len(fractions)), key=lambda i: (-(quotas[i] - sizes[i]), -i))
    for i in order[:leftover]:
        sizes[i] += 1
    return sizes


def _grouped_ids(records: list[CohortRecord], attribute: Attribute) -> dict[str, list[str]]:
    """Observed group levels (canonical order) -> member ids in input order."""
    buckets: dict[str, list[str]] = {}
    for r in records:
        buckets.setdefault(r.group_value(attribute), []).append(r.id)
    return {level: buckets[level] for level in attribute_levels(attribute) if level in buckets}


def stratified_split(
    table: CohortTable,
    seed: int,
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS,
) -> SplitAssignment:
    """Split stratified on the joint sex-by-race cell.

    Global part totals follow largest-remainder rounding of the whole cohort;
    per-stratum allocations are largest-remainder too, then reconciled so that
    column totals match the global targets while each stratum's part size stays
    within one item of its exact quota.
    """
    if not table.records:
        raise EmptyInput("cannot split an empty cohort")
    if not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    strata = _grouped_ids(list(table.records), Attribute.SexByRace)
    all_positive = all(f > 0 for f in fractions)
    if all_positive:
        for label, ids in strata.items():
            if len(ids) < 3:
                raise StratumTooSmall(f"stratum {label!r} has only {len(ids)} records")

    n_total = sum(len(ids) for ids in strata.values())
    targets = largest_remainder(n_total, fractions)
    labels = list(strata)
    n_parts = len(fractions)

    floors = {}
    remainders = {}
    needs = {}
    for label in labels:
        quotas = [len(strata[label]) * f for f in fractions]
        floors[label] = [math.floor(q) for q in quotas]
        remainders[label] = [q - fl for q, fl in zip(quotas, floors[label])]
        needs[label] = len(strata[label]) - sum(floors[label])
    capacity = [targets[p] - sum(floors[label][p] for label in labels) for p in range(n_parts)]

    sizes = {label: list(floors[label]) for label in labels}
    # Greedy over all (stratum, part) cells: remainder descending, later part
    # first on ties, stratum order last; each cell takes at most one extra.
    cells = sorted(
        ((label, p) for label in labels for p in range(n_parts)),
        key=lambda lp: (-remainders[lp[0]][lp[1]], -lp[1], labels.index(lp[0])),
    )
    for label, p in cells:
        if needs[label] > 0 and capacity[p] > 0:
            sizes[label][p] += 1
            needs[label] -= 1
            capacity[p] -= 1
    if any(needs.values()):  # pragma: no cover - totals always reconcile
        raise RuntimeError("split reconciliation failed")

    rng = np.random.default_rng(seed)
    assignments: dict[str, Split] = {}
    parts = (Split.Train, Split.Val, Split.Test)
    for label in labels:
        ids = strata[label]
        perm = [ids[i] for i in rng.permutation(len(ids))]
        pos = 0
        for part, size in zip(parts, sizes[label]):
            for rid in perm[pos : pos + size]:
                assignments[rid] = part
            pos += size
    return SplitAssignment(assignments=assignments, fractions=tuple(fractions), seed=seed)


def write_split(split: SplitAssignment, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["id", "split"])
        for rid, part in split.assignments.items():
            writer.writerow([rid, SPLIT_TO_CODE[part]])


def read_split(path: str | Path) -> dict[str, Split]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        return {row["id"]: SPLIT_CODES[row["split"]] for row in reader}


def _chunk(ids: list[str], batch_size: int) -> tuple[tuple[str, ...], ...]:
    return tuple(
        tuple(ids[i : i + batch_size]) for i in range(0, len(ids), batch_size)
    )


def baseline_plan(train_ids: list[str], seed: int, batch_size: int) -> SamplerPlan:
    """One seeded shuffle of the full training set, chunked into batches."""
    if not train_ids:
        raise EmptyInput("baseline plan needs at least one training id")
    rng = np.random.default_rng(seed)
    shuffled = [train_ids[i] for i in rng.permutation(len(train_ids))]
    return SamplerPlan(
        strategy=Strategy.Baseline,
        seed=seed,
        batch_size=batch_size,
        batches=_chunk(shuffled, batch_size),
    )


def oversample_plan(
    train_records: list[CohortRecord], attribute: Attribute, seed: int, batch_size: int
) -> SamplerPlan:
    """Pad every minority group to the majority size by sampling with
    replacement, then shuffle the padded pool and chunk it."""
    if not train_records:
        raise EmptyInput("oversample plan needs training records")
    groups = _grouped_ids(train_records, attribute)
    if len(groups) < 2:
        raise TooFewGroups("oversampling needs at least two group levels")
    max_size = max(len(ids) for ids in groups.values())
    rng = np.random.default_rng(seed)
    pool: list[str] = []
    for ids in groups.values():
        pool.extend(ids)
        deficit = max_size - len(ids)
        if deficit:
            picks = rng.integers(0, len(ids), size=deficit)
            pool.extend(ids[i] for i in picks)
    shuffled = [pool[i] for i in rng.permutation(len(pool))]
    return SamplerPlan(
        strategy=Strategy.Balanced,
        seed=seed,
        batch_size=batch_size,
        batches=_chunk(shuffled, batch_size),
        attribute=attribute,
    )


def stratified_batch_plan(
    train_records: list[CohortRecord], attribute: Attribute, seed: int, batch_size: int
) -> SamplerPlan:
    """Every batch carries near-equal per-group quotas (spread <= 1, the spare
    slots rotating across batches). Smaller groups recycle through fresh
    shuffles until the largest group is consumed exactly once."""
    if not train_records:
        raise EmptyInput("stratified batch plan needs training records")
    groups = _grouped_ids(train_records, attribute)
    n_groups = len(groups)
    if batch_size < n_groups:
        raise BatchTooSmall(
            f"batch size {batch_size} is smaller than the {n_groups} group levels"
        )
    max_size = max(len(ids) for ids in groups.values())
    rng = np.random.default_rng(seed)

    streams: list[list[str]] = []
    for ids in groups.values():
        stream: list[str] = []
        while len(stream) < max_size:
            stream.extend(ids[i] for i in rng.permutation(len(ids)))
        streams.append(stream[:max_size])

    n_batches = math.ceil(n_groups * max_size / batch_size)
    base, spare = divmod(batch_size, n_groups)
    positions = [0] * n_groups
    batches = []
    for b in range(n_batches):
        extras = {(b * spare + j) % n_groups for j in range(spare)}
        batch: list[str] = []
        for g in range(n_groups):
            quota = base + (1 if g in extras else 0)
            take = min(quota, max_size - positions[g])
            batch.extend(streams[g][positions[g] : positions[g] + take])
            positions[g] += take
        batches.append(tuple(batch))
    if any(p != max_size for p in positions):  # pragma: no cover - quota math covers all
        raise RuntimeError("stratified batching left items unconsumed")
    return SamplerPlan(
        strategy=Strategy.StratifiedBatch,
        seed=seed,
        batch_size=batch_size,
        batches=tuple(batches),
        attribute=attribute,
    )


def group_partition(
    train_records: list[CohortRecord], attribute: Attribute, seed: int, batch_size: int
) -> list[tuple[str, SamplerPlan]]:
    """One baseline-style plan per observed group level, covering exactly that
    group's ids."""
    if not train_records:
        raise EmptyInput("group partition needs training records")
    groups = _grouped_ids(train_records, attribute)
    out = []
    for label, ids in groups.items():
        base = baseline_plan(ids, seed, batch_size)
        out.append(
            (
                label,
                SamplerPlan(
                    strategy=Strategy.GroupSpecific,
                    seed=seed,
                    batch_size=batch_size,
                    batches=base.batches,
                    attribute=attribute,
                    group_label=label,
                ),
            )
        )
    return out


def plan_to_dict(plan: SamplerPlan) -> dict:
    return {
        "schema_version": plan.schema_version,
        "strategy": plan.strategy.value,
        "seed": plan.seed,
        "attribute": plan.attribute.value if plan.attribute else None,
        "batch_size": plan.batch_size,
        "group_label": plan.group_label,
        "batches": [list(b) for b in plan.batches],
    }


def plan_from_dict(d: dict) -> SamplerPlan:
    version = d.get("schema_version")
    if version != PLAN_SCHEMA_VERSION:
        raise SchemaMismatch(f"plan schema_version {version!r} is not supported")
    return SamplerPlan(
        strategy=Strategy(d["strategy"]),
        seed=int(d["seed"]),
        batch_size=int(d["batch_size"]),
        batches=tuple(tuple(b) for b in d["batches"]),
        attribute=Attribute(d["attribute"]) if d.get("attribute") else None,
        group_label=d.get("group_label"),
    )


def write_plan(plan: SamplerPlan, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(plan_to_dict(plan), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def read_plan(path: str | Path) -> SamplerPlan:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaMismatch(f"{path}: not a valid plan file: {e}") from e
    return plan_from_dict(d)
