"""Acceptance suite: one test per exit criterion, each printing a PASS line
with its measured values when the assertions hold."""

import json
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from segfair.cli import main
from segfair.fairness import GroupMetrics, group_sd, skewed_error_ratio
from segfair.ingest import CohortTable
from segfair.metrics import class_dice, class_iou
from segfair.model import Attribute, CohortRecord, GroupKey, Race, SdMode, Sex, Split
from segfair.sampling import (
    baseline_plan,
    group_partition,
    oversample_plan,
    stratified_batch_plan,
    stratified_split,
    write_plan,
)
from conftest import table_i_cohort

# (grouping, model, group mean 1, group mean 2, published SD, published SER)
PUBLISHED_ROWS = [
    ("race", "Baseline", 0.833, 0.834, 0.001, 1.004),
    ("race", "Balanced", 0.836, 0.832, 0.002, 1.023),
    ("race", "Stratified", 0.768, 0.767, 0.001, 1.003),
    ("race", "Group-Specific", 0.797, 0.801, 0.002, 1.020),
    ("gender", "Baseline", 0.836, 0.813, 0.015, 1.137),
    ("gender", "Balanced", 0.804, 0.765, 0.027, 1.196),
    ("gender", "Stratified", 0.714, 0.716, 0.001, 1.006),
    ("gender", "Group-Specific", 0.742, 0.793, 0.036, 1.250),
]


def _groups(m1, m2):
    return [
        GroupMetrics(GroupKey(Attribute.Sex, "Male"), 10, m1, 1.0),
        GroupMetrics(GroupKey(Attribute.Sex, "Female"), 10, m2, 1.0),
    ]


def test_published_table_arithmetic():
    start = time.monotonic()
    for _, model, m1, m2, sd_pub, ser_pub in PUBLISHED_ROWS:
        groups = _groups(m1, m2)
        sd = group_sd(groups, SdMode.Sample)
        ser = skewed_error_ratio(groups)
        assert sd == pytest.approx(sd_pub, abs=0.005), model
        assert ser == pytest.approx(ser_pub, abs=0.01), model
    elapsed = time.monotonic() - start
    assert elapsed < 1.0
    print(f"\nPASS published-table-arithmetic: 8/8 rows, SD +/-0.005, SER +/-0.01, {elapsed:.3f}s")


def test_metric_oracle_equivalence():
    start = time.monotonic()

    def naive(gt, pred, c):
        inter = union = total = 0
        for i in range(gt.shape[0]):
            for j in range(gt.shape[1]):
                g, p = bool(gt[i, j] == c), bool(pred[i, j] == c)
                inter += g and p
                union += g or p
                total += g + p
        iou = None if union == 0 else inter / union
        dice = None if total == 0 else 2 * inter / total
        return iou, dice

    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(200):
        gt = rng.integers(0, 5, size=(32, 32)).astype(np.uint8)
        pred = rng.integers(0, 5, size=(32, 32)).astype(np.uint8)
        for c in range(5):
            iou_ref, dice_ref = naive(gt, pred, c)
            iou = class_iou(gt, pred, c)
            dice = class_dice(gt, pred, c)
            assert iou == iou_ref and dice == dice_ref  # exact
            if iou is not None:
                assert abs(dice - 2 * iou / (1 + iou)) <= 1e-12
                checked += 1
    elapsed = time.monotonic() - start
    assert elapsed < 10.0
    print(f"\nPASS metric-oracle-equivalence: 200 pairs exact, {checked} Dice-IoU identities, {elapsed:.1f}s")


def test_sampler_invariant_suite(tmp_path):
    start = time.monotonic()
    rng = np.random.default_rng(7)
    sexes = [Sex.Male, Sex.Female]
    races = [Race.WhiteOrCaucasian, Race.BlackOrAfricanAmerican]
    for trial in range(100):
        n_groups = int(rng.integers(2, 4))
        n_records = int(rng.integers(10, 501))
        attribute = Attribute.SexByRace if n_groups == 3 else Attribute.Sex
        records = []
        for i in range(n_records):
            g = int(rng.integers(0, n_groups))
            if attribute is Attribute.Sex:
                sex, race = sexes[g], races[0]
            else:
                sex, race = sexes[g % 2], races[g // 2]
            records.append(CohortRecord(f"t{trial}r{i}", sex, race))
        levels = {r.group_value(attribute) for r in records}
        if len(levels) < n_groups:
            continue  # tiny cohorts can miss a level; invariants need >= 2 observed
        seed = int(rng.integers(0, 2**32))
        by = {r.id: r.group_value(attribute) for r in records}

        over = oversample_plan(records, attribute, seed, 16)
        counts = Counter(by[i] for b in over.batches for i in b)
        assert len(set(counts.values())) == 1  # balance

        strat = stratified_batch_plan(records, attribute, seed, 16)
        sizes = Counter(by[r.id] for r in records)
        largest = max(sizes, key=sizes.get)
        consumed = Counter(i for b in strat.batches for i in b if by[i] == largest)
        assert set(consumed.values()) == {1}  # largest group consumed exactly once
        for batch in strat.batches:
            c = Counter(by[i] for i in batch)
            assert max(c.values()) - min(c.values()) <= 1

        plans = group_partition(records, attribute, seed, 16)
        id_sets = [set(i for b in p.batches for i in b) for _, p in plans]
        union = set().union(*id_sets)
        assert union == {r.id for r in records}
        assert sum(len(s) for s in id_sets) == len(union)  # disjoint

        p1, p2 = tmp_path / "p1.json", tmp_path / "p2.json"
        write_plan(strat, p1)
        write_plan(stratified_batch_plan(records, attribute, seed, 16), p2)
        assert p1.read_bytes() == p2.read_bytes()
    elapsed = time.monotonic() - start
    assert elapsed < 30.0
    print(f"\nPASS sampler-invariant-suite: 100 seeded cohorts, {elapsed:.1f}s")


def test_split_correctness():
    cohort = table_i_cohort()
    split_a = stratified_split(cohort, seed=42)
    split_b = stratified_split(cohort, seed=42)
    assert split_a.assignments == split_b.assignments
    totals = Counter(split_a.assignments.values())
    assert (totals[Split.Train], totals[Split.Val], totals[Split.Test]) == (282, 60, 61)
    by = {r.id: r for r in cohort.records}
    strata: dict[str, Counter] = {}
    for rid, part in split_a.assignments.items():
        strata.setdefault(by[rid].group_value(Attribute.SexByRace), Counter())[part] += 1
    for label, parts in strata.items():
        n = sum(parts.values())
        for part, frac in zip((Split.Train, Split.Val, Split.Test), (0.7, 0.15, 0.15)):
            assert abs(parts[part] - n * frac) <= 1, label
    print("\nPASS split-correctness: 282/60/61, per-stratum deviation <= 1, deterministic")


def test_end_to_end_disparity_detection(tmp_path, capsys):
    start = time.monotonic()

    def audit(targets):
        cohort = tmp_path / targets.replace("=", "").replace(",", "_").replace(".", "")
        assert main([
            "synth", "--out", str(cohort), "--attr", "sex", "--targets", targets,
            "--n-per-group", "20", "--size", "64", "--seed", "99",
        ]) == 0
        assert main([
            "audit", "--gt", str(cohort / "gt"), "--pred", str(cohort / "pred"),
            "--meta", str(cohort / "metadata.csv"), "--group", "sex", "--format", "json",
        ]) == 0
        return json.loads(capsys.readouterr().out.strip().splitlines()[-1])

    skewed = audit("Male=0.85,Female=0.70")
    assert skewed["ser"] == pytest.approx(2.0, abs=0.2)
    assert skewed["sd"] == pytest.approx(0.106, abs=0.02)
    equal = audit("Male=0.80,Female=0.80")
    assert equal["ser"] <= 1.05
    elapsed = time.monotonic() - start
    assert elapsed < 60.0
    with capsys.disabled():
        print(
            f"\nPASS end-to-end-disparity: SER {skewed['ser']:.3f} (2.0+/-0.2), "
            f"SD {skewed['sd']:.3f} (0.106+/-0.02), equal-target SER {equal['ser']:.3f} <= 1.05, {elapsed:.1f}s"
        )


def test_absolute_values_not_reproduced_is_documented():
    # The published absolute group IoUs (e.g. Baseline 0.833/0.834 and the
    # 0.762/0.781 qualitative examples) depend on source images and private
    # annotations; this toolkit only reproduces the fairness arithmetic.
    readme = (Path(__file__).resolve().parent.parent / "README.md").read_text()
    assert "not reproduce" in readme.lower()
    print("\nPASS not-reproducible-stated: absolute IoU values are documented as out of reach")
