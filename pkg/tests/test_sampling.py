from collections import Counter

import pytest

from segfair.ingest import CohortTable
from segfair.model import (
    Attribute,
    BatchTooSmall,
    CohortRecord,
    EmptyInput,
    Race,
    SchemaMismatch,
    Sex,
    Split,
    StratumTooSmall,
    TooFewGroups,
)
from segfair.sampling import (
    SamplerPlan,
    Strategy,
    baseline_plan,
    group_partition,
    largest_remainder,
    oversample_plan,
    read_plan,
    stratified_batch_plan,
    stratified_split,
    write_plan,
)


def records(*counts):
    """counts: (sex, race, n) triples -> CohortRecord list."""
    out = []
    i = 0
    for sex, race, n in counts:
        for _ in range(n):
            out.append(CohortRecord(f"r{i:04d}", sex, race))
            i += 1
    return out


def group_counts(plan, recs, attribute):
    by = {r.id: r.group_value(attribute) for r in recs}
    return Counter(by[i] for b in plan.batches for i in b)


def test_largest_remainder_20():
    assert largest_remainder(20, (0.7, 0.15, 0.15)) == [14, 3, 3]


def test_largest_remainder_403_tie_to_later():
    # 403*(0.7,0.15,0.15) = (282.1, 60.45, 60.45); the val/test tie goes to test.
    assert largest_remainder(403, (0.7, 0.15, 0.15)) == [282, 60, 61]


def test_split_single_stratum_20():
    recs = records((Sex.Male, Race.WhiteOrCaucasian, 20))
    split = stratified_split(CohortTable(tuple(recs), "<mem>"), seed=1)
    c = Counter(split.assignments.values())
    assert (c[Split.Train], c[Split.Val], c[Split.Test]) == (14, 3, 3)


def test_split_403(cohort_403):
    split = stratified_split(cohort_403, seed=42)
    c = Counter(split.assignments.values())
    assert (c[Split.Train], c[Split.Val], c[Split.Test]) == (282, 60, 61)
    # Per-stratum deviation from exact quotas stays within one item.
    by = {r.id: r for r in cohort_403.records}
    strata = {}
    for rid, part in split.assignments.items():
        key = by[rid].group_value(Attribute.SexByRace)
        strata.setdefault(key, Counter())[part] += 1
    for key, parts in strata.items():
        n = sum(parts.values())
        for part, frac in zip((Split.Train, Split.Val, Split.Test), (0.7, 0.15, 0.15)):
            assert abs(parts[part] - n * frac) <= 1


def test_split_deterministic(cohort_403):
    a = stratified_split(cohort_403, seed=7)
    b = stratified_split(cohort_403, seed=7)
    assert a.assignments == b.assignments
    c = stratified_split(cohort_403, seed=8)
    assert a.assignments != c.assignments


def test_split_all_train():
    recs = records((Sex.Male, Race.WhiteOrCaucasian, 2))
    split = stratified_split(CohortTable(tuple(recs), "<mem>"), seed=1, fractions=(1.0, 0, 0))
    assert set(split.assignments.values()) == {Split.Train}


def test_split_stratum_too_small():
    recs = records((Sex.Male, Race.WhiteOrCaucasian, 2))
    with pytest.raises(StratumTooSmall):
        stratified_split(CohortTable(tuple(recs), "<mem>"), seed=1)


def test_baseline_plan_coverage():
    ids = [f"id{i}" for i in range(32)]
    plan = baseline_plan(ids, seed=3, batch_size=16)
    assert len(plan.batches) == 2
    assert Counter(i for b in plan.batches for i in b) == Counter(ids)


def test_baseline_plan_ragged_tail():
    ids = [f"id{i}" for i in range(33)]
    plan = baseline_plan(ids, seed=3, batch_size=16)
    assert [len(b) for b in plan.batches] == [16, 16, 1]


def test_baseline_plan_deterministic():
    ids = [f"id{i}" for i in range(33)]
    assert baseline_plan(ids, 5, 16) == baseline_plan(ids, 5, 16)


def test_baseline_plan_empty():
    with pytest.raises(EmptyInput):
        baseline_plan([], 1, 16)


def test_oversample_pads_minority():
    recs = records((Sex.Male, Race.WhiteOrCaucasian, 5), (Sex.Female, Race.WhiteOrCaucasian, 3))
    plan = oversample_plan(recs, Attribute.Sex, seed=2, batch_size=4)
    counts = group_counts(plan, recs, Attribute.Sex)
    assert counts == {"Male": 5, "Female": 5}
    ids = [i for b in plan.batches for i in b]
    assert set(ids) == {r.id for r in recs}  # every original id appears


def test_oversample_balanced_input_unchanged():
    recs = records((Sex.Male, Race.WhiteOrCaucasian, 4), (Sex.Female, Race.WhiteOrCaucasian, 4))
    plan = oversample_plan(recs, Attribute.Sex, seed=2, batch_size=4)
    ids = [i for b in plan.batches for i in b]
    assert Counter(ids) == Counter(r.id for r in recs)


def test_oversample_table_i_sex(cohort_403):
    recs = list(cohort_403.records)
    plan = oversample_plan(recs, Attribute.Sex, seed=2, batch_size=16)
    counts = group_counts(plan, recs, Attribute.Sex)
    assert counts == {"Male": 241, "Female": 241}
    assert sum(len(b) for b in plan.batches) == 482


def test_oversample_needs_two_groups():
    recs = records((Sex.Male, Race.WhiteOrCaucasian, 5))
    with pytest.raises(TooFewGroups):
        oversample_plan(recs, Attribute.Sex, seed=2, batch_size=4)


def test_stratified_two_groups_even_batches():
    recs = records((Sex.Male, Race.WhiteOrCaucasian, 40), (Sex.Female, Race.WhiteOrCaucasian, 24))
    plan = stratified_batch_plan(recs, Attribute.Sex, seed=9, batch_size=16)
    by = {r.id: r.group_value(Attribute.Sex) for r in recs}
    for batch in plan.batches:
        c = Counter(by[i] for i in batch)
        assert max(c.values()) - min(c.values()) <= 1
        if len(batch) == 16:
            assert c["Male"] == 8 and c["Female"] == 8
    # Largest group consumed exactly once.
    male_ids = [i for b in plan.batches for i in b if by[i] == "Male"]
    assert Counter(male_ids) == Counter(r.id for r in recs if r.sex is Sex.Male)


def test_stratified_three_groups_quota_rotation():
    recs = records(
        (Sex.Male, Race.WhiteOrCaucasian, 30),
        (Sex.Male, Race.BlackOrAfricanAmerican, 30),
        (Sex.Female, Race.WhiteOrCaucasian, 30),
    )
    plan = stratified_batch_plan(recs, Attribute.SexByRace, seed=9, batch_size=16)
    by = {r.id: r.group_value(Attribute.SexByRace) for r in recs}
    extras_seen = set()
    for batch in plan.batches:
        c = Counter(by[i] for i in batch)
        if len(batch) == 16:
            assert sorted(c.values(), reverse=True) == [6, 5, 5]
            extras_seen.add(max(c, key=c.get))
    assert len(extras_seen) == 3  # the spare slot rotates across all groups


def test_stratified_single_group_matches_baseline():
    recs = records((Sex.Male, Race.WhiteOrCaucasian, 33))
    plan = stratified_batch_plan(recs, Attribute.Sex, seed=4, batch_size=16)
    base = baseline_plan([r.id for r in recs], seed=4, batch_size=16)
    assert plan.batches == base.batches


def test_stratified_batch_too_small():
    recs = records((Sex.Male, Race.WhiteOrCaucasian, 5), (Sex.Female, Race.BlackOrAfricanAmerican, 5))
    with pytest.raises(BatchTooSmall):
        stratified_batch_plan(recs, Attribute.SexByRace, seed=1, batch_size=1)


def test_group_partition_law():
    recs = records((Sex.Male, Race.WhiteOrCaucasian, 7), (Sex.Female, Race.WhiteOrCaucasian, 5))
    plans = group_partition(recs, Attribute.Sex, seed=6, batch_size=4)
    assert [label for label, _ in plans] == ["Male", "Female"]
    id_sets = [set(i for b in p.batches for i in b) for _, p in plans]
    assert id_sets[0].isdisjoint(id_sets[1])
    assert id_sets[0] | id_sets[1] == {r.id for r in recs}
    assert all(p.group_label == label for label, p in plans)


def test_group_partition_table_i_sizes(cohort_403):
    plans = group_partition(list(cohort_403.records), Attribute.Sex, seed=6, batch_size=16)
    sizes = {label: sum(len(b) for b in p.batches) for label, p in plans}
    assert sizes == {"Male": 162, "Female": 241}


def test_group_partition_single_level_is_baseline():
    recs = records((Sex.Female, Race.WhiteOrCaucasian, 10))
    plans = group_partition(recs, Attribute.Sex, seed=3, batch_size=4)
    assert len(plans) == 1
    base = baseline_plan([r.id for r in recs], seed=3, batch_size=4)
    assert plans[0][1].batches == base.batches


def test_plan_roundtrip(tmp_path):
    recs = records((Sex.Male, Race.WhiteOrCaucasian, 9), (Sex.Female, Race.BlackOrAfricanAmerican, 6))
    plan = stratified_batch_plan(recs, Attribute.Sex, seed=11, batch_size=4)
    path = tmp_path / "plan.json"
    write_plan(plan, path)
    assert read_plan(path) == plan


def test_plan_bytes_deterministic(tmp_path):
    ids = [f"id{i}" for i in range(20)]
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    write_plan(baseline_plan(ids, 13, 8), p1)
    write_plan(baseline_plan(ids, 13, 8), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_plan_schema_mismatch(tmp_path):
    path = tmp_path / "plan.json"
    path.write_text('{"schema_version": "2", "strategy": "Baseline", "seed": 1, "batch_size": 2, "batches": []}')
    with pytest.raises(SchemaMismatch):
        read_plan(path)


def test_plan_minimal_handwritten(tmp_path):
    path = tmp_path / "plan.json"
    path.write_text(
        '{"schema_version": "1", "strategy": "Baseline", "seed": 0,'
        ' "batch_size": 2, "batches": [["a", "b"]]}'
    )
    plan = read_plan(path)
    assert plan.strategy is Strategy.Baseline
    assert plan.batches == (("a", "b"),)
