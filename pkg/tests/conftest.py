import numpy as np
import pytest

from segfair.model import CohortRecord, Race, Sex
from segfair.ingest import CohortTable

# Group counts from the source cohort's demographic table.
TABLE_I_COUNTS = [
    (Sex.Male, Race.WhiteOrCaucasian, 91),
    (Sex.Male, Race.BlackOrAfricanAmerican, 71),
    (Sex.Female, Race.WhiteOrCaucasian, 102),
    (Sex.Female, Race.BlackOrAfricanAmerican, 139),
]


def mask_from_rows(rows):
    return np.array(rows, dtype=np.uint8)


def random_mask(rng, shape=(32, 32), n_classes=5):
    return rng.integers(0, n_classes, size=shape).astype(np.uint8)


def table_i_cohort() -> CohortTable:
    records = []
    i = 0
    for sex, race, n in TABLE_I_COUNTS:
        for _ in range(n):
            records.append(CohortRecord(id=f"p{i:04d}", sex=sex, race=race))
            i += 1
    return CohortTable(records=tuple(records), source_path="<synthetic>")


@pytest.fixture
def cohort_403():
    return table_i_cohort()
