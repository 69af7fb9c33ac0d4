"""Deterministic cleaning stage.

Exclusion rules run in a fixed order; the first matching rule claims
the record, so the per-reason counts always partition the input:

    non_rideshare -> cancelled -> missing_fields
        -> undefined_take_rate -> negative_take_rate

Output order is canonical (start_time, activity_id), which makes every
downstream aggregate invariant under input permutation.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable

from ..domain import (
    ActivityStatus,
    ActivityType,
    RideActivity,
    TakeRateRecord,
    missing_required_fields,
)

EXCLUSION_ORDER = (
    "non_rideshare",
    "cancelled",
    "missing_fields",
    "undefined_take_rate",
    "negative_take_rate",
)


@dataclass(frozen=True)
class CleaningReport:
    input_count: int
    retained_count: int
    excluded: dict[str, int]

    def __post_init__(self) -> None:
        total = self.retained_count + sum(self.excluded.values())
        if total != self.input_count:
            raise ValueError(
                f"cleaning partition broken: {self.input_count} != {total}"
            )

    def to_json_dict(self) -> dict:
        return {
            "input_count": self.input_count,
            "retained_count": self.retained_count,
            "excluded": {k: self.excluded[k] for k in EXCLUSION_ORDER},
        }


@dataclass(frozen=True)
class RetainedRide:
    """A ride that survived cleaning, with its take rate attached."""

    activity: RideActivity
    take_rate_pct: Decimal

    @property
    def take_rate_record(self) -> TakeRateRecord:
        return TakeRateRecord(self.activity.activity_id, self.take_rate_pct)


def clean(activities: Iterable[RideActivity]) -> tuple[list[RetainedRide], CleaningReport]:
    counts = {reason: 0 for reason in EXCLUSION_ORDER}
    retained: list[RetainedRide] = []
    n = 0
    for a in activities:
        n += 1
        if a.activity_type is not ActivityType.RIDESHARE:
            counts["non_rideshare"] += 1
            continue
        if a.status is ActivityStatus.CANCELLED:
            counts["cancelled"] += 1
            continue
        if missing_required_fields(a):
            counts["missing_fields"] += 1
            continue
        rate = a.take_rate_pct()
        if rate is None:
            counts["undefined_take_rate"] += 1
            continue
        if rate < 0:
            counts["negative_take_rate"] += 1
            continue
        retained.append(RetainedRide(a, rate))
    retained.sort(key=lambda r: (r.activity.start_time, r.activity.activity_id))
    report = CleaningReport(input_count=n, retained_count=len(retained), excluded=counts)
    return retained, report
