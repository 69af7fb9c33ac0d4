from __future__ import annotations

import random

from fareaudit.analytics.cleaning import EXCLUSION_ORDER, clean
from fareaudit.domain import ActivityStatus, ActivityType

from .conftest import make_activity
from .fixtures import defect_fixture, random_activity


class TestDefectFixture:
    def test_counts_match_exactly(self):
        retained, report = clean(defect_fixture())
        assert report.input_count == 100
        assert report.retained_count == 72
        assert len(retained) == 72
        assert report.excluded == {
            "non_rideshare": 8,
            "cancelled": 5,
            "missing_fields": 3,
            "undefined_take_rate": 0,
            "negative_take_rate": 12,
        }

    def test_empty_input(self):
        retained, report = clean([])
        assert retained == []
        assert report.input_count == 0 and report.retained_count == 0
        assert all(v == 0 for v in report.excluded.values())

    def test_all_valid_input(self):
        rows = [make_activity(activity_id=f"a{i}") for i in range(10)]
        retained, report = clean(rows)
        assert report.retained_count == 10
        assert sum(report.excluded.values()) == 0


class TestRulePrecedence:
    def test_cancelled_delivery_counts_as_non_rideshare(self):
        row = make_activity(
            activity_type=ActivityType.DELIVERY, status=ActivityStatus.CANCELLED
        )
        _, report = clean([row])
        assert report.excluded["non_rideshare"] == 1
        assert report.excluded["cancelled"] == 0

    def test_cancelled_with_negative_fee_counts_as_cancelled(self):
        row = make_activity(
            status=ActivityStatus.CANCELLED,
            platform_fees=-100,
            base_pay=2289,
        )
        _, report = clean([row])
        assert report.excluded["cancelled"] == 1
        assert report.excluded["negative_take_rate"] == 0

    def test_missing_field_with_negative_fee_counts_as_missing(self):
        row = make_activity(tips=None, platform_fees=-100, base_pay=2289)
        _, report = clean([row])
        assert report.excluded["missing_fields"] == 1

    def test_undefined_before_negative(self):
        # denominator <= 0 and fees negative: undefined wins
        row = make_activity(rider_price=500, tips=500, platform_fees=-100, base_pay=2289)
        _, report = clean([row])
        assert report.excluded["undefined_take_rate"] == 1
        assert report.excluded["negative_take_rate"] == 0


class TestDeterminism:
    def test_permutation_invariance(self):
        rows = defect_fixture()
        retained1, report1 = clean(rows)
        shuffled = list(rows)
        random.Random(99).shuffle(shuffled)
        retained2, report2 = clean(shuffled)
        assert report1 == report2
        assert [r.activity.activity_id for r in retained1] == [
            r.activity.activity_id for r in retained2
        ]

    def test_output_sorted_by_start_time_then_id(self):
        retained, _ = clean(defect_fixture())
        keys = [(r.activity.start_time, r.activity.activity_id) for r in retained]
        assert keys == sorted(keys)


class TestPartitionProperty:
    def test_randomized_partition_always_balances(self):
        rnd = random.Random(2024)
        for case in range(100):
            rows = [random_activity(rnd, i) for i in range(rnd.randrange(0, 60))]
            retained, report = clean(rows)
            assert report.input_count == len(rows)
            assert report.retained_count == len(retained)
            assert report.input_count == report.retained_count + sum(
                report.excluded.values()
            )
            assert set(report.excluded) == set(EXCLUSION_ORDER)
            for ride in retained:
                assert ride.take_rate_pct >= 0
