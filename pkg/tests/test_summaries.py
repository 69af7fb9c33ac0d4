from __future__ import annotations

from datetime import datetime, timezone
from decimal import Decimal

import pytest

from fareaudit.analytics.cleaning import clean
from fareaudit.analytics.summaries import (
    airport_partition,
    compare,
    perception_vs_actual,
    rate_per_mile,
    summarize,
    summarize_group,
    surge_partition,
    weekly_series,
)
from fareaudit.provider.fees import FeeEra, FeeModel
from fareaudit.provider.generator import GeneratorParams, generate_history

from .conftest import make_activity
from .fixtures import ride_with_rate
from .oracles import oracle_summary


def retained_of(rows):
    retained, _ = clean(rows)
    return retained


class TestSummarize:
    def test_four_rides_hand_computed(self):
        # sums: price 100+200+40+60 = $400, fees 30+50+8+15 = $103,
        # tips 10+0+0+5 = $15, base = net - fees
        rows = [
            make_activity(activity_id="r1", driver_id="d1", rider_price=10_000,
                          platform_fees=3_000, base_pay=6_000, tips=1_000,
                          distance_miles=10.0, duration_minutes=20.0),
            make_activity(activity_id="r2", driver_id="d1", rider_price=20_000,
                          platform_fees=5_000, base_pay=15_000, tips=0,
                          distance_miles=20.0, duration_minutes=40.0),
            make_activity(activity_id="r3", driver_id="d2", rider_price=4_000,
                          platform_fees=800, base_pay=3_200, tips=0,
                          distance_miles=4.0, duration_minutes=10.0),
            make_activity(activity_id="r4", driver_id="d2", rider_price=6_000,
                          platform_fees=1_500, base_pay=4_000, tips=500,
                          distance_miles=6.0, duration_minutes=14.0),
        ]
        s = summarize_group(retained_of(rows))
        assert s.n_rides == 4 and s.n_drivers == 2
        assert s.rider_price_mean == Decimal("100.00")
        assert s.fees_mean == Decimal("25.75")
        assert s.tips_mean == Decimal("3.75")
        assert s.base_pay_mean == Decimal("70.50")
        assert s.distance_miles_mean == 10.0
        assert s.duration_minutes_mean == 21.0
        # ratio of means: 10300 / (40000 - 1500) * 100 = 26.7532... -> 26.75
        assert s.take_rate_ratio_of_means == Decimal("26.75")
        # per-ride rates: 33.33, 25.00, 20.00, 27.27 -> mean 26.40
        assert s.take_rate_mean_of_ratios == Decimal("26.40")

    def test_single_ride_means_equal_fields(self):
        rows = [make_activity()]
        s = summarize_group(retained_of(rows))
        assert s.rider_price_mean == Decimal("24.71")
        assert s.fees_mean == Decimal("7.44")
        assert s.n_rides == 1 and s.n_drivers == 1

    def test_matches_brute_force_oracle(self):
        rows = [
            make_activity(
                activity_id=f"r{i}",
                driver_id=f"d{i % 3}",
                rider_price=1000 + 137 * i,
                platform_fees=100 + 61 * i,
                base_pay=900 + 137 * i - (100 + 61 * i) - (50 if i % 2 else 0),
                tips=50 if i % 2 else 0,
            )
            for i in range(15)
        ]
        s = summarize_group(retained_of(rows))
        oracle = oracle_summary(rows)
        assert s.n_rides == oracle["n_rides"]
        assert s.rider_price_mean == oracle["rider_price_mean"]
        assert s.fees_mean == oracle["fees_mean"]
        assert s.base_pay_mean == oracle["base_pay_mean"]
        assert s.tips_mean == oracle["tips_mean"]
        assert s.take_rate_mean_of_ratios == oracle["take_rate_mean_of_ratios"]
        assert s.take_rate_ratio_of_means == oracle["take_rate_ratio_of_means"]

    def test_generator_truth_recovery_exact(self):
        # with the accounting identity, ratio-of-means equals the direct
        # computation from generator output exactly
        params = GeneratorParams(
            n_rides=600,
            date_span=(
                datetime(2022, 1, 1, tzinfo=timezone.utc),
                datetime(2023, 12, 31, tzinfo=timezone.utc),
            ),
        )
        history = generate_history("acct-g", "drv-g", params, seed=13)
        retained = retained_of(history)
        s = summarize_group(retained)
        fees = sum(r.activity.platform_fees for r in retained)
        net = sum(r.activity.rider_price - r.activity.tips for r in retained)
        expected = (Decimal(fees) * 100 / Decimal(net)).quantize(Decimal("0.01"))
        assert s.take_rate_ratio_of_means == expected

    def test_law_of_large_numbers_against_configured_mean(self):
        thirty = FeeModel(
            eras=(
                FeeEra(
                    datetime(2015, 1, 1).date(),
                    datetime(2035, 1, 1).date(),
                    0.30,
                    0.30,
                    0.06,
                    variable=True,
                ),
            )
        )
        params = GeneratorParams(
            n_rides=5000,
            date_span=(
                datetime(2021, 1, 1, tzinfo=timezone.utc),
                datetime(2023, 12, 31, tzinfo=timezone.utc),
            ),
            fee_model=thirty,
        )
        history = generate_history("acct-lln", "drv-lln", params, seed=77)
        s = summarize_group(retained_of(history))
        assert abs(s.take_rate_ratio_of_means - Decimal(30)) < 1

    def test_grouped_summaries(self):
        rows = [
            ride_with_rate("s1", "d1", 35.0, surge=True),
            ride_with_rate("s2", "d1", 36.0, surge=True),
            ride_with_rate("n1", "d2", 25.0),
        ]
        groups = summarize(retained_of(rows), lambda r: "surge" if surge_partition(r) else "non_surge")
        assert groups["surge"].n_rides == 2
        assert groups["non_surge"].n_rides == 1
        assert groups["surge"].take_rate_mean_of_ratios == Decimal("35.50")

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            summarize_group([])


class TestWeeklySeries:
    def test_one_week_mean(self):
        rows = [
            ride_with_rate("w1", "d1", 10.0, start="2022-03-01T10:00:00Z"),
            ride_with_rate("w2", "d1", 20.0, start="2022-03-02T10:00:00Z"),
            ride_with_rate("w3", "d1", 30.0, start="2022-03-03T10:00:00Z"),
        ]
        series = weekly_series(retained_of(rows))
        assert len(series) == 1
        assert series[0].iso_week == "2022-W09"
        assert series[0].mean_take_rate_pct == Decimal("20.00")
        assert series[0].n_rides == 3

    def test_two_weeks_ordered(self):
        rows = [
            ride_with_rate("w1", "d1", 10.0, start="2022-03-08T10:00:00Z"),
            ride_with_rate("w2", "d1", 20.0, start="2022-03-01T10:00:00Z"),
        ]
        series = weekly_series(retained_of(rows))
        assert [p.iso_week for p in series] == ["2022-W09", "2022-W10"]

    def test_iso_week_year_boundary(self):
        # 2021-01-01 belongs to ISO week 2020-W53
        rows = [ride_with_rate("w1", "d1", 10.0, start="2021-01-01T10:00:00Z")]
        series = weekly_series(retained_of(rows))
        assert series[0].iso_week == "2020-W53"

    def test_empty_weeks_omitted(self):
        rows = [
            ride_with_rate("w1", "d1", 10.0, start="2022-01-03T10:00:00Z"),
            ride_with_rate("w2", "d1", 20.0, start="2022-03-01T10:00:00Z"),
        ]
        series = weekly_series(retained_of(rows))
        assert len(series) == 2  # no zero-ride weeks in between


class TestCompare:
    def test_identical_sides_not_significant(self):
        rows = [ride_with_rate(f"a{i}", "d1", 20.0 + i, surge=True) for i in range(10)]
        rows += [ride_with_rate(f"b{i}", "d1", 20.0 + i) for i in range(10)]
        result = compare(retained_of(rows), surge_partition, "surge", "non_surge")
        assert result.p_value >= 0.99
        assert result.significant_at_05 is False

    def test_shifted_side_detected(self):
        rows = [ride_with_rate(f"a{i}", "d1", 38.0 + (i % 7) * 0.5, surge=True) for i in range(40)]
        rows += [ride_with_rate(f"b{i}", "d1", 27.0 + (i % 7) * 0.5) for i in range(40)]
        result = compare(retained_of(rows), surge_partition, "surge", "non_surge")
        assert result.p_value < 0.001
        assert result.significant_at_05 is True
        assert result.mean_a > result.mean_b
        assert result.mode_a > result.mode_b

    def test_one_side_empty_degenerate(self):
        rows = [ride_with_rate(f"b{i}", "d1", 25.0) for i in range(5)]
        result = compare(retained_of(rows), surge_partition, "surge", "non_surge")
        assert result.n_a == 0 and result.n_b == 5
        assert result.p_value is None
        assert result.test_name == "degenerate"
        assert result.significant_at_05 is False

    def test_airport_partition_via_zips(self):
        rows = [
            ride_with_rate("a1", "d1", 30.0, start_zip="80249"),
            ride_with_rate("n1", "d1", 25.0),
        ]
        result = compare(
            retained_of(rows), airport_partition({"80249"}), "airport", "non_airport"
        )
        assert result.n_a == 1 and result.n_b == 1

    def test_bin_width_recorded(self):
        rows = [ride_with_rate(f"a{i}", "d1", 30.0, surge=i % 2 == 0) for i in range(6)]
        result = compare(retained_of(rows), surge_partition, "s", "n", bin_width=0.5)
        assert result.bin_width == Decimal("0.5")


class TestPerception:
    def respond(self, driver_id, est, fair):
        return {
            "driver_id": driver_id,
            "estimated_take_rate_pct": est,
            "fair_take_rate_pct": fair,
            "factors_text": "",
        }

    def test_two_respondents_hand_computed(self):
        rides = [
            ride_with_rate("p1", "d1", 33.0),
            ride_with_rate("p2", "d2", 33.0),
        ]
        responses = [self.respond("d1", 50, 20), self.respond("d2", 60, 22)]
        p = perception_vs_actual(responses, retained_of(rides))
        assert p.mean_estimated_pct == Decimal("55.00")
        assert p.mean_fair_pct == Decimal("21.00")
        assert p.actual_pct == Decimal("33.00")
        assert p.n_respondents == 2

    def test_single_respondent_identity(self):
        rides = [ride_with_rate("p1", "d1", 28.0)]
        p = perception_vs_actual([self.respond("d1", 40, 25)], retained_of(rides))
        assert p.mean_estimated_pct == Decimal("40.00")
        assert p.actual_pct == Decimal("28.00")

    def test_respondent_without_rides_excluded(self):
        rides = [ride_with_rate("p1", "d1", 28.0)]
        responses = [self.respond("d1", 40, 25), self.respond("d-ghost", 90, 5)]
        p = perception_vs_actual(responses, retained_of(rides))
        assert p.n_respondents == 1
        assert p.mean_estimated_pct == Decimal("40.00")

    def test_zero_qualifying_explicit_empty(self):
        p = perception_vs_actual([self.respond("d-ghost", 40, 25)], [])
        assert p.n_respondents == 0
        assert p.mean_estimated_pct is None and p.actual_pct is None


class TestRatePerMile:
    def test_single_ride(self):
        rows = [
            make_activity(
                activity_id="r1",
                distance_miles=10.0,
                rider_price=2500,
                platform_fees=500,
                base_pay=1500,
                tips=500,
            )
        ]
        bins = rate_per_mile(retained_of(rows), [0.1, 5, 15])
        assert len(bins) == 1
        assert bins[0].lo_miles == 5 and bins[0].hi_miles == 15
        assert bins[0].mean_rate_usd_per_mile == Decimal("2.00")

    def test_six_rides_two_bins_hand_computed(self):
        def pay_ride(aid, miles, base_c, tips_c):
            return make_activity(
                activity_id=aid,
                distance_miles=miles,
                rider_price=base_c + tips_c + 500,
                platform_fees=500,
                base_pay=base_c,
                tips=tips_c,
            )

        rows = [
            pay_ride("a", 2.0, 600, 0),     # 3.00 / mi
            pay_ride("b", 4.0, 800, 0),     # 2.00 / mi
            pay_ride("c", 2.5, 1000, 0),    # 4.00 / mi
            pay_ride("d", 10.0, 1500, 500), # 2.00 / mi
            pay_ride("e", 20.0, 3000, 1000),# 2.00 / mi
            pay_ride("f", 12.0, 2400, 0),   # 2.00 / mi
        ]
        bins = rate_per_mile(retained_of(rows), [0.1, 5, 25])
        assert bins[0].n_rides == 3
        assert bins[0].mean_rate_usd_per_mile == Decimal("3.00")
        assert bins[1].n_rides == 3
        assert bins[1].mean_rate_usd_per_mile == Decimal("2.00")

    def test_short_distance_guard(self):
        rows = [
            make_activity(
                activity_id="tiny",
                distance_miles=0.05,
                rider_price=1000,
                platform_fees=100,
                base_pay=900,
                tips=0,
            )
        ]
        assert rate_per_mile(retained_of(rows), [0.0, 5.0]) == []

    def test_empty_bin_omitted(self):
        rows = [make_activity(activity_id="r1", distance_miles=2.0)]
        bins = rate_per_mile(retained_of(rows), [0.1, 5, 15, 40])
        assert [(b.lo_miles, b.hi_miles) for b in bins] == [(0.1, 5)]

    def test_bad_edges_rejected(self):
        with pytest.raises(ValueError):
            rate_per_mile([], [5, 5])
