from __future__ import annotations

import math
from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from fareaudit.domain import (
    ActivityStatus,
    ActivityType,
    DomainError,
    RideActivity,
    classify_airport,
    compute_take_rate,
    is_analyzable,
    take_rate_from_cents,
)
from fareaudit.money import MoneyError, format_usd, parse_usd

from .conftest import make_activity


class TestComputeTakeRate:
    def test_table_means_ratio(self):
        # column means of the reference summary table: 30.11%, within
        # 0.2 pp of the reported 30% average under the ratio-of-means
        # reading
        assert compute_take_rate(7.44, 24.71, 0.00) == Decimal("30.11")
        assert abs(compute_take_rate(7.44, 24.71, 0.00) - Decimal(30)) <= Decimal("0.2")

    def test_zero_fee(self):
        assert compute_take_rate(0.00, 20.00, 5.00) == Decimal("0.00")

    def test_fee_equals_denominator(self):
        assert compute_take_rate(10.00, 10.00, 0.00) == Decimal("100.00")

    def test_negative_fee(self):
        assert compute_take_rate(-2.00, 18.00, 2.00) == Decimal("-12.50")

    def test_undefined_when_denominator_zero_or_negative(self):
        assert compute_take_rate(5.00, 5.00, 5.00) is None
        assert compute_take_rate(5.00, 4.00, 5.00) is None

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), float("-inf")])
    def test_non_finite_input_is_contract_violation(self, bad):
        with pytest.raises(MoneyError):
            compute_take_rate(bad, 10.0, 0.0)

    @given(
        fees=st.integers(min_value=-10_000, max_value=10_000),
        price=st.integers(min_value=1, max_value=50_000),
        tips=st.integers(min_value=0, max_value=5_000),
        scale=st.integers(min_value=1, max_value=200),
    )
    def test_homogeneity_degree_zero(self, fees, price, tips, scale):
        base = take_rate_from_cents(fees, price, tips)
        scaled = take_rate_from_cents(fees * scale, price * scale, tips * scale)
        if base is None:
            assert scaled is None
        else:
            # scaling all three monetary inputs never moves the percentage
            assert scaled == base or abs(scaled - base) <= Decimal("0.01")

    @given(
        fees=st.integers(min_value=-5_000, max_value=5_000),
        bump=st.integers(min_value=1, max_value=5_000),
        price=st.integers(min_value=1, max_value=50_000),
        tips=st.integers(min_value=0, max_value=5_000),
    )
    def test_monotone_increasing_in_fees(self, fees, bump, price, tips):
        lo = take_rate_from_cents(fees, price, tips)
        hi = take_rate_from_cents(fees + bump, price, tips)
        if lo is not None and hi is not None:
            assert hi >= lo


class TestClassifyAirport:
    def test_start_zip_in_set(self):
        a = make_activity(start_zip="80249", end_zip="80202")
        assert classify_airport(a, {"80249"}) is True

    def test_neither_endpoint_in_set(self):
        a = make_activity(start_zip="80202", end_zip="80203")
        assert classify_airport(a, {"80249"}) is False

    def test_missing_start_zip_single_endpoint_match(self):
        a = make_activity(start_zip=None, end_zip="80249")
        assert classify_airport(a, {"80249"}) is True

    def test_missing_both_zips_classifies_false(self):
        a = make_activity(start_zip=None, end_zip=None)
        assert classify_airport(a, {"80249"}) is False

    def test_empty_zip_set_rejected(self):
        with pytest.raises(DomainError):
            classify_airport(make_activity(), set())

    @given(zips=st.lists(st.sampled_from(["80249", "80202", "80203"]), min_size=1, max_size=3))
    def test_symmetric_in_endpoints(self, zips):
        a = make_activity(start_zip="80249", end_zip="80202")
        swapped = make_activity(start_zip="80202", end_zip="80249")
        assert classify_airport(a, zips) == classify_airport(swapped, zips)


class TestIsAnalyzable:
    def test_complete_completed_rideshare(self):
        assert is_analyzable(make_activity()) is True

    def test_delivery_excluded(self):
        assert is_analyzable(make_activity(activity_type=ActivityType.DELIVERY)) is False

    def test_cancelled_excluded(self):
        assert is_analyzable(make_activity(status=ActivityStatus.CANCELLED)) is False

    def test_missing_monetary_field_excluded(self):
        assert is_analyzable(make_activity(tips=None)) is False

    def test_missing_zip_is_fine(self):
        assert is_analyzable(make_activity(start_zip=None, end_zip=None)) is True


class TestMoneyRoundTrip:
    @given(cents=st.integers(min_value=-10_000_000, max_value=10_000_000))
    def test_parse_format_bit_identical(self, cents):
        text = format_usd(cents)
        assert parse_usd(text) == cents
        assert format_usd(parse_usd(text)) == text

    def test_float_shortest_repr(self):
        assert parse_usd(24.71) == 2471
        assert parse_usd("7.44") == 744
        assert format_usd(-5) == "-0.05"

    def test_garbage_rejected(self):
        with pytest.raises(MoneyError):
            parse_usd("not money")


class TestRideActivityModel:
    def test_end_before_start_rejected(self):
        with pytest.raises(DomainError):
            make_activity(duration_minutes=-5.0)

    def test_negative_base_pay_rejected(self):
        with pytest.raises(DomainError):
            make_activity(base_pay=-1)

    def test_bad_zip_rejected(self):
        with pytest.raises(DomainError):
            make_activity(start_zip="8020")

    def test_json_round_trip_bit_identical(self):
        a = make_activity(surge_flag=True, bonus=350)
        d = a.to_json_dict()
        again = RideActivity.from_json_dict(d)
        assert again.to_json_dict() == d
        assert again == a

    def test_json_money_is_decimal_string(self):
        d = make_activity().to_json_dict()
        assert d["rider_price_usd"] == "24.71"
        assert d["platform_fees_usd"] == "7.44"
        assert d["start_time"].endswith("Z")

    def test_take_rate_uses_tip_inclusive_denominator(self):
        # denominator is rider_price - tips: 2471 - 282 = 2189 cents
        a = make_activity()
        expected = Decimal(744 * 100) / Decimal(2189)
        assert a.take_rate_pct() == expected.quantize(Decimal("0.01"))

    def test_nan_distance_never_constructed(self):
        with pytest.raises((DomainError, ValueError)):
            RideActivity.from_json_dict(
                {**make_activity().to_json_dict(), "rider_price_usd": "inf"}
            )
