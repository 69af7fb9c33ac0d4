"""Aggregate statistics, time series and group comparisons over retained rides.

Take rates are aggregated both ways everywhere: mean-of-ratios (mean of
per-ride percentages) and ratio-of-means (total fees over total net
fares). The two differ whenever fares vary, so both are always emitted
side by side.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime
from decimal import Decimal, ROUND_HALF_EVEN
from typing import Any, Callable, Iterable, Sequence

from ..domain import classify_airport
from ..money import mean_cents
from .cleaning import RetainedRide
from .stats import mann_whitney_u, mode_estimate

logger = logging.getLogger(__name__)

_PCT = Decimal("0.01")


def _pct(value: Decimal) -> Decimal:
    return value.quantize(_PCT, rounding=ROUND_HALF_EVEN)


def mean_of_ratios(retained: Sequence[RetainedRide]) -> Decimal:
    total = sum((r.take_rate_pct for r in retained), Decimal(0))
    return _pct(total / len(retained))


def ratio_of_means(retained: Sequence[RetainedRide]) -> Decimal:
    fees = sum(r.activity.platform_fees for r in retained)
    net = sum(r.activity.rider_price - r.activity.tips for r in retained)
    return _pct(Decimal(fees) * 100 / Decimal(net))


@dataclass(frozen=True)
class AggregateSummary:
    group: str
    n_drivers: int
    n_rides: int
    distance_miles_mean: float
    duration_minutes_mean: float
    rider_price_mean: Decimal
    fees_mean: Decimal
    base_pay_mean: Decimal
    tips_mean: Decimal
    take_rate_mean_of_ratios: Decimal
    take_rate_ratio_of_means: Decimal

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "group": self.group,
            "n_drivers": self.n_drivers,
            "n_rides": self.n_rides,
            "distance_miles_mean": self.distance_miles_mean,
            "duration_minutes_mean": self.duration_minutes_mean,
            "rider_price_mean_usd": str(self.rider_price_mean),
            "fees_mean_usd": str(self.fees_mean),
            "base_pay_mean_usd": str(self.base_pay_mean),
            "tips_mean_usd": str(self.tips_mean),
            "take_rate_mean_of_ratios_pct": float(self.take_rate_mean_of_ratios),
            "take_rate_ratio_of_means_pct": float(self.take_rate_ratio_of_means),
        }


def summarize_group(retained: Sequence[RetainedRide], group: str = "all") -> AggregateSummary:
    if not retained:
        raise ValueError("summarize requires a non-empty group")
    n = len(retained)
    return AggregateSummary(
        group=group,
        n_drivers=len({r.activity.driver_id for r in retained}),
        n_rides=n,
        distance_miles_mean=round(sum(r.activity.distance_miles for r in retained) / n, 2),
        duration_minutes_mean=round(
            sum(r.activity.duration_minutes for r in retained) / n, 2
        ),
        rider_price_mean=mean_cents([r.activity.rider_price for r in retained]),
        fees_mean=mean_cents([r.activity.platform_fees for r in retained]),
        base_pay_mean=mean_cents([r.activity.base_pay for r in retained]),
        tips_mean=mean_cents([r.activity.tips for r in retained]),
        take_rate_mean_of_ratios=mean_of_ratios(retained),
        take_rate_ratio_of_means=ratio_of_means(retained),
    )


def summarize(
    retained: Sequence[RetainedRide],
    group_key: Callable[[RetainedRide], str | None] | None = None,
) -> dict[str, AggregateSummary]:
    """One AggregateSummary per group (key None drops the ride).

    Without a group_key the whole input is the single group "all".
    Groups that come out empty are omitted with a logged notice.
    """
    if group_key is None:
        return {"all": summarize_group(retained, "all")}
    buckets: dict[str, list[RetainedRide]] = {}
    for r in retained:
        label = group_key(r)
        if label is None:
            continue
        buckets.setdefault(label, []).append(r)
    out: dict[str, AggregateSummary] = {}
    for label in sorted(buckets):
        rides = buckets[label]
        if not rides:
            logger.info("group %s is empty, omitted from summary", label)
            continue
        out[label] = summarize_group(rides, label)
    return out


# -- weekly time series -------------------------------------------------------


@dataclass(frozen=True)
class WeekPoint:
    iso_week: str  # e.g. "2022-W07"
    mean_take_rate_pct: Decimal
    n_rides: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "iso_week": self.iso_week,
            "mean_take_rate_pct": float(self.mean_take_rate_pct),
            "n_rides": self.n_rides,
        }


def iso_week_label(dt: datetime) -> str:
    year, week, _ = dt.isocalendar()
    return f"{year:04d}-W{week:02d}"


def weekly_series(retained: Sequence[RetainedRide]) -> list[WeekPoint]:
    """Per-ride-weighted mean take rate per ISO week; empty weeks omitted."""
    buckets: dict[tuple[int, int], list[Decimal]] = {}
    for r in retained:
        year, week, _ = r.activity.start_time.isocalendar()
        buckets.setdefault((year, week), []).append(r.take_rate_pct)
    points = []
    for (year, week) in sorted(buckets):
        rates = buckets[(year, week)]
        mean = _pct(sum(rates, Decimal(0)) / len(rates))
        points.append(WeekPoint(f"{year:04d}-W{week:02d}", mean, len(rates)))
    return points


# -- comparisons ----------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonResult:
    label_a: str
    label_b: str
    n_a: int
    n_b: int
    mean_a: Decimal | None
    mean_b: Decimal | None
    mode_a: Decimal | None
    mode_b: Decimal | None
    bin_width: Decimal
    p_value: float | None
    test_name: str
    significant_at_05: bool
    values_a: tuple[float, ...] = ()
    values_b: tuple[float, ...] = ()

    def to_json_dict(self, include_values: bool = False) -> dict[str, Any]:
        d: dict[str, Any] = {
            "label_a": self.label_a,
            "label_b": self.label_b,
            "n_a": self.n_a,
            "n_b": self.n_b,
            "mean_a_pct": None if self.mean_a is None else float(self.mean_a),
            "mean_b_pct": None if self.mean_b is None else float(self.mean_b),
            "mode_a_pct": None if self.mode_a is None else float(self.mode_a),
            "mode_b_pct": None if self.mode_b is None else float(self.mode_b),
            "bin_width_pct": float(self.bin_width),
            "p_value": self.p_value,
            "test_name": self.test_name,
            "significant_at_05": self.significant_at_05,
        }
        if include_values:
            d["values_a"] = list(self.values_a)
            d["values_b"] = list(self.values_b)
        return d


def compare(
    retained: Sequence[RetainedRide],
    partition: Callable[[RetainedRide], bool],
    label_a: str,
    label_b: str,
    bin_width: float | Decimal = 0.5,
) -> ComparisonResult:
    """Two-sided Mann-Whitney U comparison of take rates across a partition.

    Side A is where the partition predicate holds. When one side is
    empty the result is explicitly degenerate: no p-value, never
    significant.
    """
    side_a = [r for r in retained if partition(r)]
    side_b = [r for r in retained if not partition(r)]
    w = Decimal(str(bin_width)) if not isinstance(bin_width, Decimal) else bin_width
    rates_a = [r.take_rate_pct for r in side_a]
    rates_b = [r.take_rate_pct for r in side_b]
    if not side_a or not side_b:
        return ComparisonResult(
            label_a=label_a,
            label_b=label_b,
            n_a=len(side_a),
            n_b=len(side_b),
            mean_a=_pct(mean_of_ratios(side_a)) if side_a else None,
            mean_b=_pct(mean_of_ratios(side_b)) if side_b else None,
            mode_a=mode_estimate(rates_a, w) if side_a else None,
            mode_b=mode_estimate(rates_b, w) if side_b else None,
            bin_width=w,
            p_value=None,
            test_name="degenerate",
            significant_at_05=False,
        )
    mw = mann_whitney_u([float(v) for v in rates_a], [float(v) for v in rates_b])
    return ComparisonResult(
        label_a=label_a,
        label_b=label_b,
        n_a=len(side_a),
        n_b=len(side_b),
        mean_a=mean_of_ratios(side_a),
        mean_b=mean_of_ratios(side_b),
        mode_a=mode_estimate(rates_a, w),
        mode_b=mode_estimate(rates_b, w),
        bin_width=w,
        p_value=mw.p_value,
        test_name=f"mann_whitney_u_{mw.method}",
        significant_at_05=mw.p_value < 0.05,
        values_a=tuple(float(v) for v in rates_a),
        values_b=tuple(float(v) for v in rates_b),
    )


def airport_partition(airport_zips: Iterable[str]) -> Callable[[RetainedRide], bool]:
    zips = frozenset(airport_zips)
    return lambda r: classify_airport(r.activity, zips)


def surge_partition(r: RetainedRide) -> bool:
    return r.activity.surge_flag


# -- survey perception vs measured reality ---------------------------------------


@dataclass(frozen=True)
class PerceptionComparison:
    mean_estimated_pct: Decimal | None
    mean_fair_pct: Decimal | None
    actual_pct: Decimal | None
    n_respondents: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "mean_estimated_pct": None
            if self.mean_estimated_pct is None
            else float(self.mean_estimated_pct),
            "mean_fair_pct": None if self.mean_fair_pct is None else float(self.mean_fair_pct),
            "actual_pct": None if self.actual_pct is None else float(self.actual_pct),
            "n_respondents": self.n_respondents,
        }


def perception_vs_actual(
    responses: Sequence[dict[str, Any]], retained: Sequence[RetainedRide]
) -> PerceptionComparison:
    """Survey answers vs the measured take rate.

    Only drivers with both a response and at least one retained ride
    qualify; actual is the pooled mean-of-ratios over their rides.
    """
    rides_by_driver: dict[str, list[RetainedRide]] = {}
    for r in retained:
        rides_by_driver.setdefault(r.activity.driver_id, []).append(r)
    qualifying = [resp for resp in responses if resp["driver_id"] in rides_by_driver]
    if not qualifying:
        return PerceptionComparison(None, None, None, 0)
    est = sum(Decimal(str(r["estimated_take_rate_pct"])) for r in qualifying)
    fair = sum(Decimal(str(r["fair_take_rate_pct"])) for r in qualifying)
    pooled: list[RetainedRide] = []
    for resp in qualifying:
        pooled.extend(rides_by_driver[resp["driver_id"]])
    return PerceptionComparison(
        mean_estimated_pct=_pct(est / len(qualifying)),
        mean_fair_pct=_pct(fair / len(qualifying)),
        actual_pct=mean_of_ratios(pooled),
        n_respondents=len(qualifying),
    )


# -- pay per mile by distance ------------------------------------------------------


@dataclass(frozen=True)
class DistanceRateBin:
    lo_miles: float
    hi_miles: float
    mean_rate_usd_per_mile: Decimal
    n_rides: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "lo_miles": self.lo_miles,
            "hi_miles": self.hi_miles,
            "mean_rate_usd_per_mile": float(self.mean_rate_usd_per_mile),
            "n_rides": self.n_rides,
        }


MIN_RATE_DISTANCE_MILES = 0.1


def rate_per_mile(
    retained: Sequence[RetainedRide], bin_edges: Sequence[float]
) -> list[DistanceRateBin]:
    """Mean driver pay (base + tips) per mile, bucketed by trip distance.

    Bins are half-open [lo, hi); rides shorter than the division guard
    (0.1 mi) are dropped; empty bins are omitted.
    """
    edges = list(bin_edges)
    if len(edges) < 2 or any(a >= b for a, b in zip(edges, edges[1:])):
        raise ValueError("bin_edges must be strictly increasing with >= 2 edges")
    buckets: dict[int, list[float]] = {}
    for r in retained:
        d = r.activity.distance_miles
        if d < MIN_RATE_DISTANCE_MILES:
            continue
        for i in range(len(edges) - 1):
            if edges[i] <= d < edges[i + 1]:
                pay = (r.activity.base_pay + r.activity.tips) / 100.0
                buckets.setdefault(i, []).append(pay / d)
                break
    out = []
    for i in sorted(buckets):
        rates = buckets[i]
        mean = Decimal(str(sum(rates) / len(rates))).quantize(_PCT, rounding=ROUND_HALF_EVEN)
        out.append(DistanceRateBin(edges[i], edges[i + 1], mean, len(rates)))
    return out
