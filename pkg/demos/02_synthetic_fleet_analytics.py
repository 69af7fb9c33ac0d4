#!/usr/bin/env python3
# A synthetic fleet, end to end through the analytics: deterministic
# histories, cleaning, the weekly take-rate arc across pricing eras,
# and the airport / surge comparisons.

from datetime import datetime, timezone

from fareaudit.analytics.cleaning import clean
from fareaudit.analytics.summaries import (
    airport_partition,
    compare,
    rate_per_mile,
    summarize_group,
    surge_partition,
    weekly_series,
)
from fareaudit.provider.generator import GeneratorParams, generate_history

params = GeneratorParams(
    n_rides=1000,
    date_span=(
        datetime(2019, 1, 1, tzinfo=timezone.utc),
        datetime(2024, 6, 30, tzinfo=timezone.utc),
    ),
)

print("generating 5 drivers x 1000 rides, 2019 through mid-2024 ...")
pool = []
for i in range(5):
    pool.extend(generate_history(f"acct-{i}", f"drv-{i}", params, seed=100 + i))

retained, report = clean(pool)
print(f"cleaned: {report.input_count} -> {report.retained_count} retained")
print(f"  exclusions: {report.excluded}\n")

summary = summarize_group(retained)
print("fleet summary")
print(f"  drivers {summary.n_drivers}, rides {summary.n_rides}")
print(f"  mean distance {summary.distance_miles_mean} mi, "
      f"duration {summary.duration_minutes_mean} min")
print(f"  mean rider price ${summary.rider_price_mean}, fees ${summary.fees_mean}, "
      f"base pay ${summary.base_pay_mean}, tips ${summary.tips_mean}")
print(f"  take rate: {summary.take_rate_mean_of_ratios}% (mean of ratios), "
      f"{summary.take_rate_ratio_of_means}% (ratio of means)\n")

series = weekly_series(retained)
peak = max(series, key=lambda p: p.mean_take_rate_pct)
era = params.fee_model.high_fee_era()
print(f"weekly series: {len(series)} weeks")
print(f"  first {series[0].iso_week} at {series[0].mean_take_rate_pct}%")
print(f"  peak  {peak.iso_week} at {peak.mean_take_rate_pct}% "
      f"(configured high-fee era {era[0]}..{era[1]})")
print(f"  last  {series[-1].iso_week} at {series[-1].mean_take_rate_pct}%\n")

for label, partition in (
    ("surge vs non-surge", surge_partition),
    ("airport vs non-airport", airport_partition({params.airport_zip})),
):
    c = compare(retained, partition, *label.split(" vs "))
    marker = "significant" if c.significant_at_05 else "not significant"
    print(f"{label}: mean {c.mean_a}% vs {c.mean_b}%, mode {c.mode_a}% vs {c.mode_b}% "
          f"(bin {c.bin_width} pp)")
    print(f"  {c.test_name}: p = {c.p_value:.3g} -> {marker}\n")

print("pay per mile by trip distance")
for b in rate_per_mile(retained, [0.1, 2, 5, 10, 20, 40, 80]):
    print(f"  {b.lo_miles:>5.1f}-{b.hi_miles:<5.1f} mi: "
          f"${b.mean_rate_usd_per_mile}/mi over {b.n_rides} rides")
