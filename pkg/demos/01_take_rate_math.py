#!/usr/bin/env python3
# Take-rate math on a handful of rides: the formula, undefined cases,
# cleaning, and why mean-of-ratios and ratio-of-means are both reported.

from datetime import datetime, timedelta, timezone

from fareaudit.analytics.cleaning import clean
from fareaudit.analytics.summaries import summarize_group
from fareaudit.domain import (
    ActivityStatus,
    ActivityType,
    RideActivity,
    compute_take_rate,
    with_source_digest,
)

print("== The formula ==")
print("fees / (rider price - tips) * 100, to 0.01 pp\n")

for fees, price, tips in [(7.44, 24.71, 0.00), (10.00, 10.00, 0.00),
                          (0.00, 20.00, 5.00), (-2.00, 18.00, 2.00)]:
    rate = compute_take_rate(fees, price, tips)
    print(f"fees={fees:>6.2f}  price={price:>6.2f}  tips={tips:>5.2f}  ->  {rate}%")

print("\nA denominator <= 0 is undefined, not zero:")
print("fees=5.00, price=5.00, tips=5.00 ->", compute_take_rate(5, 5, 5))


def ride(activity_id, *, price_c, fees_c, tips_c=0, kind=ActivityType.RIDESHARE,
         status=ActivityStatus.COMPLETED, missing_tips=False):
    start = datetime(2023, 4, 3, 9, 0, tzinfo=timezone.utc)
    return with_source_digest(RideActivity(
        activity_id=activity_id,
        driver_id="drv-demo",
        activity_type=kind,
        status=status,
        start_time=start,
        end_time=start + timedelta(minutes=18),
        distance_miles=6.4,
        duration_minutes=18.0,
        start_zip="80203",
        end_zip="80205",
        rider_price=price_c,
        platform_fees=fees_c,
        base_pay=max(price_c - tips_c - fees_c, 0),
        tips=None if missing_tips else tips_c,
        bonus=0,
        surge_flag=False,
    ))


print("\n== Cleaning a messy batch ==")
batch = [
    ride("r1", price_c=2471, fees_c=744, tips_c=282),     # keep
    ride("r2", price_c=4000, fees_c=1400),                # keep
    ride("r3", price_c=1200, fees_c=500),                 # keep
    ride("r4", price_c=1800, fees_c=-150),                # negative fee: drop
    ride("r5", price_c=900, fees_c=200, kind=ActivityType.DELIVERY),   # drop
    ride("r6", price_c=0, fees_c=0, status=ActivityStatus.CANCELLED),  # drop
    ride("r7", price_c=1500, fees_c=400, missing_tips=True),           # drop
]
retained, report = clean(batch)
print(f"input {report.input_count}, retained {report.retained_count}")
for reason, count in report.excluded.items():
    print(f"  excluded {reason}: {count}")

print("\n== Two take-rate aggregations ==")
summary = summarize_group(retained)
print(f"mean of per-ride rates:           {summary.take_rate_mean_of_ratios}%")
print(f"total fees over total net fares:  {summary.take_rate_ratio_of_means}%")
print("They differ whenever fares vary, so the pipeline always emits both.")
