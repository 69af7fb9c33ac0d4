"""Shared hand-built fixtures for pipeline and acceptance tests."""

from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone

from fareaudit.domain import ActivityStatus, ActivityType, RideActivity, with_source_digest

from .conftest import make_activity


def ride_with_rate(
    activity_id: str,
    driver_id: str,
    take_rate_pct: float,
    start: str = "2022-03-05T10:00:00Z",
    tips: int = 0,
    surge: bool = False,
    start_zip: str = "80203",
    end_zip: str = "80205",
    distance: float = 6.0,
) -> RideActivity:
    """A completed rideshare ride with an exact 2-decimal take rate.

    Net fare is fixed at $100.00 so fees = rate * 100 cents exactly.
    """
    fees = int(round(take_rate_pct * 100))
    net = 10_000
    return make_activity(
        activity_id=activity_id,
        driver_id=driver_id,
        start=start,
        distance_miles=distance,
        rider_price=net + tips,
        platform_fees=fees,
        base_pay=net - fees,
        tips=tips,
        surge_flag=surge,
        start_zip=start_zip,
        end_zip=end_zip,
    )


def defect_fixture() -> list[RideActivity]:
    """100 rows with disjoint defects: 12 negative-fee, 8 delivery,
    5 cancelled, 3 missing a monetary field, 72 clean."""
    rows: list[RideActivity] = []
    i = 0
    for _ in range(72):
        rows.append(ride_with_rate(f"ok-{i:03d}", "drv-fixture", 28.5, start=f"2022-03-{(i % 27) + 1:02d}T09:00:00Z"))
        i += 1
    for j in range(12):
        rows.append(
            make_activity(
                activity_id=f"neg-{j:02d}",
                driver_id="drv-fixture",
                rider_price=2000,
                platform_fees=-150,
                base_pay=2150,
                tips=0,
            )
        )
    for j in range(8):
        rows.append(
            make_activity(
                activity_id=f"del-{j:02d}",
                driver_id="drv-fixture",
                activity_type=ActivityType.DELIVERY,
            )
        )
    for j in range(5):
        rows.append(
            make_activity(
                activity_id=f"can-{j:02d}",
                driver_id="drv-fixture",
                status=ActivityStatus.CANCELLED,
            )
        )
    for j in range(3):
        rows.append(
            make_activity(activity_id=f"mis-{j:02d}", driver_id="drv-fixture", tips=None)
        )
    return rows


def random_activity(rnd: random.Random, idx: int) -> RideActivity:
    """Randomized record that may carry any defect class."""
    activity_type = rnd.choice(
        [ActivityType.RIDESHARE] * 6 + [ActivityType.DELIVERY, ActivityType.OTHER]
    )
    status = rnd.choice([ActivityStatus.COMPLETED] * 5 + [ActivityStatus.CANCELLED])
    started = datetime(2021, 1, 1, tzinfo=timezone.utc) + timedelta(
        minutes=rnd.randrange(0, 60 * 24 * 700)
    )
    duration = rnd.uniform(3, 60)
    price = rnd.randrange(300, 9000)
    tips = rnd.choice([0, 0, 0, rnd.randrange(0, 1500)])
    fees = rnd.randrange(-price // 2, price)
    base = price - tips - fees  # identity; may go missing below

    def maybe(value):
        return None if rnd.random() < 0.08 else value

    return with_source_digest(
        RideActivity(
            activity_id=f"rand-{idx:05d}",
            driver_id=f"drv-{rnd.randrange(1, 6)}",
            activity_type=activity_type,
            status=status,
            start_time=started,
            end_time=started + timedelta(minutes=duration),
            distance_miles=maybe(round(rnd.uniform(0.5, 30), 2)),
            duration_minutes=maybe(round(duration, 2)),
            start_zip=rnd.choice(["80249", "80202", None]),
            end_zip=rnd.choice(["80249", "80205", None]),
            rider_price=maybe(price),
            platform_fees=maybe(fees),
            base_pay=maybe(max(base, 0)),
            tips=maybe(tips),
            bonus=0,
            surge_flag=rnd.random() < 0.2,
        )
    )
