from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from fareaudit.datastore import ConsentRecord, Datastore
from fareaudit.domain import ActivityStatus, ActivityType, RideActivity, with_source_digest

WEBHOOK_SECRET = "test-webhook-secret"


@pytest.fixture
def store():
    s = Datastore(None)
    yield s
    s.close()


def make_activity(
    activity_id: str = "act-1",
    driver_id: str = "drv-1",
    activity_type: ActivityType = ActivityType.RIDESHARE,
    status: ActivityStatus = ActivityStatus.COMPLETED,
    start: str = "2022-03-05T10:00:00Z",
    duration_minutes: float = 18.0,
    distance_miles: float = 6.2,
    start_zip: str | None = "80203",
    end_zip: str | None = "80205",
    rider_price: int | None = 2471,
    platform_fees: int | None = 744,
    base_pay: int | None = 1445,
    tips: int | None = 282,
    bonus: int | None = 0,
    surge_flag: bool = False,
) -> RideActivity:
    """Hand-built activity; defaults satisfy the accounting identity."""
    started = datetime.fromisoformat(start.replace("Z", "+00:00"))
    return with_source_digest(
        RideActivity(
            activity_id=activity_id,
            driver_id=driver_id,
            activity_type=activity_type,
            status=status,
            start_time=started,
            end_time=started + timedelta(minutes=duration_minutes),
            distance_miles=distance_miles,
            duration_minutes=duration_minutes,
            start_zip=start_zip,
            end_zip=end_zip,
            rider_price=rider_price,
            platform_fees=platform_fees,
            base_pay=base_pay,
            tips=tips,
            bonus=bonus,
            surge_flag=surge_flag,
        )
    )


def consent_now() -> ConsentRecord:
    return ConsentRecord(True, "v1", datetime.now(timezone.utc))


def enroll(store: Datastore, name: str = "Test Driver", affiliation_id: str | None = None):
    return store.enroll_driver(name, "+13035550100", consent_now(), affiliation_id)
