"""Deterministic synthetic driver histories.

Every generated field is a pure function of (seed, params): the same
pair always yields byte-identical records. Completed rideshare records
satisfy the accounting identity

    rider_price - tips == base_pay + platform_fees   (integer cents)

exactly, which gives downstream take-rate math a closed-form oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta, timezone
from typing import Any

import numpy as np

from ..domain import (
    ActivityStatus,
    ActivityType,
    RideActivity,
    with_source_digest,
)
from .fees import FeeModel, FeeModelError, default_fee_model, utc_date

CITY_ZIPS = ("80202", "80203", "80204", "80205", "80210", "80211", "80218")


@dataclass(frozen=True)
class GeneratorParams:
    n_rides: int
    date_span: tuple[datetime, datetime]
    surge_probability: float = 0.13
    airport_probability: float = 0.12
    delivery_probability: float = 0.06
    cancel_probability: float = 0.04
    fee_model: FeeModel = field(default_factory=default_fee_model)
    airport_zip: str = "80249"

    def __post_init__(self) -> None:
        if self.n_rides < 0:
            raise ValueError("n_rides must be >= 0")
        start, end = self.date_span
        if start.tzinfo is None:
            start = start.replace(tzinfo=timezone.utc)
        if end.tzinfo is None:
            end = end.replace(tzinfo=timezone.utc)
        object.__setattr__(self, "date_span", (start, end))
        if not start < end:
            raise ValueError("date_span must be non-empty")
        for name in (
            "surge_probability",
            "airport_probability",
            "delivery_probability",
            "cancel_probability",
        ):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if not self.fee_model.covers(utc_date(start), utc_date(end)):
            raise FeeModelError("fee_model does not cover date_span")

    def to_json_dict(self) -> dict[str, Any]:
        start, end = self.date_span
        d: dict[str, Any] = {
            "n_rides": self.n_rides,
            "date_start": start.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "date_end": end.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "surge_probability": self.surge_probability,
            "airport_probability": self.airport_probability,
            "delivery_probability": self.delivery_probability,
            "cancel_probability": self.cancel_probability,
            "airport_zip": self.airport_zip,
        }
        cutover = next((e.start for e in self.fee_model.eras if e.variable), None)
        if cutover is not None:
            d["era_cutover"] = cutover.isoformat()
        return d

    @classmethod
    def from_json_dict(cls, raw: dict[str, Any]) -> "GeneratorParams":
        from ..domain import parse_utc

        cutover = raw.get("era_cutover")
        fee_model = (
            default_fee_model(date.fromisoformat(cutover)) if cutover else default_fee_model()
        )
        return cls(
            n_rides=int(raw["n_rides"]),
            date_span=(parse_utc(raw["date_start"]), parse_utc(raw["date_end"])),
            surge_probability=float(raw.get("surge_probability", 0.13)),
            airport_probability=float(raw.get("airport_probability", 0.12)),
            delivery_probability=float(raw.get("delivery_probability", 0.06)),
            cancel_probability=float(raw.get("cancel_probability", 0.04)),
            fee_model=fee_model,
            airport_zip=raw.get("airport_zip", "80249"),
        )


def _cents(dollars: float) -> int:
    return int(round(dollars * 100))


def generate_history(
    account_id: str, driver_ref: str, params: GeneratorParams, seed: int
) -> list[RideActivity]:
    """Materialize the full activity history for one account."""
    rng = np.random.default_rng(seed)
    start, end = params.date_span
    span_seconds = (end - start).total_seconds()

    offsets = np.sort(rng.uniform(0.0, span_seconds, size=params.n_rides))
    activities: list[RideActivity] = []
    for i in range(params.n_rides):
        started = start + timedelta(seconds=float(offsets[i]))
        started = started.replace(microsecond=0)
        is_delivery = rng.random() < params.delivery_probability
        is_cancelled = rng.random() < params.cancel_probability
        is_surge = rng.random() < params.surge_probability
        is_airport = rng.random() < params.airport_probability

        # Airport runs skew long (they dominate the distance tail).
        median_miles = 14.0 if is_airport else 6.0
        distance = float(np.round(rng.lognormal(math.log(median_miles), 0.65), 2))
        distance = max(distance, 0.3)
        speed_mph = float(np.clip(rng.normal(21.0, 4.0), 8.0, 45.0))
        duration = round(distance / speed_mph * 60.0, 2)
        ended = started + timedelta(minutes=duration)

        zips = [str(z) for z in rng.choice(CITY_ZIPS, size=2)]
        if is_airport:
            if rng.random() < 0.5:
                zips[0] = params.airport_zip
            else:
                zips[1] = params.airport_zip

        # Net fare = rider_price - tips; fees and base pay partition it.
        base_fare = 2.50 + 1.10 * distance + 0.35 * duration
        fare_noise = float(np.clip(rng.normal(1.0, 0.08), 0.7, 1.3))
        net_fare = base_fare * fare_noise
        if is_surge:
            net_fare *= float(rng.uniform(1.2, 2.0))
        net_cents = max(_cents(net_fare), 100)

        era = params.fee_model.era_at(utc_date(started))
        noise = float(rng.normal(0.0, 1.0))  # drawn every ride to keep the stream aligned
        if era.variable:
            mean = era.mean_at(utc_date(started))
            # recenter so premiums do not shift the era-wide mean
            rate = (
                mean
                - params.surge_probability * params.fee_model.surge_premium
                - params.airport_probability * params.fee_model.airport_premium
                + noise * era.dispersion
            )
            if is_surge:
                rate += params.fee_model.surge_premium
            if is_airport:
                rate += params.fee_model.airport_premium
        else:
            rate = era.mean_start
        rate = min(rate, 0.95)

        fees_cents = int(round(net_cents * rate))
        base_cents = net_cents - fees_cents

        tips_cents = 0
        if rng.random() < 0.45:
            tips_cents = _cents(float(rng.lognormal(math.log(3.2), 0.6)))
        bonus_cents = 0
        if rng.random() < 0.08:
            bonus_cents = _cents(float(rng.uniform(1.0, 8.0)))

        if is_cancelled:
            # cancelled before completion: no payout, token distance
            net_cents = fees_cents = base_cents = tips_cents = bonus_cents = 0
            distance = 0.0
            duration = round(float(rng.uniform(0.5, 4.0)), 2)
            ended = started + timedelta(minutes=duration)

        activity = RideActivity(
            activity_id=f"{account_id}-a{i:06d}",
            driver_id=driver_ref,
            activity_type=ActivityType.DELIVERY if is_delivery else ActivityType.RIDESHARE,
            status=ActivityStatus.CANCELLED if is_cancelled else ActivityStatus.COMPLETED,
            start_time=started,
            end_time=ended,
            distance_miles=distance,
            duration_minutes=duration,
            start_zip=zips[0],
            end_zip=zips[1],
            rider_price=net_cents + tips_cents,
            platform_fees=fees_cents,
            base_pay=base_cents,
            tips=tips_cents,
            bonus=bonus_cents,
            surge_flag=is_surge,
        )
        activities.append(with_source_digest(activity))
    return activities


def bind_driver(activity: RideActivity, driver_id: str) -> RideActivity:
    """Stamp the consuming platform's opaque driver id onto a record.

    The source payload digest stays untouched: it is the content hash of
    the raw provider record, and upsert conflict detection relies on it.
    """
    return replace(activity, driver_id=driver_id)
