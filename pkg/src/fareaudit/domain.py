"""Canonical trip data model and the take-rate math.

Everything downstream (generator, ingestion, analytics, reports) speaks
in terms of `RideActivity` and the three pure functions here:
`compute_take_rate`, `classify_airport`, `is_analyzable`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from decimal import Decimal, ROUND_HALF_EVEN
from enum import Enum
from typing import Any, Iterable

from .money import Cents, MoneyError, format_usd, parse_usd

_PCT_PRECISION = Decimal("0.01")


class ActivityType(str, Enum):
    RIDESHARE = "rideshare"
    DELIVERY = "delivery"
    OTHER = "other"


class ActivityStatus(str, Enum):
    COMPLETED = "completed"
    CANCELLED = "cancelled"


class DomainError(ValueError):
    """A record or argument violates a domain invariant."""


def _utc(dt: datetime) -> datetime:
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def parse_utc(value: str) -> datetime:
    """Parse an ISO-8601 timestamp, normalizing to UTC."""
    return _utc(datetime.fromisoformat(value.replace("Z", "+00:00")))


def format_utc(dt: datetime) -> str:
    return _utc(dt).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True, slots=True)
class RideActivity:
    """One trip record with its full pay decomposition.

    Monetary fields are integer cents; `None` marks a value the provider
    did not supply (such records are stored but excluded from analysis).
    `rider_price` is the total consumer charge including tip, so the
    take-rate denominator is `rider_price - tips`.
    """

    activity_id: str
    driver_id: str
    activity_type: ActivityType
    status: ActivityStatus
    start_time: datetime | None
    end_time: datetime | None
    distance_miles: float | None
    duration_minutes: float | None
    start_zip: str | None
    end_zip: str | None
    rider_price: Cents | None
    platform_fees: Cents | None
    base_pay: Cents | None
    tips: Cents | None
    bonus: Cents | None
    surge_flag: bool
    source_payload_digest: str = ""

    def __post_init__(self) -> None:
        if not self.activity_id or not self.driver_id:
            raise DomainError("activity_id and driver_id are required")
        if self.start_time is not None:
            object.__setattr__(self, "start_time", _utc(self.start_time))
        if self.end_time is not None:
            object.__setattr__(self, "end_time", _utc(self.end_time))
        if (
            self.start_time is not None
            and self.end_time is not None
            and self.end_time < self.start_time
        ):
            raise DomainError(f"end_time before start_time on {self.activity_id}")
        for name in ("distance_miles", "duration_minutes"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise DomainError(f"negative {name} on {self.activity_id}")
        for name in ("base_pay", "tips", "bonus"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise DomainError(f"negative {name} on {self.activity_id}")
        for name in ("start_zip", "end_zip"):
            z = getattr(self, name)
            if z is not None and (len(z) != 5 or not z.isdigit()):
                raise DomainError(f"bad zip {z!r} on {self.activity_id}")

    def take_rate_pct(self) -> Decimal | None:
        """Per-ride take rate, or None when required amounts are missing."""
        if self.platform_fees is None or self.rider_price is None or self.tips is None:
            return None
        return take_rate_from_cents(self.platform_fees, self.rider_price, self.tips)

    def to_json_dict(self) -> dict[str, Any]:
        """Canonical JSON form (money as decimal strings, times as UTC Z)."""

        def money(c: Cents | None) -> str | None:
            return None if c is None else format_usd(c)

        return {
            "activity_id": self.activity_id,
            "driver_id": self.driver_id,
            "activity_type": self.activity_type.value,
            "status": self.status.value,
            "start_time": None if self.start_time is None else format_utc(self.start_time),
            "end_time": None if self.end_time is None else format_utc(self.end_time),
            "distance_miles": self.distance_miles,
            "duration_minutes": self.duration_minutes,
            "start_zip": self.start_zip,
            "end_zip": self.end_zip,
            "rider_price_usd": money(self.rider_price),
            "platform_fees_usd": money(self.platform_fees),
            "base_pay_usd": money(self.base_pay),
            "tips_usd": money(self.tips),
            "bonus_usd": money(self.bonus),
            "surge_flag": self.surge_flag,
            "source_payload_digest": self.source_payload_digest,
        }

    @classmethod
    def from_json_dict(cls, raw: dict[str, Any]) -> "RideActivity":
        def money(key: str) -> Cents | None:
            v = raw.get(key)
            if v is None:
                return None
            try:
                return parse_usd(v)
            except MoneyError as exc:
                raise DomainError(f"{key}: {exc}") from exc

        def ts(key: str) -> datetime | None:
            v = raw.get(key)
            if v is None:
                return None
            try:
                return parse_utc(v)
            except ValueError as exc:
                raise DomainError(f"{key}: {exc}") from exc

        try:
            activity_type = ActivityType(raw["activity_type"])
            status = ActivityStatus(raw["status"])
        except (KeyError, ValueError) as exc:
            raise DomainError(f"bad activity_type/status: {exc}") from exc
        return cls(
            activity_id=raw.get("activity_id", ""),
            driver_id=raw.get("driver_id", ""),
            activity_type=activity_type,
            status=status,
            start_time=ts("start_time"),
            end_time=ts("end_time"),
            distance_miles=raw.get("distance_miles"),
            duration_minutes=raw.get("duration_minutes"),
            start_zip=raw.get("start_zip"),
            end_zip=raw.get("end_zip"),
            rider_price=money("rider_price_usd"),
            platform_fees=money("platform_fees_usd"),
            base_pay=money("base_pay_usd"),
            tips=money("tips_usd"),
            bonus=money("bonus_usd"),
            surge_flag=bool(raw.get("surge_flag", False)),
            source_payload_digest=raw.get("source_payload_digest", ""),
        )


@dataclass(frozen=True, slots=True)
class TakeRateRecord:
    """Take rate attached to a retained ride; None means undefined."""

    activity_id: str
    take_rate_pct: Decimal | None


@dataclass(frozen=True, slots=True)
class RideCategory:
    airport: bool
    surge: bool


# Fields that must be present for a record to enter analysis.
REQUIRED_ANALYSIS_FIELDS = (
    "start_time",
    "end_time",
    "distance_miles",
    "duration_minutes",
    "rider_price",
    "platform_fees",
    "base_pay",
    "tips",
)


def missing_required_fields(activity: RideActivity) -> list[str]:
    return [f for f in REQUIRED_ANALYSIS_FIELDS if getattr(activity, f) is None]


def take_rate_from_cents(
    fees: Cents, rider_price: Cents, tips: Cents
) -> Decimal | None:
    """Take rate in percent from integer-cent amounts.

    fees / (rider_price - tips) * 100, quantized to 0.01 percentage
    points. Undefined (None) when the denominator is not positive; that
    is a value the cleaning stage counts, not a fault.
    """
    denom = rider_price - tips
    if denom <= 0:
        return None
    pct = (Decimal(fees) * 100) / Decimal(denom)
    return pct.quantize(_PCT_PRECISION, rounding=ROUND_HALF_EVEN)


def compute_take_rate(
    fees: str | int | float | Decimal,
    rider_price: str | int | float | Decimal,
    tips: str | int | float | Decimal,
) -> Decimal | None:
    """Take rate in percent from USD amounts (see `take_rate_from_cents`)."""
    return take_rate_from_cents(parse_usd(fees), parse_usd(rider_price), parse_usd(tips))


def classify_airport(activity: RideActivity, airport_zips: Iterable[str]) -> bool:
    """True iff the ride starts or ends in a configured airport zip.

    Missing endpoints never match, so incomplete records classify False.
    """
    zips = set(airport_zips)
    if not zips:
        raise DomainError("airport_zips must be non-empty")
    return (activity.start_zip in zips) or (activity.end_zip in zips)


def is_analyzable(activity: RideActivity) -> bool:
    """Completed rideshare record with every analysis field present."""
    return (
        activity.activity_type is ActivityType.RIDESHARE
        and activity.status is ActivityStatus.COMPLETED
        and not missing_required_fields(activity)
    )


def canonical_json(payload: Any) -> str:
    """Stable serialization used for digests and idempotency checks."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def payload_digest(payload: Any) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def activity_digest(activity: RideActivity) -> str:
    d = activity.to_json_dict()
    d.pop("source_payload_digest", None)
    return payload_digest(d)


def with_source_digest(activity: RideActivity) -> RideActivity:
    """Return the activity with its content digest filled in."""
    digest = activity_digest(activity)
    kwargs = {f.name: getattr(activity, f.name) for f in fields(activity)}
    kwargs["source_payload_digest"] = digest
    return RideActivity(**kwargs)
