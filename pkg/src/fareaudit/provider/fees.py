"""Era-switching platform fee model for the synthetic data generator.

Models the industry shift from a flat commission to algorithmically
variable pricing: before the cutover every ride carries exactly the flat
commission; afterwards the take-rate fraction is drawn around an era
mean that can drift linearly across the era. Surge and airport premiums
only exist in variable-pricing eras and are mean-neutral (the base rate
is recentered so the era-wide average still matches the configured mean).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timezone


class FeeModelError(ValueError):
    pass


@dataclass(frozen=True)
class FeeEra:
    """One pricing regime: [start, end) with a linearly drifting mean."""

    start: date
    end: date
    mean_start: float  # take-rate fraction at era start
    mean_end: float  # take-rate fraction approached at era end
    dispersion: float  # std dev of the per-ride fraction
    variable: bool  # False = flat commission (no noise, no premiums)

    def mean_at(self, when: date) -> float:
        span = (self.end - self.start).days
        if span <= 0:
            return self.mean_start
        frac = (when - self.start).days / span
        return self.mean_start + (self.mean_end - self.mean_start) * min(max(frac, 0.0), 1.0)


@dataclass(frozen=True)
class FeeModel:
    eras: tuple[FeeEra, ...]
    surge_premium: float = 0.08  # extra take-rate fraction on surge rides
    airport_premium: float = 0.03  # extra take-rate fraction on airport rides

    def __post_init__(self) -> None:
        if not self.eras:
            raise FeeModelError("fee model needs at least one era")
        for prev, nxt in zip(self.eras, self.eras[1:]):
            if prev.end != nxt.start:
                raise FeeModelError("eras must be contiguous and ordered")

    def era_at(self, when: date | datetime) -> FeeEra:
        d = when.date() if isinstance(when, datetime) else when
        for era in self.eras:
            if era.start <= d < era.end:
                return era
        raise FeeModelError(f"fee model does not cover {d.isoformat()}")

    def covers(self, start: date, end: date) -> bool:
        return self.eras[0].start <= start and end <= self.eras[-1].end

    def high_fee_era(self) -> tuple[date, date] | None:
        """[start, end) of the era with the highest mean, if any is variable."""
        best: FeeEra | None = None
        for era in self.eras:
            peak = max(era.mean_start, era.mean_end)
            if best is None or peak > max(best.mean_start, best.mean_end):
                best = era
        if best is None:
            return None
        return (best.start, best.end)


DEFAULT_CUTOVER = date(2022, 1, 1)


def default_fee_model(cutover: date = DEFAULT_CUTOVER) -> FeeModel:
    """Flat 25% commission, a one-year 33% peak from the cutover, easing
    to 24% by the start of 2024 and holding there."""
    peak_end = date(cutover.year + 1, cutover.month, cutover.day)
    ease_end = max(date(2024, 1, 1), peak_end)
    eras = [
        FeeEra(date(2015, 1, 1), cutover, 0.25, 0.25, 0.0, variable=False),
        FeeEra(cutover, peak_end, 0.33, 0.33, 0.08, variable=True),
    ]
    if ease_end > peak_end:
        eras.append(FeeEra(peak_end, ease_end, 0.33, 0.24, 0.08, variable=True))
    eras.append(FeeEra(ease_end, date(2035, 1, 1), 0.24, 0.24, 0.08, variable=True))
    return FeeModel(eras=tuple(eras))


def utc_date(dt: datetime) -> date:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).date()
