"""Exact money handling.

All monetary values are carried as integer cents so that sums and means
never accumulate floating point error. USD amounts cross process
boundaries (JSON, CSV) as plain decimal strings like "24.71".
"""

from __future__ import annotations

import math
from decimal import Decimal, InvalidOperation, ROUND_HALF_EVEN

Cents = int

_CENT = Decimal("0.01")


class MoneyError(ValueError):
    """Raised when a value cannot be interpreted as a finite USD amount."""


def parse_usd(value: str | int | float | Decimal) -> Cents:
    """Convert a USD amount to integer cents.

    Floats go through their shortest decimal repr, so 24.71 parses to
    2471 rather than picking up binary noise. NaN and infinities are
    contract violations, not data.
    """
    if isinstance(value, bool):
        raise MoneyError(f"not a USD amount: {value!r}")
    if isinstance(value, float):
        if not math.isfinite(value):
            raise MoneyError(f"non-finite USD amount: {value!r}")
        value = str(value)
    if isinstance(value, int):
        return value * 100
    try:
        dec = Decimal(value)
    except InvalidOperation as exc:
        raise MoneyError(f"not a USD amount: {value!r}") from exc
    if not dec.is_finite():
        raise MoneyError(f"non-finite USD amount: {value!r}")
    cents = dec.quantize(_CENT, rounding=ROUND_HALF_EVEN) * 100
    return int(cents)


def format_usd(cents: Cents) -> str:
    """Render integer cents as a canonical decimal string ("7.40", "-0.05")."""
    sign = "-" if cents < 0 else ""
    whole, frac = divmod(abs(cents), 100)
    return f"{sign}{whole}.{frac:02d}"


def usd(cents: Cents) -> Decimal:
    """Integer cents as an exact Decimal dollar amount."""
    return Decimal(cents) / 100


def mean_cents(values: list[Cents]) -> Decimal:
    """Mean of cent amounts in dollars, rounded to the cent."""
    if not values:
        raise ValueError("mean of empty list")
    total = Decimal(sum(values))
    return (total / (100 * len(values))).quantize(_CENT, rounding=ROUND_HALF_EVEN)
