"""Crowdsourced rideshare pay auditing platform.

Library layout:

- ``domain``: trip data model and take-rate/classification math
- ``provider``: deterministic synthetic payroll-data provider (API + webhooks)
- ``ingestion``: webhook handling, backfill and the sync state machine
- ``datastore``: isolated PII store, row-level access, hard deletion
- ``analytics``: cleaning, aggregation, comparisons, reproducible pipeline
- ``survey``: single-use tokenized survey links and personal summaries
- ``report``: organizer-facing report documents (JSON/HTML/CSV)
- ``api``: the HTTP service tying it together
- ``cli``: seed / serve / sync / pipeline run / report build
"""

__version__ = "0.1.0"

from .domain import (
    ActivityStatus,
    ActivityType,
    RideActivity,
    classify_airport,
    compute_take_rate,
    is_analyzable,
)

__all__ = [
    "ActivityStatus",
    "ActivityType",
    "RideActivity",
    "classify_airport",
    "compute_take_rate",
    "is_analyzable",
    "__version__",
]
