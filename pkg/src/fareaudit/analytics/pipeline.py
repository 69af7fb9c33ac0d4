"""Reproducible end-to-end analysis runs.

A run consumes an immutable snapshot of the analytics store plus a
filter, and produces an artifact bundle: cleaning report, grouped
summaries, weekly series, airport/surge comparisons, survey perception
comparison and the pay-per-mile series. The bundle digest is a pure
function of (snapshot content, filter, pipeline version, analysis
config); rerunning with unchanged inputs is a cache hit that returns
the previously written bundle byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

from ..datastore import AccessToken, Datastore, NotFound
from ..domain import (
    RideActivity,
    classify_airport,
    canonical_json,
    format_utc,
    payload_digest,
)
from .cleaning import CleaningReport, clean
from .summaries import (
    AggregateSummary,
    ComparisonResult,
    PerceptionComparison,
    airport_partition,
    compare,
    perception_vs_actual,
    rate_per_mile,
    summarize,
    summarize_group,
    surge_partition,
    weekly_series,
)

logger = logging.getLogger(__name__)

PIPELINE_VERSION = "1.0"
DEFAULT_AIRPORT_ZIPS = ("80249",)
DEFAULT_RATE_BINS = (0.1, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0)
DEFAULT_BIN_WIDTH = 0.5

VALID_CATEGORIES = ("airport", "surge")


class FilterError(ValueError):
    pass


@dataclass(frozen=True)
class FilterSpec:
    affiliation_ids: tuple[str, ...] | None = None
    date_from: datetime | None = None
    date_to: datetime | None = None
    categories: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.date_from is not None and self.date_to is not None:
            if self.date_from > self.date_to:
                raise FilterError("date range: from must be <= to")
        if self.categories is not None:
            bad = [c for c in self.categories if c not in VALID_CATEGORIES]
            if bad:
                raise FilterError(f"unknown categories: {bad}")
            object.__setattr__(self, "categories", tuple(sorted(set(self.categories))))
        if self.affiliation_ids is not None:
            object.__setattr__(self, "affiliation_ids", tuple(sorted(set(self.affiliation_ids))))

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "affiliation_ids": None
            if self.affiliation_ids is None
            else list(self.affiliation_ids),
            "date_from": None if self.date_from is None else format_utc(self.date_from),
            "date_to": None if self.date_to is None else format_utc(self.date_to),
            "categories": None if self.categories is None else list(self.categories),
        }

    @classmethod
    def from_json_dict(
        cls, raw: dict[str, Any], known_affiliations: Iterable[str] | None = None
    ) -> "FilterSpec":
        from ..domain import parse_utc

        affiliation_ids = raw.get("affiliation_ids")
        if affiliation_ids is not None:
            affiliation_ids = tuple(affiliation_ids)
            if known_affiliations is not None:
                unknown = set(affiliation_ids) - set(known_affiliations)
                if unknown:
                    raise FilterError(f"unknown affiliation ids: {sorted(unknown)}")
        date_from = raw.get("date_from")
        date_to = raw.get("date_to")
        categories = raw.get("categories")
        return cls(
            affiliation_ids=affiliation_ids,
            date_from=None if date_from is None else parse_utc(date_from),
            date_to=None if date_to is None else parse_utc(date_to),
            categories=None if categories is None else tuple(categories),
        )


@dataclass(frozen=True)
class Snapshot:
    """Frozen view of the analytics store taken before a pipeline run."""

    snapshot_id: str
    activities: tuple[RideActivity, ...]
    responses: tuple[dict[str, Any], ...]
    driver_affiliations: dict[str, str | None]
    affiliation_regions: dict[str, str | None]

    def content_digest(self) -> str:
        doc = {
            "activities": sorted(
                (a.to_json_dict() for a in self.activities), key=lambda d: d["activity_id"]
            ),
            "responses": sorted(
                (
                    {
                        "driver_id": r["driver_id"],
                        "estimated_take_rate_pct": r["estimated_take_rate_pct"],
                        "fair_take_rate_pct": r["fair_take_rate_pct"],
                        "factors_text": r["factors_text"],
                    }
                    for r in self.responses
                ),
                key=lambda d: d["driver_id"],
            ),
            "driver_affiliations": dict(sorted(self.driver_affiliations.items())),
            "affiliation_regions": dict(sorted(self.affiliation_regions.items())),
        }
        return payload_digest(doc)


def snapshot_from_store(store: Datastore, snapshot_id: str = "current") -> Snapshot:
    activities = store.get_activities(AccessToken.admin())
    affiliations = {a.affiliation_id: a.region_tag for a in store.list_affiliations()}
    driver_affiliations = {
        d: store.driver_affiliation(d) for d in {a.driver_id for a in activities}
    }
    return Snapshot(
        snapshot_id=snapshot_id,
        activities=tuple(activities),
        responses=tuple(store.all_responses()),
        driver_affiliations=driver_affiliations,
        affiliation_regions=affiliations,
    )


@dataclass
class ArtifactBundle:
    digest: str
    cache_hit: bool
    data: dict[str, Any]
    path: Path | None = None

    @property
    def manifest(self) -> dict[str, Any]:
        return self.data["manifest"]


def _apply_filter(
    snapshot: Snapshot, spec: FilterSpec, airport_zips: Sequence[str]
) -> list[RideActivity]:
    out = []
    for a in snapshot.activities:
        if spec.affiliation_ids is not None:
            aff = snapshot.driver_affiliations.get(a.driver_id)
            if aff not in spec.affiliation_ids:
                continue
        if spec.date_from is not None or spec.date_to is not None:
            if a.start_time is None:
                continue
            if spec.date_from is not None and a.start_time < spec.date_from:
                continue
            if spec.date_to is not None and a.start_time > spec.date_to:
                continue
        if spec.categories is not None:
            if "airport" in spec.categories and not classify_airport(a, airport_zips):
                continue
            if "surge" in spec.categories and not a.surge_flag:
                continue
        out.append(a)
    return out


def _region_key(snapshot: Snapshot):
    def key(r) -> str:
        aff = snapshot.driver_affiliations.get(r.activity.driver_id)
        region = snapshot.affiliation_regions.get(aff) if aff else None
        return f"region:{region}" if region else "region:unaffiliated"

    return key


def run_pipeline(
    snapshot: Snapshot,
    filter_spec: FilterSpec | None = None,
    out_dir: str | Path | None = None,
    airport_zips: Sequence[str] = DEFAULT_AIRPORT_ZIPS,
    bin_width: float = DEFAULT_BIN_WIDTH,
    rate_bins: Sequence[float] = DEFAULT_RATE_BINS,
) -> ArtifactBundle:
    """Run the full analysis, writing (or reusing) a content-addressed bundle."""
    spec = filter_spec or FilterSpec()
    config = {
        "airport_zips": sorted(airport_zips),
        "bin_width": bin_width,
        "rate_bins": list(rate_bins),
    }
    digest = payload_digest(
        {
            "snapshot": snapshot.content_digest(),
            "filter": spec.to_json_dict(),
            "pipeline_version": PIPELINE_VERSION,
            "config": config,
        }
    )

    if out_dir is not None:
        bundle_dir = Path(out_dir) / digest
        manifest_path = bundle_dir / "manifest.json"
        if manifest_path.exists():
            data = load_bundle(bundle_dir)
            logger.info("pipeline cache hit for digest %s", digest)
            return ArtifactBundle(digest=digest, cache_hit=True, data=data, path=bundle_dir)

    filtered = _apply_filter(snapshot, spec, airport_zips)
    retained, report = clean(filtered)

    summaries: dict[str, AggregateSummary] = {}
    if retained:
        summaries.update(summarize(retained))
        is_airport = airport_partition(airport_zips)
        summaries.update(
            summarize(retained, lambda r: "airport" if is_airport(r) else "non_airport")
        )
        summaries.update(
            summarize(retained, lambda r: "surge" if surge_partition(r) else "non_surge")
        )
        summaries.update(summarize(retained, _region_key(snapshot)))

    comparisons: dict[str, ComparisonResult] = {}
    if retained:
        comparisons["airport"] = compare(
            retained, airport_partition(airport_zips), "airport", "non_airport", bin_width
        )
        comparisons["surge"] = compare(
            retained, surge_partition, "surge", "non_surge", bin_width
        )

    perception = perception_vs_actual(snapshot.responses, retained)
    series = weekly_series(retained)
    rate_series = rate_per_mile(retained, rate_bins) if retained else []

    manifest = {
        "digest": digest,
        "snapshot_id": snapshot.snapshot_id,
        "snapshot_digest": snapshot.content_digest(),
        "filter": spec.to_json_dict(),
        "pipeline_version": PIPELINE_VERSION,
        "config": config,
        "weekly_weighting": "per_ride",
        "created_at": format_utc(datetime.now(timezone.utc)),
        "sections": [
            "cleaning_report",
            "summaries",
            "weekly_series",
            "comparisons",
            "perception",
            "rate_per_mile",
        ],
    }
    data: dict[str, Any] = {
        "manifest": manifest,
        "cleaning_report": report.to_json_dict(),
        "summaries": {k: v.to_json_dict() for k, v in summaries.items()},
        "weekly_series": [p.to_json_dict() for p in series],
        "comparisons": {k: v.to_json_dict(include_values=True) for k, v in comparisons.items()},
        "perception": perception.to_json_dict(),
        "rate_per_mile": [b.to_json_dict() for b in rate_series],
    }

    bundle = ArtifactBundle(digest=digest, cache_hit=False, data=data)
    if out_dir is not None:
        bundle.path = write_bundle(data, Path(out_dir) / digest)
    return bundle


def write_bundle(data: dict[str, Any], bundle_dir: Path) -> Path:
    bundle_dir.mkdir(parents=True, exist_ok=True)
    for section, payload in data.items():
        (bundle_dir / f"{section}.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    csv_dir = bundle_dir / "csv"
    csv_dir.mkdir(exist_ok=True)
    (csv_dir / "summary.csv").write_text(summary_csv(data["summaries"]), encoding="utf-8")
    return bundle_dir


def load_bundle(bundle_dir: str | Path) -> dict[str, Any]:
    bundle_dir = Path(bundle_dir)
    if not (bundle_dir / "manifest.json").exists():
        raise NotFound(f"no bundle at {bundle_dir}")
    data = {}
    for path in bundle_dir.glob("*.json"):
        data[path.stem] = json.loads(path.read_text(encoding="utf-8"))
    return data


# Column vocabulary mirrors the organizer-facing summary table.
SUMMARY_CSV_COLUMNS = [
    "Type",
    "Drivers",
    "Rides",
    "Distance (miles)",
    "Duration (minutes)",
    "Ride Price ($)",
    "Fees ($)",
    "Base Pay ($)",
    "Tips ($)",
    "Take Rate (Average) (%)",
    "Take Rate (Ratio of Means) (%)",
]


def summary_csv(summaries: dict[str, Any]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_CSV_COLUMNS)
    for group in sorted(summaries):
        s = summaries[group]
        if isinstance(s, AggregateSummary):
            s = s.to_json_dict()
        writer.writerow(
            [
                s["group"],
                s["n_drivers"],
                s["n_rides"],
                s["distance_miles_mean"],
                s["duration_minutes_mean"],
                s["rider_price_mean_usd"],
                s["fees_mean_usd"],
                s["base_pay_mean_usd"],
                s["tips_mean_usd"],
                s["take_rate_mean_of_ratios_pct"],
                s["take_rate_ratio_of_means_pct"],
            ]
        )
    return buf.getvalue()
