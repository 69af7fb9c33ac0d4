"""Cleaning, aggregation, comparison and pipeline orchestration."""

from .cleaning import EXCLUSION_ORDER, CleaningReport, RetainedRide, clean
from .pipeline import (
    ArtifactBundle,
    FilterError,
    FilterSpec,
    PIPELINE_VERSION,
    Snapshot,
    load_bundle,
    run_pipeline,
    snapshot_from_store,
    summary_csv,
)
from .stats import MannWhitneyResult, StatsError, mann_whitney_u, midranks, mode_estimate
from .summaries import (
    AggregateSummary,
    ComparisonResult,
    DistanceRateBin,
    PerceptionComparison,
    WeekPoint,
    airport_partition,
    compare,
    mean_of_ratios,
    perception_vs_actual,
    rate_per_mile,
    ratio_of_means,
    summarize,
    summarize_group,
    surge_partition,
    weekly_series,
)

__all__ = [
    "EXCLUSION_ORDER",
    "CleaningReport",
    "RetainedRide",
    "clean",
    "ArtifactBundle",
    "FilterError",
    "FilterSpec",
    "PIPELINE_VERSION",
    "Snapshot",
    "load_bundle",
    "run_pipeline",
    "snapshot_from_store",
    "summary_csv",
    "MannWhitneyResult",
    "StatsError",
    "mann_whitney_u",
    "midranks",
    "mode_estimate",
    "AggregateSummary",
    "ComparisonResult",
    "DistanceRateBin",
    "PerceptionComparison",
    "WeekPoint",
    "airport_partition",
    "compare",
    "mean_of_ratios",
    "perception_vs_actual",
    "rate_per_mile",
    "ratio_of_means",
    "summarize",
    "summarize_group",
    "surge_partition",
    "weekly_series",
]
