from __future__ import annotations

import json
import random
from datetime import datetime, timezone
from decimal import Decimal

import pytest

from fareaudit.analytics.pipeline import (
    FilterError,
    FilterSpec,
    Snapshot,
    load_bundle,
    run_pipeline,
    snapshot_from_store,
    summary_csv,
)
from fareaudit.datastore import Datastore, NotFound

from .conftest import consent_now, make_activity
from .fixtures import random_activity, ride_with_rate
from .oracles import oracle_summary


def seeded_store(store: Datastore) -> dict[str, str]:
    union = store.ensure_affiliation("Union A", "CO")
    guild = store.ensure_affiliation("Guild B", "NY")
    d1 = store.enroll_driver("A", "+13035550100", consent_now(), union.affiliation_id, driver_id="drv-a")
    d2 = store.enroll_driver("B", "+13035550101", consent_now(), guild.affiliation_id, driver_id="drv-b")
    rows = []
    for i in range(12):
        rows.append(
            ride_with_rate(
                f"a-{i:02d}", d1.driver_id, 25.0 + i * 0.5,
                start=f"2022-{(i % 6) + 1:02d}-10T10:00:00Z",
                surge=i % 3 == 0,
                start_zip="80249" if i % 4 == 0 else "80202",
            )
        )
    for i in range(8):
        rows.append(
            ride_with_rate(
                f"b-{i:02d}", d2.driver_id, 31.0 + i * 0.25,
                start=f"2023-{(i % 6) + 1:02d}-15T10:00:00Z",
            )
        )
    store.put_activities(d1.driver_id, [r for r in rows if r.driver_id == d1.driver_id])
    store.put_activities(d2.driver_id, [r for r in rows if r.driver_id == d2.driver_id])
    return {"union": union.affiliation_id, "guild": guild.affiliation_id}


class TestFilterSpec:
    def test_from_after_to_rejected(self):
        with pytest.raises(FilterError):
            FilterSpec(
                date_from=datetime(2023, 1, 1, tzinfo=timezone.utc),
                date_to=datetime(2022, 1, 1, tzinfo=timezone.utc),
            )

    def test_unknown_affiliation_rejected_at_parse(self):
        with pytest.raises(FilterError):
            FilterSpec.from_json_dict(
                {"affiliation_ids": ["aff-ghost"]}, known_affiliations=["aff-real"]
            )

    def test_unknown_category_rejected(self):
        with pytest.raises(FilterError):
            FilterSpec(categories=("weekend",))

    def test_round_trip(self):
        spec = FilterSpec(
            affiliation_ids=("aff-2", "aff-1"),
            date_from=datetime(2022, 1, 1, tzinfo=timezone.utc),
            categories=("surge", "airport"),
        )
        again = FilterSpec.from_json_dict(spec.to_json_dict())
        assert again == spec
        assert again.categories == ("airport", "surge")  # canonical order


class TestPipelineRuns:
    def test_rerun_unchanged_is_cache_hit_same_digest(self, store, tmp_path):
        seeded_store(store)
        snapshot = snapshot_from_store(store)
        first = run_pipeline(snapshot, out_dir=tmp_path)
        second = run_pipeline(snapshot_from_store(store), out_dir=tmp_path)
        assert first.digest == second.digest
        assert first.cache_hit is False
        assert second.cache_hit is True
        assert second.data["summaries"] == first.data["summaries"]

    def test_editing_one_ride_changes_digest(self, store, tmp_path):
        ids = seeded_store(store)
        first = run_pipeline(snapshot_from_store(store), out_dir=tmp_path)
        edited = ride_with_rate("a-00", "drv-a", 25.0, start="2022-01-10T10:00:00Z",
                                tips=555, start_zip="80249")
        store.put_activities("drv-a", [edited])
        second = run_pipeline(snapshot_from_store(store), out_dir=tmp_path)
        assert second.digest != first.digest
        assert second.cache_hit is False

    def test_affiliation_filter_restricts_rows(self, store):
        ids = seeded_store(store)
        spec = FilterSpec(affiliation_ids=(ids["union"],))
        bundle = run_pipeline(snapshot_from_store(store), spec)
        allrow = bundle.data["summaries"]["all"]
        assert allrow["n_rides"] == 12
        assert allrow["n_drivers"] == 1
        report = bundle.data["cleaning_report"]
        assert report["input_count"] == 12

    def test_date_range_filter(self, store):
        seeded_store(store)
        spec = FilterSpec(
            date_from=datetime(2023, 1, 1, tzinfo=timezone.utc),
            date_to=datetime(2023, 12, 31, tzinfo=timezone.utc),
        )
        bundle = run_pipeline(snapshot_from_store(store), spec)
        assert bundle.data["summaries"]["all"]["n_rides"] == 8

    def test_category_filter_surge(self, store):
        seeded_store(store)
        bundle = run_pipeline(snapshot_from_store(store), FilterSpec(categories=("surge",)))
        assert bundle.data["summaries"]["all"]["n_rides"] == 4

    def test_region_groups_present(self, store):
        seeded_store(store)
        bundle = run_pipeline(snapshot_from_store(store))
        assert "region:CO" in bundle.data["summaries"]
        assert "region:NY" in bundle.data["summaries"]

    def test_permutation_invariance_of_digest(self, store):
        seeded_store(store)
        snapshot = snapshot_from_store(store)
        shuffled_activities = list(snapshot.activities)
        random.Random(5).shuffle(shuffled_activities)
        shuffled = Snapshot(
            snapshot_id=snapshot.snapshot_id,
            activities=tuple(shuffled_activities),
            responses=snapshot.responses,
            driver_affiliations=snapshot.driver_affiliations,
            affiliation_regions=snapshot.affiliation_regions,
        )
        b1 = run_pipeline(snapshot)
        b2 = run_pipeline(shuffled)
        assert b1.digest == b2.digest
        assert b1.data["summaries"] == b2.data["summaries"]
        assert b1.data["weekly_series"] == b2.data["weekly_series"]

    def test_bundle_directory_layout(self, store, tmp_path):
        seeded_store(store)
        bundle = run_pipeline(snapshot_from_store(store), out_dir=tmp_path)
        assert bundle.path is not None
        names = {p.name for p in bundle.path.iterdir()}
        for expected in (
            "manifest.json",
            "cleaning_report.json",
            "summaries.json",
            "weekly_series.json",
            "comparisons.json",
            "perception.json",
            "rate_per_mile.json",
            "csv",
        ):
            assert expected in names
        manifest = json.loads((bundle.path / "manifest.json").read_text())
        assert manifest["digest"] == bundle.digest
        assert manifest["weekly_weighting"] == "per_ride"
        loaded = load_bundle(bundle.path)
        assert loaded["summaries"] == bundle.data["summaries"]

    def test_load_bundle_missing_raises(self, tmp_path):
        with pytest.raises(NotFound):
            load_bundle(tmp_path / "nope")

    def test_summary_csv_vocabulary(self, store, tmp_path):
        seeded_store(store)
        bundle = run_pipeline(snapshot_from_store(store), out_dir=tmp_path)
        text = (bundle.path / "csv" / "summary.csv").read_text()
        header = text.splitlines()[0]
        for column in (
            "Drivers",
            "Rides",
            "Distance (miles)",
            "Duration (minutes)",
            "Ride Price ($)",
            "Fees ($)",
            "Base Pay ($)",
            "Tips ($)",
            "Take Rate (Average) (%)",
        ):
            assert column in header

    def test_empty_store_pipeline_runs(self, store):
        bundle = run_pipeline(snapshot_from_store(store))
        assert bundle.data["summaries"] == {}
        assert bundle.data["weekly_series"] == []
        assert bundle.data["cleaning_report"]["input_count"] == 0


class TestAggregationOracle:
    def test_small_snapshots_match_oracle(self):
        rnd = random.Random(31)
        for case in range(30):
            rows = [random_activity(rnd, i) for i in range(rnd.randrange(1, 21))]
            snapshot = Snapshot(
                snapshot_id=f"case-{case}",
                activities=tuple(rows),
                responses=(),
                driver_affiliations={},
                affiliation_regions={},
            )
            bundle = run_pipeline(snapshot)
            oracle = oracle_summary(rows)
            if oracle["n_rides"] == 0:
                assert "all" not in bundle.data["summaries"]
                continue
            s = bundle.data["summaries"]["all"]
            assert s["n_rides"] == oracle["n_rides"]
            assert s["n_drivers"] == oracle["n_drivers"]
            assert Decimal(s["rider_price_mean_usd"]) == oracle["rider_price_mean"]
            assert Decimal(s["fees_mean_usd"]) == oracle["fees_mean"]
            assert Decimal(s["base_pay_mean_usd"]) == oracle["base_pay_mean"]
            assert Decimal(s["tips_mean_usd"]) == oracle["tips_mean"]
            assert Decimal(str(s["take_rate_mean_of_ratios_pct"])) == oracle[
                "take_rate_mean_of_ratios"
            ]
            assert Decimal(str(s["take_rate_ratio_of_means_pct"])) == oracle[
                "take_rate_ratio_of_means"
            ]
