#!/usr/bin/env python3
# The whole platform in one process: enrollment with consent, account
# linking, webhook-driven ingestion, the one-time survey, hard deletion,
# and a reproducible pipeline run rendered into an organizer report.
#
# Writes everything under ./demo-output/.

import json
import re
import shutil
from pathlib import Path

from fastapi.testclient import TestClient

from fareaudit.api import AppConfig, Platform, create_app
from fareaudit.report import write_report
from fareaudit.survey import MemorySmsAdapter

OUT = Path("demo-output")
if OUT.exists():
    shutil.rmtree(OUT)

config = AppConfig(
    admin_key="demo-admin-key",
    webhook_secret="demo-webhook-secret",
    data_dir=str(OUT / "data"),
    background_backfill=False,  # keep the walkthrough strictly ordered
    background_reports=False,
)
sms = MemorySmsAdapter()
platform = Platform.build(config=config, sms=sms)
client = TestClient(create_app(platform))
admin = {"Authorization": "Bearer demo-admin-key"}

print("== enroll three drivers (affiliation + consent) ==")
drivers = []
for i in range(3):
    resp = client.post("/drivers", json={
        "display_name": f"Driver {i + 1}",
        "phone": f"+1303555120{i}",
        "affiliation_name": "Drivers United Demo",
        "region_tag": "CO",
        "consent": {"consented": True, "consent_version": "v1"},
    })
    info = resp.json()
    drivers.append(info)
    print(f"  {info['driver_id']} enrolled")

print("\n== link provider accounts and backfill ==")
for i, info in enumerate(drivers):
    resp = client.post(
        f"/drivers/{info['driver_id']}/link",
        json={"seed": 40 + i, "params": {
            "n_rides": 150,
            "date_start": "2019-01-01T00:00:00Z",
            "date_end": "2024-06-30T00:00:00Z",
        }},
        headers={"Authorization": f"Bearer {info['token']}"},
    )
    print(f"  {info['driver_id']}: {resp.json()['phase']}")

print("\n== survey invites went out over SMS ==")
for phone, body in sms.sent:
    print(f"  {phone}: {body[:72]}...")

print("\n== each driver completes the survey, then sees their summary ==")
for info, (phone, body) in zip(drivers, sms.sent):
    token = re.search(r"/survey/([0-9a-f]{32})", body).group(1)
    client.post(f"/survey/{token}", json={
        "estimated_take_rate_pct": 55,
        "fair_take_rate_pct": 21,
        "factors_text": "airport trips and surge",
    })
    summary = client.get(
        "/me/summary", headers={"Authorization": f"Bearer {info['token']}"}
    ).json()["summary"]
    print(f"  {info['driver_id']}: avg {summary['average_take_rate_pct']}%  "
          f"high {summary['highest_take_rate_pct']}%  "
          f"low {summary['lowest_take_rate_pct']}%  "
          f"({summary['n_rides']} rides)")

print("\n== one driver requests deletion; the purge is synchronous ==")
receipt = client.post(
    "/me/delete", headers={"Authorization": f"Bearer {drivers[2]['token']}"}
).json()
print(f"  removed: {receipt['removed']}")

print("\n== admin pulls filtered aggregates ==")
agg = client.get("/admin/aggregates", headers=admin).json()
allrow = agg["summaries"]["all"]
print(f"  pipeline digest {agg['digest'][:16]}...")
print(f"  {allrow['n_drivers']} drivers, {allrow['n_rides']} retained rides, "
      f"take rate {allrow['take_rate_ratio_of_means_pct']}% (ratio of means)")
for key, comp in agg["comparisons"].items():
    print(f"  {comp['label_a']} vs {comp['label_b']}: p = {comp['p_value']:.3g}, "
          f"significant: {comp['significant_at_05']}")

print("\n== build the organizer report ==")
build = client.post("/admin/reports", json={}, headers=admin).json()
report = client.get(f"/admin/reports/{build['report_id']}", headers=admin).json()["report"]
report_dir = write_report(
    {**agg, "manifest": {"digest": agg["digest"], "filter": {},
                         "created_at": report["generated_at"]}},
    OUT / "report",
)
print(f"  {build['report_id']}: {len(report['sections'])} sections")
for section in report["sections"]:
    flag = " (insufficient data)" if section["insufficient_data"] else ""
    print(f"    - {section['title']}{flag}")
print(f"  rendered to {report_dir}/report.html")
platform.store.close()
