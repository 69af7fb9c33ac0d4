from __future__ import annotations

import re
import time

import pytest
from fastapi.testclient import TestClient

from fareaudit.api import AppConfig, Platform, create_app
from fareaudit.datastore import Datastore
from fareaudit.survey import MemorySmsAdapter

ADMIN_KEY = "test-admin-key"

LINK_PARAMS = {
    "n_rides": 25,
    "date_start": "2022-02-01T00:00:00Z",
    "date_end": "2022-11-30T00:00:00Z",
    "cancel_probability": 0.0,
    "delivery_probability": 0.0,
}


def build_client(tmp_path=None, **config_overrides):
    settings = dict(
        admin_key=ADMIN_KEY,
        webhook_secret="api-secret",
        base_url="http://testserver",
        data_dir=None if tmp_path is None else str(tmp_path),
        background_backfill=False,
        background_reports=False,
    )
    settings.update(config_overrides)
    config = AppConfig(**settings)
    sms = MemorySmsAdapter()
    platform = Platform.build(config=config, sms=sms)
    client = TestClient(create_app(platform))
    client.sms = sms
    client.platform = platform
    return client


def enroll_driver(client, affiliation_name="Union A", phone="+13035550100"):
    resp = client.post(
        "/drivers",
        json={
            "display_name": "Test",
            "phone": phone,
            "affiliation_name": affiliation_name,
            "region_tag": "CO",
            "consent": {"consented": True, "consent_version": "v1"},
        },
    )
    assert resp.status_code == 201, resp.text
    return resp.json()


def auth(token):
    return {"Authorization": f"Bearer {token}"}


def link_and_sync(client, driver, seed=1):
    resp = client.post(
        f"/drivers/{driver['driver_id']}/link",
        json={"params": dict(LINK_PARAMS), "seed": seed},
        headers=auth(driver["token"]),
    )
    assert resp.status_code == 202, resp.text
    return resp.json()


def survey_token_from_sms(sms, phone):
    for to, body in sms.sent:
        if to == phone:
            match = re.search(r"/survey/([0-9a-f]{32})", body)
            if match:
                return match.group(1)
    raise AssertionError(f"no survey link sent to {phone}")


@pytest.fixture
def client():
    c = build_client()
    yield c
    c.platform.store.close()


class TestOnboarding:
    def test_enroll_with_new_affiliation_creates_both(self, client):
        before = client.get("/affiliations").json()["affiliations"]
        driver = enroll_driver(client, affiliation_name="Fresh Organizers")
        after = client.get("/affiliations").json()["affiliations"]
        assert len(after) == len(before) + 1
        assert driver["affiliation_id"] in {a["affiliation_id"] for a in after}

    def test_enroll_with_known_affiliation(self, client):
        first = enroll_driver(client, affiliation_name="Union A")
        resp = client.post(
            "/drivers",
            json={
                "display_name": "Second",
                "phone": "+13035550101",
                "affiliation_id": first["affiliation_id"],
                "consent": {"consented": True, "consent_version": "v1"},
            },
        )
        assert resp.status_code == 201
        assert resp.json()["affiliation_id"] == first["affiliation_id"]

    def test_missing_consent_refused(self, client):
        resp = client.post(
            "/drivers",
            json={
                "display_name": "NoConsent",
                "phone": "+13035550102",
                "consent": {"consented": False, "consent_version": "v1"},
            },
        )
        assert resp.status_code == 422
        assert resp.json()["error"]["code"] == "consent_required"

    def test_unknown_affiliation_id_rejected(self, client):
        resp = client.post(
            "/drivers",
            json={
                "display_name": "X",
                "phone": "+13035550103",
                "affiliation_id": "aff-ghost",
                "consent": {"consented": True, "consent_version": "v1"},
            },
        )
        assert resp.status_code == 422


class TestLinking:
    def test_link_backfills_and_status_shows_synced(self, client):
        driver = enroll_driver(client)
        link_and_sync(client, driver)
        status = client.get("/me/status", headers=auth(driver["token"])).json()
        assert status["phase"] == "synced"
        assert status["activities_ingested"] == 25

    def test_link_phases_observable_with_background_backfill(self):
        c = build_client(background_backfill=True)
        try:
            driver = enroll_driver(c)
            c.post(
                f"/drivers/{driver['driver_id']}/link",
                json={"params": dict(LINK_PARAMS), "seed": 3},
                headers=auth(driver["token"]),
            )
            seen = set()
            for _ in range(200):
                phase = c.get("/me/status", headers=auth(driver["token"])).json()["phase"]
                seen.add(phase)
                if phase == "synced":
                    break
                time.sleep(0.01)
            assert "synced" in seen
        finally:
            c.platform.store.close()

    def test_double_link_conflict(self, client):
        driver = enroll_driver(client)
        link_and_sync(client, driver)
        resp = client.post(
            f"/drivers/{driver['driver_id']}/link",
            json={"params": dict(LINK_PARAMS)},
            headers=auth(driver["token"]),
        )
        assert resp.status_code == 409

    def test_deleted_driver_gone(self, client):
        driver = enroll_driver(client)
        client.post("/me/delete", headers=auth(driver["token"]))
        resp = client.post(
            f"/drivers/{driver['driver_id']}/link",
            json={"params": dict(LINK_PARAMS)},
            headers=auth(driver["token"]),
        )
        assert resp.status_code == 410

    def test_bad_probability_rejected(self, client):
        driver = enroll_driver(client)
        resp = client.post(
            f"/drivers/{driver['driver_id']}/link",
            json={"params": {**LINK_PARAMS, "surge_probability": 1.5}},
            headers=auth(driver["token"]),
        )
        assert resp.status_code == 422


class TestWebhookEndpoint:
    def setup_linked(self, client):
        driver = enroll_driver(client)
        link_and_sync(client, driver)
        account_id = client.platform.store.get_sync_state(
            driver["driver_id"]
        ).provider_account_id
        return driver, account_id

    def make_event_body(self, client, account_id):
        from fareaudit.provider.service import sign_body

        history = client.platform.provider.released_history(account_id)
        import json as _json

        body = _json.dumps(
            {
                "event_id": "evt-http-1",
                "event_type": "gigs.added",
                "account_id": account_id,
                "payload": [history[0].to_json_dict()],
            }
        ).encode()
        return body, sign_body(client.platform.config.webhook_secret, body)

    def test_valid_event_accepted(self, client):
        driver, account_id = self.setup_linked(client)
        body, sig = self.make_event_body(client, account_id)
        resp = client.post(
            "/webhooks/provider", content=body, headers={"X-Provider-Signature": sig}
        )
        assert resp.status_code == 200

    def test_bad_signature_rejected_untouched(self, client):
        driver, account_id = self.setup_linked(client)
        body, _ = self.make_event_body(client, account_id)
        digest_before = client.platform.store.state_digest()
        resp = client.post(
            "/webhooks/provider", content=body, headers={"X-Provider-Signature": "0" * 64}
        )
        assert resp.status_code == 401
        assert client.platform.store.state_digest() == digest_before

    def test_duplicate_event_no_state_change(self, client):
        driver, account_id = self.setup_linked(client)
        body, sig = self.make_event_body(client, account_id)
        client.post("/webhooks/provider", content=body, headers={"X-Provider-Signature": sig})
        digest = client.platform.store.state_digest()
        resp = client.post(
            "/webhooks/provider", content=body, headers={"X-Provider-Signature": sig}
        )
        assert resp.status_code == 200
        assert client.platform.store.state_digest() == digest


class TestDriverSelfService:
    def test_summary_locked_before_survey(self, client):
        driver = enroll_driver(client)
        link_and_sync(client, driver)
        resp = client.get("/me/summary", headers=auth(driver["token"]))
        assert resp.status_code == 200
        assert resp.json()["locked"] is True

    def test_summary_after_survey(self, client):
        driver = enroll_driver(client)
        link_and_sync(client, driver)
        token = survey_token_from_sms(client.sms, "+13035550100")
        questions = client.get(f"/survey/{token}")
        assert questions.status_code == 200
        assert len(questions.json()["questions"]) == 3
        submit = client.post(
            f"/survey/{token}",
            json={
                "estimated_take_rate_pct": 55,
                "fair_take_rate_pct": 21,
                "factors_text": "airport trips",
            },
        )
        assert submit.status_code == 201
        resp = client.get("/me/summary", headers=auth(driver["token"]))
        body = resp.json()
        assert body["locked"] is False
        s = body["summary"]
        assert s["n_rides"] > 0
        assert (
            s["highest_take_rate_pct"]
            >= s["average_take_rate_pct"]
            >= s["lowest_take_rate_pct"]
        )

    def test_survey_out_of_range_rejected_then_retryable(self, client):
        driver = enroll_driver(client)
        link_and_sync(client, driver)
        token = survey_token_from_sms(client.sms, "+13035550100")
        bad = client.post(
            f"/survey/{token}",
            json={"estimated_take_rate_pct": 101, "fair_take_rate_pct": 21,
                  "factors_text": ""},
        )
        assert bad.status_code == 422
        good = client.post(
            f"/survey/{token}",
            json={"estimated_take_rate_pct": 50, "fair_take_rate_pct": 21,
                  "factors_text": ""},
        )
        assert good.status_code == 201

    def test_consumed_survey_token_gone(self, client):
        driver = enroll_driver(client)
        link_and_sync(client, driver)
        token = survey_token_from_sms(client.sms, "+13035550100")
        client.post(
            f"/survey/{token}",
            json={"estimated_take_rate_pct": 50, "fair_take_rate_pct": 21,
                  "factors_text": ""},
        )
        assert client.get(f"/survey/{token}").status_code == 410

    def test_delete_purges_and_responds_after(self, client):
        driver = enroll_driver(client)
        link_and_sync(client, driver)
        resp = client.post("/me/delete", headers=auth(driver["token"]))
        assert resp.status_code == 200
        removed = resp.json()["removed"]
        assert removed["pii"] == 1
        assert removed["activities"] == 25
        counts = client.platform.store.scan_driver_rows(driver["driver_id"])
        assert counts.pop("tombstones") == 1
        assert all(v == 0 for v in counts.values())


class TestAdmin:
    def seed_two_affiliations(self, client):
        d1 = enroll_driver(client, affiliation_name="Union A", phone="+13035550201")
        d2 = enroll_driver(client, affiliation_name="Guild B", phone="+13035550202")
        link_and_sync(client, d1, seed=11)
        link_and_sync(client, d2, seed=22)
        return d1, d2

    def test_aggregates_no_filter_covers_all(self, client):
        self.seed_two_affiliations(client)
        resp = client.get("/admin/aggregates", headers=auth(ADMIN_KEY))
        assert resp.status_code == 200
        body = resp.json()
        assert body["digest"]
        assert body["summaries"]["all"]["n_drivers"] == 2

    def test_aggregates_affiliation_filter(self, client):
        d1, d2 = self.seed_two_affiliations(client)
        resp = client.get(
            "/admin/aggregates",
            params={"affiliation_ids": d1["affiliation_id"]},
            headers=auth(ADMIN_KEY),
        )
        body = resp.json()
        assert body["summaries"]["all"]["n_drivers"] == 1

    def test_aggregates_bad_date_range(self, client):
        resp = client.get(
            "/admin/aggregates",
            params={"from": "2023-01-01T00:00:00Z", "to": "2022-01-01T00:00:00Z"},
            headers=auth(ADMIN_KEY),
        )
        assert resp.status_code == 422

    def test_aggregates_unknown_affiliation(self, client):
        resp = client.get(
            "/admin/aggregates",
            params={"affiliation_ids": "aff-ghost"},
            headers=auth(ADMIN_KEY),
        )
        assert resp.status_code == 422

    def test_driver_token_forbidden(self, client):
        driver = enroll_driver(client)
        resp = client.get("/admin/aggregates", headers=auth(driver["token"]))
        assert resp.status_code == 403

    def test_report_build_fetch_rebuild_identical(self, client):
        self.seed_two_affiliations(client)
        first = client.post("/admin/reports", json={}, headers=auth(ADMIN_KEY))
        assert first.status_code == 202
        report_id = first.json()["report_id"]
        fetched = client.get(f"/admin/reports/{report_id}", headers=auth(ADMIN_KEY))
        assert fetched.status_code == 200
        report = fetched.json()["report"]
        assert [s["section_id"] for s in report["sections"]] == [
            "summary",
            "take_rate_over_time",
            "perception_vs_actual",
            "airport_comparison",
            "surge_comparison",
            "rate_per_mile",
        ]
        again = client.post("/admin/reports", json={}, headers=auth(ADMIN_KEY))
        assert again.json()["report_id"] == report_id
        assert again.json()["pipeline_digest"] == first.json()["pipeline_digest"]

    def test_unknown_report_404(self, client):
        resp = client.get("/admin/reports/rpt-nope", headers=auth(ADMIN_KEY))
        assert resp.status_code == 404

    def test_exports(self, client):
        self.seed_two_affiliations(client)
        nd = client.get("/admin/export/activities.ndjson", headers=auth(ADMIN_KEY))
        assert nd.status_code == 200
        assert len(nd.text.strip().splitlines()) == 50
        csv_resp = client.get("/admin/export/activities.csv", headers=auth(ADMIN_KEY))
        assert "Distance (miles)" in csv_resp.text.splitlines()[0]


class TestAuthorizationMatrix:
    """Every endpoint x {no token, driver token, wrong driver token, admin}."""

    def test_matrix(self, client):
        a = enroll_driver(client, phone="+13035550301")
        b = enroll_driver(client, phone="+13035550302")
        link_and_sync(client, a, seed=5)
        tokens = {
            "none": None,
            "driver": a["token"],
            "wrong_driver": b["token"],
            "admin": ADMIN_KEY,
        }
        # (method, path, body, {token_kind: expected_status})
        cases = [
            ("GET", "/health", None,
             {"none": 200, "driver": 200, "wrong_driver": 200, "admin": 200}),
            ("GET", "/affiliations", None,
             {"none": 200, "driver": 200, "wrong_driver": 200, "admin": 200}),
            ("GET", "/me/status", None,
             {"none": 401, "driver": 200, "wrong_driver": 200, "admin": 401}),
            ("GET", "/me/summary", None,
             {"none": 401, "driver": 200, "wrong_driver": 200, "admin": 401}),
            ("POST", f"/drivers/{a['driver_id']}/link", {"params": dict(LINK_PARAMS)},
             {"none": 401, "driver": 409, "wrong_driver": 403, "admin": 401}),
            ("GET", "/admin/aggregates", None,
             {"none": 401, "driver": 403, "wrong_driver": 403, "admin": 200}),
            ("POST", "/admin/reports", {},
             {"none": 401, "driver": 403, "wrong_driver": 403, "admin": 202}),
            ("GET", "/admin/reports/rpt-nope", None,
             {"none": 401, "driver": 403, "wrong_driver": 403, "admin": 404}),
            ("GET", "/admin/export/activities.ndjson", None,
             {"none": 401, "driver": 403, "wrong_driver": 403, "admin": 200}),
            ("GET", "/admin/export/activities.csv", None,
             {"none": 401, "driver": 403, "wrong_driver": 403, "admin": 200}),
        ]
        failures = []
        for method, path, body, expected in cases:
            for kind, want in expected.items():
                headers = auth(tokens[kind]) if tokens[kind] else {}
                resp = client.request(method, path, json=body, headers=headers)
                if resp.status_code != want:
                    failures.append(
                        f"{method} {path} [{kind}]: want {want}, got {resp.status_code}"
                    )
        assert not failures, "\n".join(failures)

    def test_wrong_driver_token_cannot_read_others_rows(self, client):
        a = enroll_driver(client, phone="+13035550301")
        b = enroll_driver(client, phone="+13035550302")
        link_and_sync(client, a, seed=5)
        status_b = client.get("/me/status", headers=auth(b["token"])).json()
        assert status_b["activities_ingested"] == 0  # b sees only b


class TestStatelessRestart:
    def test_committed_data_survives_restart(self, tmp_path):
        c1 = build_client(tmp_path=tmp_path / "d")
        driver = enroll_driver(c1)
        link_and_sync(c1, driver)
        c1.platform.store.close()

        c2 = build_client(tmp_path=tmp_path / "d")
        status = c2.get("/me/status", headers=auth(driver["token"])).json()
        assert status["phase"] == "synced"
        assert status["activities_ingested"] == 25
        c2.platform.store.close()
