"""HTTP boundary: onboarding, webhook receiver, survey links, driver
self-service, and admin aggregates/reports.

Admin access uses a single environment-provided bearer key that is
never issued through any endpoint; drivers get scoped bearer tokens at
enrollment and can only ever read their own rows. In dev mode the
synthetic provider is co-hosted under /provider and delivers webhooks
in-process through the same handler the HTTP route uses.
"""

from __future__ import annotations

import hmac
import io
import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import HTMLResponse, JSONResponse, PlainTextResponse

from .analytics.pipeline import (
    DEFAULT_AIRPORT_ZIPS,
    FilterError,
    FilterSpec,
    load_bundle,
    run_pipeline,
    snapshot_from_store,
)
from .datastore import (
    AccessToken,
    AuthError,
    ConsentRecord,
    ConsentRequired,
    Datastore,
    NotFound,
    SyncPhase,
)
from .ingestion import (
    DEFAULT_SURVEY_THRESHOLD,
    IngestionService,
    InProcessProviderClient,
)
from .provider.generator import GeneratorParams
from .provider.service import (
    SIGNATURE_HEADER,
    AccountNotFound,
    BadRequest,
    DuplicateAccount,
    ProviderMock,
)
from .report import build_report, write_report
from .survey import (
    AlreadyInvited,
    ConsoleSmsAdapter,
    InviteGone,
    SmsAdapter,
    SummaryLocked,
    SurveyService,
    ValidationError,
)
from datetime import datetime, timezone

logger = logging.getLogger(__name__)


@dataclass
class AppConfig:
    admin_key: str = "dev-admin-key"
    webhook_secret: str = "dev-webhook-secret"
    base_url: str = "http://localhost:8000"
    data_dir: str | None = None
    airport_zips: tuple[str, ...] = DEFAULT_AIRPORT_ZIPS
    survey_threshold: int = DEFAULT_SURVEY_THRESHOLD
    background_backfill: bool = True
    background_reports: bool = True
    sms_transcript: str | None = None  # JSONL transcript instead of console

    @classmethod
    def from_env(cls) -> "AppConfig":
        return cls(
            admin_key=os.environ.get("ADMIN_KEY", "dev-admin-key"),
            webhook_secret=os.environ.get("PROVIDER_WEBHOOK_SECRET", "dev-webhook-secret"),
            base_url=os.environ.get("BASE_URL", "http://localhost:8000"),
            data_dir=os.environ.get("DATA_DIR"),
            sms_transcript=os.environ.get("SMS_TRANSCRIPT"),
        )


@dataclass
class Platform:
    """Everything behind the HTTP surface, wired together."""

    config: AppConfig
    store: Datastore
    provider: ProviderMock
    ingestion: IngestionService
    survey: SurveyService
    report_builds: dict[str, str] = field(default_factory=dict)  # report_id -> status

    @classmethod
    def build(
        cls,
        config: AppConfig | None = None,
        store: Datastore | None = None,
        provider: ProviderMock | None = None,
        sms: SmsAdapter | None = None,
    ) -> "Platform":
        config = config or AppConfig.from_env()
        store = store or Datastore(config.data_dir)
        provider = provider or ProviderMock(
            config.webhook_secret, transport=None, sleeper=lambda s: None
        )
        ingestion = IngestionService(
            store,
            InProcessProviderClient(provider),
            config.webhook_secret,
            survey_threshold=config.survey_threshold,
        )
        if sms is None:
            if config.sms_transcript:
                from .survey import TranscriptSmsAdapter

                sms = TranscriptSmsAdapter(config.sms_transcript)
            else:
                sms = ConsoleSmsAdapter()
        survey = SurveyService(store, sms, base_url=config.base_url)
        ingestion.attach_survey_service(survey)
        platform = cls(config, store, provider, ingestion, survey)
        # co-hosted provider delivers straight into the webhook handler,
        # signature and all
        provider.transport = platform._inproc_transport
        provider.register_webhook_endpoint("inproc://platform/webhooks/provider")
        state_path = platform.provider_state_path()
        if state_path is not None and state_path.exists():
            provider.load_state(str(state_path))
        return platform

    def _inproc_transport(self, url: str, body: bytes, headers: dict[str, str]) -> bool:
        if url.startswith("inproc://"):
            ack = self.ingestion.handle_webhook(body, headers.get(SIGNATURE_HEADER, ""))
            return ack.ok
        from .provider.service import http_transport

        return http_transport(url, body, headers)

    def provider_state_path(self) -> Path | None:
        if self.config.data_dir is None:
            return None
        return Path(self.config.data_dir) / "provider_state.json"

    def save_provider_state(self) -> None:
        path = self.provider_state_path()
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            self.provider.save_state(str(path))

    def bundles_dir(self) -> Path | None:
        if self.config.data_dir is None:
            return None
        return Path(self.config.data_dir) / "bundles"

    def reports_dir(self) -> Path | None:
        if self.config.data_dir is None:
            return None
        return Path(self.config.data_dir) / "reports"


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})


def _bearer(request: Request) -> str | None:
    header = request.headers.get("Authorization", "")
    if header.startswith("Bearer "):
        return header[len("Bearer ") :].strip()
    return None


def create_app(platform: Platform | None = None, config: AppConfig | None = None) -> FastAPI:
    platform = platform or Platform.build(config)
    app = FastAPI(title="fareaudit", version="0.1.0")
    app.state.platform = platform
    p = platform

    def require_driver(request: Request) -> AccessToken | JSONResponse:
        token = _bearer(request)
        if not token:
            return _error(401, "auth_required", "missing bearer token")
        try:
            return p.store.resolve_token(token)
        except AuthError as exc:
            return _error(401, "auth_invalid", str(exc))

    def require_admin(request: Request) -> AccessToken | JSONResponse:
        token = _bearer(request)
        if not token:
            return _error(401, "auth_required", "missing bearer token")
        if hmac.compare_digest(token, p.config.admin_key):
            return AccessToken.admin()
        try:
            p.store.resolve_token(token)
        except AuthError:
            return _error(401, "auth_invalid", "unknown token")
        return _error(403, "admin_required", "admin key required")

    # -- health and directory ------------------------------------------------

    @app.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.get("/affiliations")
    def affiliations() -> dict[str, Any]:
        return {
            "affiliations": [
                {"affiliation_id": a.affiliation_id, "name": a.name, "region_tag": a.region_tag}
                for a in p.store.list_affiliations()
            ]
        }

    # -- driver onboarding -----------------------------------------------------

    @app.post("/drivers", status_code=201)
    def create_driver(body: dict[str, Any]) -> Any:
        consent = body.get("consent") or {}
        if not consent.get("consented") or not consent.get("consent_version"):
            return _error(422, "consent_required", "enrollment requires explicit consent")
        affiliation_id = body.get("affiliation_id")
        if body.get("affiliation_name"):
            affiliation = p.store.ensure_affiliation(
                body["affiliation_name"], body.get("region_tag")
            )
            affiliation_id = affiliation.affiliation_id
        elif affiliation_id is not None:
            try:
                p.store.get_affiliation(affiliation_id)
            except NotFound:
                return _error(422, "unknown_affiliation", f"no affiliation {affiliation_id}")
        record = ConsentRecord(
            consented=True,
            consent_version=str(consent["consent_version"]),
            consented_at=datetime.now(timezone.utc),
        )
        try:
            profile = p.store.enroll_driver(
                display_name=body.get("display_name", ""),
                phone=body.get("phone", ""),
                consent=record,
                affiliation_id=affiliation_id,
            )
        except ConsentRequired as exc:
            return _error(422, "consent_required", str(exc))
        token = p.store.issue_driver_token(profile.driver_id)
        return {
            "driver_id": profile.driver_id,
            "token": token,
            "affiliation_id": profile.affiliation_id,
        }

    @app.post("/drivers/{driver_id}/link", status_code=202)
    def link_driver(driver_id: str, body: dict[str, Any], request: Request) -> Any:
        # tombstone outranks auth: the deleted driver's tokens are purged,
        # and the contract for a deleted id is an explicit 410
        if p.store.is_tombstoned(driver_id):
            return _error(410, "driver_deleted", "driver has been deleted")
        auth = require_driver(request)
        if isinstance(auth, JSONResponse):
            return auth
        if auth.driver_id != driver_id:
            return _error(403, "forbidden", "token does not match driver")
        if not p.store.driver_exists(driver_id):
            return _error(404, "not_found", f"no driver {driver_id}")
        if p.store.get_sync_state(driver_id) is not None:
            return _error(409, "already_linked", "driver already linked a provider account")
        account_id = body.get("account_id")
        if account_id is None:
            raw_params = body.get("params") or {}
            raw_params.setdefault("n_rides", 60)
            raw_params.setdefault("date_start", "2019-01-01T00:00:00Z")
            raw_params.setdefault("date_end", "2024-06-30T00:00:00Z")
            try:
                params = GeneratorParams.from_json_dict(raw_params)
                seed = int(body.get("seed", 0))
                account_id = p.ingestion.provider.create_account(driver_id, params, seed)
            except (ValueError, DuplicateAccount) as exc:
                return _error(422, "bad_params", str(exc))
        else:
            try:
                p.provider.account(account_id)
            except AccountNotFound:
                return _error(422, "unknown_account", f"no provider account {account_id}")
        p.store.create_sync_state(driver_id, account_id)
        p.save_provider_state()

        def backfill() -> None:
            try:
                p.ingestion.run_backfill(driver_id)
            except Exception as exc:
                logger.warning("backfill for %s failed: %s", driver_id, exc)

        if p.config.background_backfill:
            threading.Thread(target=backfill, daemon=True).start()
        else:
            backfill()
        state = p.store.get_sync_state(driver_id)
        return {
            "driver_id": driver_id,
            "account_id": account_id,
            "phase": state.phase.value if state else SyncPhase.LINKED.value,
        }

    @app.get("/me/status")
    def my_status(request: Request) -> Any:
        auth = require_driver(request)
        if isinstance(auth, JSONResponse):
            return auth
        state = p.store.get_sync_state(auth.driver_id)
        if state is None:
            return {"driver_id": auth.driver_id, "phase": None, "activities_ingested": 0}
        return {
            "driver_id": auth.driver_id,
            "phase": state.phase.value,
            "activities_ingested": state.activities_ingested,
            "survey_invited": state.survey_invited,
        }

    # -- provider webhooks --------------------------------------------------------

    @app.post("/webhooks/provider")
    async def provider_webhook(request: Request) -> Any:
        body = await request.body()
        signature = request.headers.get(SIGNATURE_HEADER, "")
        ack = p.ingestion.handle_webhook(body, signature)
        if ack.ok:
            return {"status": "ok", "detail": ack.reason, "rows_written": ack.rows_written}
        if ack.reason == "bad signature":
            return _error(401, "bad_signature", "webhook signature did not verify")
        return _error(400, "bad_payload", ack.reason)

    # -- driver self-service ---------------------------------------------------------

    @app.get("/me/summary")
    def my_summary(request: Request) -> Any:
        auth = require_driver(request)
        if isinstance(auth, JSONResponse):
            return auth
        try:
            summary = p.survey.personal_summary(auth.driver_id)
        except SummaryLocked as exc:
            return {"locked": True, "message": str(exc)}
        except NotFound:
            return _error(404, "not_found", "driver not found")
        return {"locked": False, "summary": summary}

    @app.post("/me/delete")
    def my_delete(request: Request) -> Any:
        auth = require_driver(request)
        if isinstance(auth, JSONResponse):
            return auth
        state = p.store.get_sync_state(auth.driver_id)
        try:
            receipt = p.store.delete_driver(auth.driver_id)
        except NotFound:
            return _error(404, "not_found", "driver not found")
        if state is not None and state.provider_account_id:
            try:
                p.ingestion.provider.remove_account(state.provider_account_id)
                p.save_provider_state()
            except Exception as exc:
                logger.warning("provider unlink failed for %s: %s", auth.driver_id, exc)
        return {
            "driver_id": receipt.driver_id,
            "deleted_at": receipt.deleted_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "removed": receipt.removed,
        }

    # -- survey ------------------------------------------------------------------------

    @app.get("/survey/{token}")
    def fetch_survey(token: str) -> Any:
        try:
            return p.survey.fetch_survey(token)
        except InviteGone as exc:
            return _error(410, "gone", str(exc))

    @app.post("/survey/{token}", status_code=201)
    def submit_survey(token: str, body: dict[str, Any]) -> Any:
        try:
            response = p.survey.submit(token, body)
        except ValidationError as exc:
            return _error(422, "invalid_answers", str(exc))
        except InviteGone as exc:
            return _error(410, "gone", str(exc))
        return {
            "driver_id": response["driver_id"],
            "submitted_at": response["submitted_at"].strftime("%Y-%m-%dT%H:%M:%SZ"),
        }

    # -- admin ----------------------------------------------------------------------------

    def parse_filter(request: Request) -> FilterSpec:
        params = request.query_params
        raw: dict[str, Any] = {
            "affiliation_ids": params.get("affiliation_ids", "").split(",")
            if params.get("affiliation_ids")
            else None,
            "date_from": params.get("from"),
            "date_to": params.get("to"),
            "categories": params.get("categories", "").split(",")
            if params.get("categories")
            else None,
        }
        known = [a.affiliation_id for a in p.store.list_affiliations()]
        return FilterSpec.from_json_dict(raw, known_affiliations=known)

    @app.get("/admin/aggregates")
    def admin_aggregates(request: Request) -> Any:
        auth = require_admin(request)
        if isinstance(auth, JSONResponse):
            return auth
        try:
            spec = parse_filter(request)
        except (FilterError, ValueError) as exc:
            return _error(422, "bad_filter", str(exc))
        snapshot = snapshot_from_store(p.store)
        bundle = run_pipeline(
            snapshot, spec, out_dir=p.bundles_dir(), airport_zips=p.config.airport_zips
        )
        return {"digest": bundle.digest, "cache_hit": bundle.cache_hit, **bundle.data}

    @app.post("/admin/reports", status_code=202)
    def admin_build_report(request: Request, body: dict[str, Any] | None = None) -> Any:
        auth = require_admin(request)
        if isinstance(auth, JSONResponse):
            return auth
        body = body or {}
        known = [a.affiliation_id for a in p.store.list_affiliations()]
        try:
            spec = FilterSpec.from_json_dict(body.get("filter") or {}, known_affiliations=known)
        except (FilterError, ValueError) as exc:
            return _error(422, "bad_filter", str(exc))
        snapshot = snapshot_from_store(p.store)
        bundle = run_pipeline(
            snapshot, spec, out_dir=p.bundles_dir(), airport_zips=p.config.airport_zips
        )
        report = build_report(bundle.data)
        report_id = report["report_id"]

        def build() -> None:
            try:
                reports_dir = p.reports_dir()
                if reports_dir is not None:
                    write_report(bundle.data, reports_dir / report_id)
                p.store.store_report(report_id, "ready", json.dumps(report))
            except Exception as exc:
                logger.exception("report build failed")
                p.store.store_report(report_id, f"failed: {exc}", None)

        existing = p.store.get_report(report_id)
        if existing is None or existing["status"] != "ready":
            p.store.store_report(report_id, "building", None)
            if p.config.background_reports:
                threading.Thread(target=build, daemon=True).start()
            else:
                build()
        return {"report_id": report_id, "pipeline_digest": bundle.digest}

    @app.get("/admin/reports/{report_id}")
    def admin_get_report(report_id: str, request: Request) -> Any:
        auth = require_admin(request)
        if isinstance(auth, JSONResponse):
            return auth
        row = p.store.get_report(report_id)
        if row is None:
            return _error(404, "not_found", f"no report {report_id}")
        if row["status"] != "ready":
            return JSONResponse(
                status_code=202, content={"report_id": report_id, "status": row["status"]}
            )
        return {"report_id": report_id, "status": "ready", "report": json.loads(row["document"])}

    @app.get("/admin/reports/{report_id}/html")
    def admin_get_report_html(report_id: str, request: Request) -> Any:
        auth = require_admin(request)
        if isinstance(auth, JSONResponse):
            return auth
        row = p.store.get_report(report_id)
        if row is None or row["status"] != "ready":
            return _error(404, "not_found", f"no rendered report {report_id}")
        from .report import render_html

        return HTMLResponse(render_html(json.loads(row["document"])))

    @app.get("/admin/export/activities.ndjson")
    def admin_export_ndjson(request: Request) -> Any:
        auth = require_admin(request)
        if isinstance(auth, JSONResponse):
            return auth
        buf = io.StringIO()
        p.store.export_activities_ndjson(buf)
        return PlainTextResponse(buf.getvalue(), media_type="application/x-ndjson")

    @app.get("/admin/export/activities.csv")
    def admin_export_csv(request: Request) -> Any:
        auth = require_admin(request)
        if isinstance(auth, JSONResponse):
            return auth
        buf = io.StringIO()
        p.store.export_activities_csv(buf)
        return PlainTextResponse(buf.getvalue(), media_type="text/csv")

    # -- co-hosted provider mock (dev mode) ---------------------------------------------

    @app.post("/provider/accounts", status_code=201)
    def provider_create_account(body: dict[str, Any]) -> Any:
        try:
            params = GeneratorParams.from_json_dict(body.get("params") or {})
            account = p.provider.create_account(
                body["driver_ref"], params, int(body.get("seed", 0))
            )
        except DuplicateAccount as exc:
            return _error(409, "duplicate_account", str(exc))
        except (KeyError, ValueError) as exc:
            return _error(422, "bad_params", str(exc))
        p.save_provider_state()
        return {
            "account_id": account.account_id,
            "driver_ref": account.driver_ref,
            "n_rides": account.params.n_rides,
            "history_digest": p.provider.history_digest(account.account_id),
        }

    @app.get("/provider/accounts/{account_id}/gigs")
    def provider_list_gigs(account_id: str, request: Request) -> Any:
        cursor = request.query_params.get("cursor")
        limit = int(request.query_params.get("limit", "100"))
        try:
            gigs, next_cursor = p.provider.list_gigs(account_id, cursor=cursor, limit=limit)
        except AccountNotFound:
            return _error(404, "not_found", f"no account {account_id}")
        except BadRequest as exc:
            return _error(400, "bad_request", str(exc))
        return {"gigs": gigs, "next_cursor": next_cursor}

    @app.delete("/provider/accounts/{account_id}")
    def provider_remove_account(account_id: str) -> Any:
        try:
            p.provider.remove_account(account_id)
        except AccountNotFound:
            return _error(404, "not_found", f"no account {account_id}")
        p.save_provider_state()
        return {"account_id": account_id, "removed": True}

    @app.post("/provider/webhook-endpoints", status_code=201)
    def provider_register_endpoint(body: dict[str, Any]) -> Any:
        url = body.get("url")
        if not url:
            return _error(422, "bad_params", "url required")
        p.provider.register_webhook_endpoint(url)
        return {"registered": url}

    return app


def main() -> None:  # pragma: no cover - thin uvicorn harness
    import uvicorn

    app = create_app()
    uvicorn.run(app, host="127.0.0.1", port=8000)
