"""Provider event ingestion and the per-driver sync state machine.

Webhook handling is idempotent by contract: duplicate event ids are
acknowledged without effect, upserts key on (activity_id, source
payload digest), and processing is serialized per driver so any
duplication or per-driver-order-preserving reordering of an event log
lands on the same datastore state.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Any, Protocol

from .datastore import ConsentRequired, Datastore, NotFound, SyncPhase
from .domain import DomainError, RideActivity
from .provider.generator import GeneratorParams, bind_driver
from .provider.service import ProviderMock, verify_signature

logger = logging.getLogger(__name__)

DEFAULT_SURVEY_THRESHOLD = 10


class IngestError(Exception):
    pass


class ProviderUnavailable(IngestError):
    pass


@dataclass(frozen=True)
class Ack:
    ok: bool
    reason: str
    rows_written: int = 0


class ProviderClient(Protocol):
    """The slice of the provider API the platform consumes."""

    def create_account(
        self, driver_ref: str, params: GeneratorParams, seed: int
    ) -> str: ...

    def list_gigs(
        self, account_id: str, cursor: str | None, limit: int
    ) -> tuple[list[dict[str, Any]], str | None]: ...

    def remove_account(self, account_id: str) -> None: ...


class InProcessProviderClient:
    """Direct calls into a co-hosted provider mock."""

    def __init__(self, mock: ProviderMock) -> None:
        self.mock = mock

    def create_account(self, driver_ref: str, params: GeneratorParams, seed: int) -> str:
        return self.mock.create_account(driver_ref, params, seed).account_id

    def list_gigs(
        self, account_id: str, cursor: str | None, limit: int
    ) -> tuple[list[dict[str, Any]], str | None]:
        return self.mock.list_gigs(account_id, cursor=cursor, limit=limit)

    def remove_account(self, account_id: str) -> None:
        self.mock.remove_account(account_id)


class HttpProviderClient:
    """Provider API over HTTP, for split deployments."""

    def __init__(self, base_url: str, client=None) -> None:
        import httpx

        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(timeout=30.0)

    def create_account(self, driver_ref: str, params: GeneratorParams, seed: int) -> str:
        resp = self._client.post(
            f"{self.base_url}/provider/accounts",
            json={"driver_ref": driver_ref, "seed": seed, "params": params.to_json_dict()},
        )
        if resp.status_code >= 400:
            raise ProviderUnavailable(f"create_account failed: {resp.status_code} {resp.text}")
        return resp.json()["account_id"]

    def list_gigs(
        self, account_id: str, cursor: str | None, limit: int
    ) -> tuple[list[dict[str, Any]], str | None]:
        params: dict[str, Any] = {"limit": limit}
        if cursor:
            params["cursor"] = cursor
        resp = self._client.get(
            f"{self.base_url}/provider/accounts/{account_id}/gigs", params=params
        )
        if resp.status_code >= 400:
            raise ProviderUnavailable(f"list_gigs failed: {resp.status_code} {resp.text}")
        doc = resp.json()
        return doc["gigs"], doc.get("next_cursor")

    def remove_account(self, account_id: str) -> None:
        self._client.delete(f"{self.base_url}/provider/accounts/{account_id}")


class IngestionService:
    def __init__(
        self,
        store: Datastore,
        provider: ProviderClient,
        webhook_secret: str,
        survey_threshold: int = DEFAULT_SURVEY_THRESHOLD,
        page_limit: int = 100,
    ) -> None:
        self.store = store
        self.provider = provider
        self.webhook_secret = webhook_secret
        self.survey_threshold = survey_threshold
        self.page_limit = page_limit
        self._survey = None  # attached after construction to avoid a cycle

    def attach_survey_service(self, survey_service) -> None:
        self._survey = survey_service

    # -- webhooks ------------------------------------------------------------

    def handle_webhook(self, body: bytes, signature: str) -> Ack:
        """Verify, deduplicate and apply one provider event delivery."""
        if not signature or not verify_signature(self.webhook_secret, body, signature):
            logger.warning("webhook rejected: bad signature")
            return Ack(False, "bad signature")
        try:
            event = json.loads(body)
            event_id = event["event_id"]
            event_type = event["event_type"]
            account_id = event["account_id"]
            payload = event.get("payload", [])
            if not isinstance(payload, list):
                raise ValueError("payload must be a list")
        except (ValueError, KeyError, TypeError) as exc:
            return Ack(False, f"malformed payload: {exc}")

        driver_id = self.store.account_driver(account_id)
        if driver_id is None:
            # unlinked or deleted account: acknowledge so the provider
            # stops retrying, write nothing
            return Ack(True, "unknown account, discarded")
        if self.store.is_tombstoned(driver_id):
            return Ack(True, "tombstoned driver, discarded")

        with self.store.driver_lock(driver_id):
            if self._seen(event_id):
                return Ack(True, "duplicate event, no-op")
            if event_type in ("gigs.added", "gigs.updated"):
                try:
                    activities = [
                        bind_driver(RideActivity.from_json_dict(r), driver_id) for r in payload
                    ]
                except DomainError as exc:
                    return Ack(False, f"malformed payload: {exc}")
                try:
                    written = self.store.put_activities(driver_id, activities)
                except ConsentRequired as exc:
                    return Ack(True, f"discarded: {exc}")
                self.store.record_ingest(driver_id)
                self.store.mark_event_seen(event_id)
                self.evaluate_survey_trigger(driver_id)
                return Ack(True, "applied", rows_written=written)
            if event_type == "account.removed":
                state = self.store.get_sync_state(driver_id)
                if state is not None and state.phase != SyncPhase.UNLINKED:
                    self.store.set_phase(driver_id, SyncPhase.UNLINKED)
                self.store.mark_event_seen(event_id)
                return Ack(True, "account removed")
            # account.connected and future event types carry no rows
            self.store.mark_event_seen(event_id)
            return Ack(True, f"{event_type} acknowledged")

    def _seen(self, event_id: str) -> bool:
        return self.store.event_seen(event_id)

    # -- backfill and refresh ---------------------------------------------------

    def run_backfill(self, driver_id: str) -> int:
        """Page the provider history to exhaustion; resumable mid-stream."""
        state = self.store.get_sync_state(driver_id)
        if state is None:
            raise NotFound(f"no sync state for {driver_id}")
        if state.phase not in (SyncPhase.LINKED, SyncPhase.BACKFILLING):
            raise IngestError(f"backfill requires linked phase, have {state.phase.value}")
        account_id = state.provider_account_id
        if account_id is None:
            raise IngestError(f"driver {driver_id} has no provider account")
        if state.phase is SyncPhase.LINKED:
            self.store.set_phase(driver_id, SyncPhase.BACKFILLING)
        cursor = state.backfill_cursor
        while True:
            try:
                page, next_cursor = self.provider.list_gigs(
                    account_id, cursor=cursor, limit=self.page_limit
                )
            except ProviderUnavailable:
                raise
            except Exception as exc:  # transport-level failure: stay resumable
                raise ProviderUnavailable(str(exc)) from exc
            if page:
                activities = [
                    bind_driver(RideActivity.from_json_dict(r), driver_id) for r in page
                ]
                self.store.put_activities(driver_id, activities)
                self.store.record_ingest(driver_id)
            self.store.set_backfill_cursor(driver_id, next_cursor)
            cursor = next_cursor
            if next_cursor is None:
                break
        self.store.set_phase(driver_id, SyncPhase.SYNCED)
        self.evaluate_survey_trigger(driver_id)
        return self.store.count_activities(driver_id)

    def evaluate_survey_trigger(self, driver_id: str) -> bool:
        """Issue the one-time survey invite once enough data has landed."""
        state = self.store.get_sync_state(driver_id)
        if state is None or state.tombstoned or state.survey_invited:
            return False
        if state.phase is not SyncPhase.SYNCED:
            return False
        if self.store.count_completed_rideshare(driver_id) < self.survey_threshold:
            return False
        if self._survey is None:
            return False
        from .survey import AlreadyInvited, SurveyError

        try:
            self._survey.issue_invite(driver_id)
        except AlreadyInvited:
            self.store.latch_survey_invited(driver_id)  # heal a half-done invite
            return False
        except SurveyError as exc:
            logger.warning("survey invite for %s failed, will retry: %s", driver_id, exc)
            return False
        self.store.latch_survey_invited(driver_id)
        return True

    def daily_refresh(self, driver_ids: list[str] | None = None) -> dict[str, dict[str, Any]]:
        """Pull new provider data for every synced driver.

        Failures are isolated per driver: one outage never blocks the
        rest, and the failing driver stays in a retryable phase.
        """
        results: dict[str, dict[str, Any]] = {}
        states = self.store.sync_states()
        for state in states:
            if driver_ids is not None and state.driver_id not in driver_ids:
                continue
            # REFRESHING here means a previous refresh failed mid-flight;
            # pick it up again rather than stranding the driver.
            if state.phase not in (SyncPhase.SYNCED, SyncPhase.REFRESHING):
                continue
            driver_id = state.driver_id
            account_id = state.provider_account_id
            if state.phase is SyncPhase.SYNCED:
                self.store.set_phase(driver_id, SyncPhase.REFRESHING)
            try:
                written = 0
                cursor: str | None = None
                while True:
                    page, cursor = self.provider.list_gigs(
                        account_id, cursor=cursor, limit=self.page_limit
                    )
                    if page:
                        activities = [
                            bind_driver(RideActivity.from_json_dict(r), driver_id)
                            for r in page
                        ]
                        written += self.store.put_activities(driver_id, activities)
                    if cursor is None:
                        break
                self.store.record_ingest(driver_id)
                self.store.set_phase(driver_id, SyncPhase.SYNCED)
                self.evaluate_survey_trigger(driver_id)
                results[driver_id] = {"ingested": written}
            except Exception as exc:
                logger.warning("refresh failed for %s: %s", driver_id, exc)
                results[driver_id] = {"error": str(exc), "retryable": True}
        return results
