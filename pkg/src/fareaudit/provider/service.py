"""Spec-complete stand-in for the third-party payroll-data provider.

Holds deterministic synthetic accounts, serves the paginated gigs API,
and pushes signed webhook events (staged backfill batches or one event
per simulated day). Runs in-process for tests and is mounted on the API
service in dev mode; deliveries go through a pluggable transport so
tests can script flaky endpoints without a network.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import logging
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Callable

from ..domain import RideActivity, canonical_json, parse_utc, with_source_digest
from .generator import GeneratorParams, generate_history

logger = logging.getLogger(__name__)

SIGNATURE_HEADER = "X-Provider-Signature"


def sign_body(secret: str, body: bytes) -> str:
    return hmac.new(secret.encode("utf-8"), body, hashlib.sha256).hexdigest()


def verify_signature(secret: str, body: bytes, signature: str) -> bool:
    return hmac.compare_digest(sign_body(secret, body), signature)


class ProviderError(Exception):
    pass


class AccountNotFound(ProviderError):
    pass


class BadRequest(ProviderError):
    pass


class DuplicateAccount(ProviderError):
    pass


@dataclass
class ProviderAccount:
    account_id: str
    driver_ref: str
    connected_at: datetime
    generator_seed: int
    params: GeneratorParams
    released_until: datetime  # rides starting after this are not yet visible
    emitted_until: datetime  # webhook coverage watermark for daily mode
    removed: bool = False
    event_seq: int = 0


@dataclass(frozen=True)
class WebhookEvent:
    event_id: str
    event_type: str  # account.connected | gigs.added | gigs.updated | account.removed
    account_id: str
    payload: tuple[dict[str, Any], ...]

    def body_bytes(self) -> bytes:
        doc = {
            "event_id": self.event_id,
            "event_type": self.event_type,
            "account_id": self.account_id,
            "payload": list(self.payload),
        }
        return canonical_json(doc).encode("utf-8")


@dataclass
class Delivery:
    event: WebhookEvent
    url: str
    attempts: int
    delivered: bool


Transport = Callable[[str, bytes, dict[str, str]], bool]


def http_transport(url: str, body: bytes, headers: dict[str, str]) -> bool:
    import httpx

    try:
        resp = httpx.post(url, content=body, headers=headers, timeout=10.0)
    except httpx.HTTPError as exc:
        logger.warning("webhook delivery to %s failed: %s", url, exc)
        return False
    return resp.status_code < 300


def _encode_cursor(offset: int) -> str:
    return base64.urlsafe_b64encode(f"o:{offset}".encode()).decode()


def _decode_cursor(cursor: str) -> int:
    try:
        raw = base64.urlsafe_b64decode(cursor.encode()).decode()
        tag, value = raw.split(":", 1)
        if tag != "o":
            raise ValueError(tag)
        offset = int(value)
    except Exception as exc:
        raise BadRequest(f"invalid cursor {cursor!r}") from exc
    if offset < 0:
        raise BadRequest(f"invalid cursor {cursor!r}")
    return offset


class ProviderMock:
    """Synthetic payroll-data provider with a gigs API and webhooks."""

    def __init__(
        self,
        webhook_secret: str,
        transport: Transport | None = None,
        max_attempts: int = 5,
        backoff_base: float = 0.05,
        sleeper: Callable[[float], None] = time.sleep,
    ) -> None:
        self.webhook_secret = webhook_secret
        self.transport: Transport = transport or http_transport
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.sleeper = sleeper
        self._accounts: dict[str, ProviderAccount] = {}
        self._histories: dict[str, list[RideActivity]] = {}
        self._amendments: dict[str, list[tuple[str, dict[str, Any]]]] = {}
        self._endpoints: list[str] = []
        self.deliveries: list[Delivery] = []
        self.dead_letters: list[Delivery] = []
        self._lock = threading.RLock()

    # -- account registry ------------------------------------------------

    def create_account(
        self,
        driver_ref: str,
        params: GeneratorParams,
        seed: int,
        connected_at: datetime | None = None,
        released_until: datetime | None = None,
    ) -> ProviderAccount:
        account_id = "acct-" + hashlib.sha256(driver_ref.encode()).hexdigest()[:12]
        with self._lock:
            for acct in self._accounts.values():
                if acct.driver_ref == driver_ref and not acct.removed:
                    raise DuplicateAccount(f"driver_ref {driver_ref!r} already linked")
            if account_id in self._accounts:
                raise DuplicateAccount(f"account {account_id} already exists")
            released = released_until or params.date_span[1]
            account = ProviderAccount(
                account_id=account_id,
                driver_ref=driver_ref,
                connected_at=connected_at or datetime.now(timezone.utc),
                generator_seed=seed,
                params=params,
                released_until=released,
                emitted_until=released,
            )
            self._accounts[account_id] = account
            self._histories[account_id] = generate_history(account_id, driver_ref, params, seed)
            self._amendments[account_id] = []
        self._emit(account, "account.connected", [])
        return account

    def account(self, account_id: str) -> ProviderAccount:
        try:
            return self._accounts[account_id]
        except KeyError:
            raise AccountNotFound(account_id) from None

    def accounts(self) -> list[ProviderAccount]:
        return list(self._accounts.values())

    def remove_account(self, account_id: str) -> None:
        account = self.account(account_id)
        if account.removed:
            return
        self._emit(account, "account.removed", [])
        account.removed = True  # latch after the farewell event

    # -- history and gigs API ----------------------------------------------

    def released_history(self, account_id: str) -> list[RideActivity]:
        account = self.account(account_id)
        history = self._histories[account_id]
        return [a for a in history if a.start_time is not None and a.start_time <= account.released_until]

    def history_digest(self, account_id: str) -> str:
        acc = hashlib.sha256()
        for a in self.released_history(account_id):
            acc.update(a.source_payload_digest.encode())
        return acc.hexdigest()

    def state_digest(self) -> str:
        acc = hashlib.sha256()
        for account_id in sorted(self._accounts):
            acc.update(account_id.encode())
            acc.update(self.history_digest(account_id).encode())
        return acc.hexdigest()

    def list_gigs(
        self, account_id: str, cursor: str | None = None, limit: int = 100
    ) -> tuple[list[dict[str, Any]], str | None]:
        if not 1 <= limit <= 500:
            raise BadRequest(f"limit must be in [1, 500], got {limit}")
        released = self.released_history(account_id)
        offset = _decode_cursor(cursor) if cursor else 0
        if offset > len(released):
            raise BadRequest(f"cursor beyond history: {cursor!r}")
        page = [a.to_json_dict() for a in released[offset : offset + limit]]
        next_offset = offset + len(page)
        next_cursor = _encode_cursor(next_offset) if next_offset < len(released) else None
        return page, next_cursor

    def amend_activity(self, account_id: str, activity_id: str, **changes: Any) -> RideActivity:
        """Mutate one provider-side record and push a gigs.updated event."""
        account = self.account(account_id)
        history = self._histories[account_id]
        for idx, activity in enumerate(history):
            if activity.activity_id == activity_id:
                updated = with_source_digest(replace(activity, **changes))
                history[idx] = updated
                self._amendments[account_id].append((activity_id, dict(changes)))
                self._emit(account, "gigs.updated", [updated.to_json_dict()])
                return updated
        raise AccountNotFound(f"activity {activity_id} not in {account_id}")

    # -- webhook emission --------------------------------------------------

    def register_webhook_endpoint(self, url: str) -> None:
        with self._lock:
            if url not in self._endpoints:
                self._endpoints.append(url)

    @property
    def webhook_endpoints(self) -> list[str]:
        return list(self._endpoints)

    def emit_events(
        self, account_id: str, schedule: str = "staged", batches: int = 4
    ) -> list[Delivery]:
        """Push gigs.added events: a K-batch backfill or one per new day."""
        account = self.account(account_id)
        if account.removed:
            return []
        if not self._endpoints:
            raise ProviderError("no webhook endpoint registered")
        released = self.released_history(account_id)
        deliveries: list[Delivery] = []
        if schedule == "staged":
            if batches < 1:
                raise BadRequest("batches must be >= 1")
            chunk = max(1, -(-len(released) // batches)) if released else 0
            for i in range(0, len(released), chunk or 1):
                if not released:
                    break
                batch = released[i : i + chunk]
                deliveries.extend(
                    self._emit(account, "gigs.added", [a.to_json_dict() for a in batch])
                )
            account.emitted_until = account.released_until
        elif schedule == "daily":
            pending = [
                a
                for a in released
                if a.start_time is not None and a.start_time > account.emitted_until
            ]
            by_day: dict[str, list[RideActivity]] = {}
            for a in pending:
                by_day.setdefault(a.start_time.date().isoformat(), []).append(a)
            for day in sorted(by_day):
                deliveries.extend(
                    self._emit(account, "gigs.added", [a.to_json_dict() for a in by_day[day]])
                )
            account.emitted_until = account.released_until
        else:
            raise BadRequest(f"unknown schedule {schedule!r}")
        return deliveries

    def advance(self, account_id: str, released_until: datetime | str) -> int:
        """Move the release watermark forward; returns newly visible rides."""
        account = self.account(account_id)
        if isinstance(released_until, str):
            released_until = parse_utc(released_until)
        before = len(self.released_history(account_id))
        if released_until > account.released_until:
            account.released_until = released_until
        return len(self.released_history(account_id)) - before

    def _emit(self, account: ProviderAccount, event_type: str, payload: list[dict]) -> list[Delivery]:
        if account.removed:
            return []
        account.event_seq += 1
        event = WebhookEvent(
            event_id=f"evt-{account.account_id}-{account.event_seq:05d}",
            event_type=event_type,
            account_id=account.account_id,
            payload=tuple(payload),
        )
        results: list[Delivery] = []
        body = event.body_bytes()
        headers = {
            "Content-Type": "application/json",
            SIGNATURE_HEADER: sign_body(self.webhook_secret, body),
        }
        for url in self._endpoints:
            delivered = False
            attempts = 0
            while attempts < self.max_attempts and not delivered:
                attempts += 1
                try:
                    delivered = bool(self.transport(url, body, headers))
                except Exception as exc:
                    logger.warning("transport error delivering %s: %s", event.event_id, exc)
                    delivered = False
                if not delivered and attempts < self.max_attempts:
                    self.sleeper(self.backoff_base * (2 ** (attempts - 1)))
            delivery = Delivery(event=event, url=url, attempts=attempts, delivered=delivered)
            self.deliveries.append(delivery)
            results.append(delivery)
            if not delivered:
                self.dead_letters.append(delivery)
        return results

    # -- persistence for the CLI -------------------------------------------

    def to_state_dict(self) -> dict[str, Any]:
        return {
            "accounts": [
                {
                    "account_id": a.account_id,
                    "driver_ref": a.driver_ref,
                    "connected_at": a.connected_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
                    "generator_seed": a.generator_seed,
                    "params": a.params.to_json_dict(),
                    "released_until": a.released_until.strftime("%Y-%m-%dT%H:%M:%SZ"),
                    "emitted_until": a.emitted_until.strftime("%Y-%m-%dT%H:%M:%SZ"),
                    "removed": a.removed,
                    "event_seq": a.event_seq,
                    "amendments": [
                        {"activity_id": aid, "changes": ch}
                        for aid, ch in self._amendments[a.account_id]
                    ],
                }
                for a in self._accounts.values()
            ]
        }

    def load_state_dict(self, state: dict[str, Any]) -> None:
        with self._lock:
            for raw in state.get("accounts", []):
                params = GeneratorParams.from_json_dict(raw["params"])
                account = ProviderAccount(
                    account_id=raw["account_id"],
                    driver_ref=raw["driver_ref"],
                    connected_at=parse_utc(raw["connected_at"]),
                    generator_seed=int(raw["generator_seed"]),
                    params=params,
                    released_until=parse_utc(raw["released_until"]),
                    emitted_until=parse_utc(raw["emitted_until"]),
                    removed=bool(raw.get("removed", False)),
                    event_seq=int(raw.get("event_seq", 0)),
                )
                self._accounts[account.account_id] = account
                history = generate_history(
                    account.account_id, account.driver_ref, params, account.generator_seed
                )
                self._histories[account.account_id] = history
                self._amendments[account.account_id] = []
                for amendment in raw.get("amendments", []):
                    aid = amendment["activity_id"]
                    changes = amendment["changes"]
                    for idx, activity in enumerate(history):
                        if activity.activity_id == aid:
                            history[idx] = with_source_digest(replace(activity, **changes))
                            break
                    self._amendments[account.account_id].append((aid, changes))

    def save_state(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_state_dict(), fh, indent=2, sort_keys=True)

    def load_state(self, path: str) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            self.load_state_dict(json.load(fh))
