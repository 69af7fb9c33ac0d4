"""Persistence with the platform's data-protection posture.

PII (names, phone numbers, consent) lives in its own SQLite database,
physically separate from the analytics database that holds trip rows,
sync state and survey answers. The only PII-store fields ever visible
on the analytics side are the opaque driver_id and affiliation_id.
Driver-scoped tokens can read exactly their own rows; hard deletion
purges every store synchronously and leaves a tombstone so replayed
provider events cannot resurrect a deleted driver.
"""

from __future__ import annotations

import hashlib
import json
import logging
import secrets
import sqlite3
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from .domain import RideActivity, format_utc, parse_utc
from .money import format_usd

logger = logging.getLogger(__name__)


class DatastoreError(Exception):
    pass


class ConsentRequired(DatastoreError):
    pass


class NotFound(DatastoreError):
    pass


class AuthError(DatastoreError):
    pass


class BatchRejected(DatastoreError):
    pass


class Conflict(DatastoreError):
    pass


class SyncPhase(str, Enum):
    LINKED = "linked"
    BACKFILLING = "backfilling"
    SYNCED = "synced"
    REFRESHING = "refreshing"
    UNLINKED = "unlinked"


# phase -> set of phases reachable in one step (same-phase writes are no-ops)
_PHASE_EDGES: dict[SyncPhase, set[SyncPhase]] = {
    SyncPhase.LINKED: {SyncPhase.BACKFILLING, SyncPhase.UNLINKED},
    SyncPhase.BACKFILLING: {SyncPhase.SYNCED, SyncPhase.UNLINKED},
    SyncPhase.SYNCED: {SyncPhase.REFRESHING, SyncPhase.UNLINKED},
    SyncPhase.REFRESHING: {SyncPhase.SYNCED, SyncPhase.UNLINKED},
    SyncPhase.UNLINKED: set(),
}


@dataclass(frozen=True)
class ConsentRecord:
    consented: bool
    consent_version: str
    consented_at: datetime


@dataclass(frozen=True)
class DriverProfile:
    driver_id: str
    display_name: str
    phone: str
    affiliation_id: str | None
    consent: ConsentRecord
    created_at: datetime


@dataclass(frozen=True)
class Affiliation:
    affiliation_id: str
    name: str
    region_tag: str | None = None


@dataclass(frozen=True)
class AccessToken:
    token_id: str
    scope: str  # "driver" or "admin"
    driver_id: str | None
    issued_at: datetime
    expires_at: datetime | None

    @classmethod
    def admin(cls) -> "AccessToken":
        now = datetime.now(timezone.utc)
        return cls("admin", "admin", None, now, None)


@dataclass(frozen=True)
class SyncState:
    driver_id: str
    phase: SyncPhase
    activities_ingested: int
    last_event_at: datetime | None
    survey_invited: bool
    tombstoned: bool
    provider_account_id: str | None = None
    backfill_cursor: str | None = None


@dataclass(frozen=True)
class DeletionReceipt:
    driver_id: str
    deleted_at: datetime
    removed: dict[str, int]  # keys: pii, activities, surveys, sync


_PII_SCHEMA = """
CREATE TABLE IF NOT EXISTS driver_profiles (
    driver_id TEXT PRIMARY KEY,
    display_name TEXT NOT NULL,
    phone TEXT NOT NULL,
    affiliation_id TEXT,
    consented INTEGER NOT NULL,
    consent_version TEXT NOT NULL,
    consented_at TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS access_tokens (
    token TEXT PRIMARY KEY,
    driver_id TEXT NOT NULL,
    issued_at TEXT NOT NULL,
    expires_at TEXT NOT NULL
);
"""

_ANALYTICS_SCHEMA = """
CREATE TABLE IF NOT EXISTS affiliations (
    affiliation_id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    name_key TEXT NOT NULL UNIQUE,
    region_tag TEXT
);
CREATE TABLE IF NOT EXISTS driver_affiliations (
    driver_id TEXT PRIMARY KEY,
    affiliation_id TEXT
);
CREATE TABLE IF NOT EXISTS activities (
    activity_id TEXT PRIMARY KEY,
    driver_id TEXT NOT NULL,
    activity_type TEXT NOT NULL,
    status TEXT NOT NULL,
    start_time TEXT,
    end_time TEXT,
    distance_miles REAL,
    duration_minutes REAL,
    start_zip TEXT,
    end_zip TEXT,
    rider_price INTEGER,
    platform_fees INTEGER,
    base_pay INTEGER,
    tips INTEGER,
    bonus INTEGER,
    surge_flag INTEGER NOT NULL,
    source_payload_digest TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_activities_driver ON activities(driver_id);
CREATE TABLE IF NOT EXISTS sync_state (
    driver_id TEXT PRIMARY KEY,
    phase TEXT NOT NULL,
    activities_ingested INTEGER NOT NULL DEFAULT 0,
    last_event_at TEXT,
    survey_invited INTEGER NOT NULL DEFAULT 0,
    provider_account_id TEXT,
    backfill_cursor TEXT
);
CREATE TABLE IF NOT EXISTS survey_invites (
    token_hash TEXT PRIMARY KEY,
    driver_id TEXT NOT NULL UNIQUE,
    issued_at TEXT NOT NULL,
    consumed INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS survey_responses (
    driver_id TEXT PRIMARY KEY,
    estimated_take_rate_pct REAL NOT NULL,
    fair_take_rate_pct REAL NOT NULL,
    factors_text TEXT NOT NULL,
    submitted_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS tombstones (
    driver_id TEXT PRIMARY KEY,
    deleted_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS webhook_events_seen (
    event_id TEXT PRIMARY KEY,
    received_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS audit_log (
    entry_id INTEGER PRIMARY KEY AUTOINCREMENT,
    at TEXT NOT NULL,
    token_id TEXT NOT NULL,
    requested TEXT NOT NULL,
    reason TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS reports (
    report_id TEXT PRIMARY KEY,
    created_at TEXT NOT NULL,
    status TEXT NOT NULL,
    document TEXT
);
"""

_ACTIVITY_COLUMNS = (
    "activity_id, driver_id, activity_type, status, start_time, end_time, "
    "distance_miles, duration_minutes, start_zip, end_zip, rider_price, "
    "platform_fees, base_pay, tips, bonus, surge_flag, source_payload_digest"
)


def _activity_row(a: RideActivity) -> tuple:
    return (
        a.activity_id,
        a.driver_id,
        a.activity_type.value,
        a.status.value,
        None if a.start_time is None else format_utc(a.start_time),
        None if a.end_time is None else format_utc(a.end_time),
        a.distance_miles,
        a.duration_minutes,
        a.start_zip,
        a.end_zip,
        a.rider_price,
        a.platform_fees,
        a.base_pay,
        a.tips,
        a.bonus,
        1 if a.surge_flag else 0,
        a.source_payload_digest,
    )


def _row_activity(row: sqlite3.Row) -> RideActivity:
    from .domain import ActivityStatus, ActivityType

    return RideActivity(
        activity_id=row["activity_id"],
        driver_id=row["driver_id"],
        activity_type=ActivityType(row["activity_type"]),
        status=ActivityStatus(row["status"]),
        start_time=None if row["start_time"] is None else parse_utc(row["start_time"]),
        end_time=None if row["end_time"] is None else parse_utc(row["end_time"]),
        distance_miles=row["distance_miles"],
        duration_minutes=row["duration_minutes"],
        start_zip=row["start_zip"],
        end_zip=row["end_zip"],
        rider_price=row["rider_price"],
        platform_fees=row["platform_fees"],
        base_pay=row["base_pay"],
        tips=row["tips"],
        bonus=row["bonus"],
        surge_flag=bool(row["surge_flag"]),
        source_payload_digest=row["source_payload_digest"],
    )


def hash_token(token: str) -> str:
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


class Datastore:
    """Two-database store: isolated PII plus the analytics tables."""

    def __init__(self, data_dir: str | Path | None = None) -> None:
        self.data_dir = Path(data_dir) if data_dir is not None else None
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            pii_path = str(self.data_dir / "pii.sqlite")
            data_path = str(self.data_dir / "analytics.sqlite")
        else:
            pii_path = data_path = ":memory:"
        self._pii = sqlite3.connect(pii_path, check_same_thread=False)
        self._data = sqlite3.connect(data_path, check_same_thread=False)
        for conn in (self._pii, self._data):
            conn.row_factory = sqlite3.Row
        self._pii.executescript(_PII_SCHEMA)
        self._data.executescript(_ANALYTICS_SCHEMA)
        self._lock = threading.RLock()
        self._driver_locks: dict[str, threading.RLock] = {}

    def close(self) -> None:
        self._pii.close()
        self._data.close()

    def driver_lock(self, driver_id: str) -> threading.RLock:
        with self._lock:
            return self._driver_locks.setdefault(driver_id, threading.RLock())

    # -- affiliations -------------------------------------------------------

    def ensure_affiliation(self, name: str, region_tag: str | None = None) -> Affiliation:
        key = name.strip().lower()
        if not key:
            raise DatastoreError("affiliation name must be non-empty")
        with self._lock:
            row = self._data.execute(
                "SELECT * FROM affiliations WHERE name_key = ?", (key,)
            ).fetchone()
            if row:
                return Affiliation(row["affiliation_id"], row["name"], row["region_tag"])
            affiliation_id = "aff-" + hashlib.sha256(key.encode()).hexdigest()[:10]
            with self._data:
                self._data.execute(
                    "INSERT INTO affiliations (affiliation_id, name, name_key, region_tag)"
                    " VALUES (?, ?, ?, ?)",
                    (affiliation_id, name.strip(), key, region_tag),
                )
            return Affiliation(affiliation_id, name.strip(), region_tag)

    def get_affiliation(self, affiliation_id: str) -> Affiliation:
        with self._lock:
            row = self._data.execute(
                "SELECT * FROM affiliations WHERE affiliation_id = ?", (affiliation_id,)
            ).fetchone()
        if not row:
            raise NotFound(f"affiliation {affiliation_id}")
        return Affiliation(row["affiliation_id"], row["name"], row["region_tag"])

    def list_affiliations(self) -> list[Affiliation]:
        with self._lock:
            rows = self._data.execute("SELECT * FROM affiliations ORDER BY name").fetchall()
        return [Affiliation(r["affiliation_id"], r["name"], r["region_tag"]) for r in rows]

    # -- drivers and consent --------------------------------------------------

    def enroll_driver(
        self,
        display_name: str,
        phone: str,
        consent: ConsentRecord,
        affiliation_id: str | None = None,
        driver_id: str | None = None,
    ) -> DriverProfile:
        if not consent.consented:
            raise ConsentRequired("enrollment requires consent")
        if affiliation_id is not None:
            self.get_affiliation(affiliation_id)  # must exist
        driver_id = driver_id or ("drv-" + secrets.token_hex(6))
        now = datetime.now(timezone.utc)
        with self._lock:
            with self._pii:
                self._pii.execute(
                    "INSERT INTO driver_profiles VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                    (
                        driver_id,
                        display_name,
                        phone,
                        affiliation_id,
                        1,
                        consent.consent_version,
                        format_utc(consent.consented_at),
                        format_utc(now),
                    ),
                )
            with self._data:
                self._data.execute(
                    "INSERT OR REPLACE INTO driver_affiliations VALUES (?, ?)",
                    (driver_id, affiliation_id),
                )
        return DriverProfile(driver_id, display_name, phone, affiliation_id, consent, now)

    def get_profile(self, driver_id: str) -> DriverProfile:
        with self._lock:
            row = self._pii.execute(
                "SELECT * FROM driver_profiles WHERE driver_id = ?", (driver_id,)
            ).fetchone()
        if not row:
            raise NotFound(f"driver {driver_id}")
        consent = ConsentRecord(
            bool(row["consented"]), row["consent_version"], parse_utc(row["consented_at"])
        )
        return DriverProfile(
            row["driver_id"],
            row["display_name"],
            row["phone"],
            row["affiliation_id"],
            consent,
            parse_utc(row["created_at"]),
        )

    def driver_exists(self, driver_id: str) -> bool:
        with self._lock:
            row = self._pii.execute(
                "SELECT 1 FROM driver_profiles WHERE driver_id = ?", (driver_id,)
            ).fetchone()
        return row is not None

    def has_consent(self, driver_id: str) -> bool:
        with self._lock:
            row = self._pii.execute(
                "SELECT consented FROM driver_profiles WHERE driver_id = ?", (driver_id,)
            ).fetchone()
        return bool(row and row["consented"])

    def is_tombstoned(self, driver_id: str) -> bool:
        with self._lock:
            row = self._data.execute(
                "SELECT 1 FROM tombstones WHERE driver_id = ?", (driver_id,)
            ).fetchone()
        return row is not None

    def driver_affiliation(self, driver_id: str) -> str | None:
        with self._lock:
            row = self._data.execute(
                "SELECT affiliation_id FROM driver_affiliations WHERE driver_id = ?",
                (driver_id,),
            ).fetchone()
        return row["affiliation_id"] if row else None

    # -- access tokens ---------------------------------------------------------

    def issue_driver_token(self, driver_id: str, ttl: timedelta = timedelta(days=90)) -> str:
        if not self.driver_exists(driver_id):
            raise NotFound(f"driver {driver_id}")
        token = "tok-" + secrets.token_hex(16)
        now = datetime.now(timezone.utc)
        with self._pii:
            self._pii.execute(
                "INSERT INTO access_tokens VALUES (?, ?, ?, ?)",
                (token, driver_id, format_utc(now), format_utc(now + ttl)),
            )
        return token

    def resolve_token(self, token: str) -> AccessToken:
        with self._lock:
            row = self._pii.execute(
                "SELECT * FROM access_tokens WHERE token = ?", (token,)
            ).fetchone()
        if not row:
            raise AuthError("unknown token")
        expires = parse_utc(row["expires_at"])
        if expires < datetime.now(timezone.utc):
            raise AuthError("token expired")
        return AccessToken(token, "driver", row["driver_id"], parse_utc(row["issued_at"]), expires)

    # -- activities ---------------------------------------------------------------

    def put_activities(self, driver_id: str, activities: list[RideActivity]) -> int:
        """Transactional per-driver upsert; returns rows inserted or changed."""
        if self.is_tombstoned(driver_id):
            raise ConsentRequired(f"driver {driver_id} is deleted (tombstoned)")
        if not self.has_consent(driver_id):
            raise ConsentRequired(f"no consent on file for {driver_id}")
        rows = []
        for a in activities:
            if not isinstance(a, RideActivity):
                raise BatchRejected(f"not a RideActivity: {a!r}")
            if a.driver_id != driver_id:
                raise BatchRejected(
                    f"activity {a.activity_id} is bound to {a.driver_id!r}, not {driver_id!r}"
                )
            if not a.source_payload_digest:
                raise BatchRejected(f"activity {a.activity_id} missing source digest")
            rows.append(_activity_row(a))
        with self.driver_lock(driver_id), self._lock:
            existing = {
                r["activity_id"]: r["source_payload_digest"]
                for r in self._data.execute(
                    "SELECT activity_id, source_payload_digest FROM activities"
                    " WHERE driver_id = ?",
                    (driver_id,),
                )
            }
            changed = 0
            with self._data:
                for a, row in zip(activities, rows):
                    prior = existing.get(a.activity_id)
                    if prior is None:
                        self._data.execute(
                            f"INSERT INTO activities ({_ACTIVITY_COLUMNS}) VALUES "
                            f"({', '.join('?' * 17)})",
                            row,
                        )
                        changed += 1
                    elif prior != a.source_payload_digest:
                        self._data.execute(
                            f"REPLACE INTO activities ({_ACTIVITY_COLUMNS}) VALUES "
                            f"({', '.join('?' * 17)})",
                            row,
                        )
                        changed += 1
            return changed

    def get_activities(
        self,
        token: AccessToken,
        driver_id: str | None = None,
    ) -> list[RideActivity]:
        """Row-level access: driver tokens see their own rows, full stop."""
        if token.scope == "driver":
            if driver_id is not None and driver_id != token.driver_id:
                self._audit(token.token_id, f"activities:{driver_id}", "cross-driver read denied")
                return []
            driver_id = token.driver_id
        elif token.scope != "admin":
            raise AuthError(f"unknown scope {token.scope!r}")
        with self._lock:
            if driver_id is None:
                rows = self._data.execute(
                    "SELECT * FROM activities ORDER BY start_time, activity_id"
                ).fetchall()
            else:
                rows = self._data.execute(
                    "SELECT * FROM activities WHERE driver_id = ?"
                    " ORDER BY start_time, activity_id",
                    (driver_id,),
                ).fetchall()
        return [_row_activity(r) for r in rows]

    def count_activities(self, driver_id: str) -> int:
        with self._lock:
            row = self._data.execute(
                "SELECT COUNT(*) AS n FROM activities WHERE driver_id = ?", (driver_id,)
            ).fetchone()
        return int(row["n"])

    def count_completed_rideshare(self, driver_id: str) -> int:
        with self._lock:
            row = self._data.execute(
                "SELECT COUNT(*) AS n FROM activities WHERE driver_id = ?"
                " AND activity_type = 'rideshare' AND status = 'completed'",
                (driver_id,),
            ).fetchone()
        return int(row["n"])

    def activities_digest(self, driver_id: str | None = None) -> str:
        """Digest that is a pure function of the set of (id, source digest)."""
        with self._lock:
            if driver_id is None:
                rows = self._data.execute(
                    "SELECT activity_id, source_payload_digest FROM activities"
                    " ORDER BY activity_id"
                ).fetchall()
            else:
                rows = self._data.execute(
                    "SELECT activity_id, source_payload_digest FROM activities"
                    " WHERE driver_id = ? ORDER BY activity_id",
                    (driver_id,),
                ).fetchall()
        acc = hashlib.sha256()
        for r in rows:
            acc.update(r["activity_id"].encode())
            acc.update(r["source_payload_digest"].encode())
        return acc.hexdigest()

    # -- sync state -----------------------------------------------------------------

    def get_sync_state(self, driver_id: str) -> SyncState | None:
        with self._lock:
            row = self._data.execute(
                "SELECT * FROM sync_state WHERE driver_id = ?", (driver_id,)
            ).fetchone()
        if not row:
            return None
        return SyncState(
            driver_id=row["driver_id"],
            phase=SyncPhase(row["phase"]),
            activities_ingested=int(row["activities_ingested"]),
            last_event_at=None
            if row["last_event_at"] is None
            else parse_utc(row["last_event_at"]),
            survey_invited=bool(row["survey_invited"]),
            tombstoned=self.is_tombstoned(driver_id),
            provider_account_id=row["provider_account_id"],
            backfill_cursor=row["backfill_cursor"],
        )

    def create_sync_state(self, driver_id: str, provider_account_id: str) -> SyncState:
        with self._lock, self._data:
            self._data.execute(
                "INSERT INTO sync_state (driver_id, phase, provider_account_id)"
                " VALUES (?, ?, ?)",
                (driver_id, SyncPhase.LINKED.value, provider_account_id),
            )
        state = self.get_sync_state(driver_id)
        assert state is not None
        return state

    def set_phase(self, driver_id: str, phase: SyncPhase) -> None:
        state = self.get_sync_state(driver_id)
        if state is None:
            raise NotFound(f"no sync state for {driver_id}")
        if phase != state.phase and phase not in _PHASE_EDGES[state.phase]:
            raise DatastoreError(f"illegal phase transition {state.phase.value} -> {phase.value}")
        with self._lock, self._data:
            self._data.execute(
                "UPDATE sync_state SET phase = ? WHERE driver_id = ?",
                (phase.value, driver_id),
            )

    def record_ingest(self, driver_id: str, event_at: datetime | None = None) -> None:
        """Refresh the stored count from the activities table (the invariant
        is that the counter equals the number of distinct stored rows)."""
        n = self.count_activities(driver_id)
        with self._lock, self._data:
            self._data.execute(
                "UPDATE sync_state SET activities_ingested = ?, last_event_at = ?"
                " WHERE driver_id = ?",
                (n, format_utc(event_at or datetime.now(timezone.utc)), driver_id),
            )

    def set_backfill_cursor(self, driver_id: str, cursor: str | None) -> None:
        with self._lock, self._data:
            self._data.execute(
                "UPDATE sync_state SET backfill_cursor = ? WHERE driver_id = ?",
                (cursor, driver_id),
            )

    def latch_survey_invited(self, driver_id: str) -> bool:
        """Flip the one-way invite latch; False when it was already set."""
        with self._lock, self._data:
            cur = self._data.execute(
                "UPDATE sync_state SET survey_invited = 1"
                " WHERE driver_id = ? AND survey_invited = 0",
                (driver_id,),
            )
            return cur.rowcount == 1

    def sync_states(self) -> list[SyncState]:
        with self._lock:
            rows = self._data.execute("SELECT driver_id FROM sync_state").fetchall()
        states = [self.get_sync_state(r["driver_id"]) for r in rows]
        return [s for s in states if s is not None]

    def account_driver(self, provider_account_id: str) -> str | None:
        with self._lock:
            row = self._data.execute(
                "SELECT driver_id FROM sync_state WHERE provider_account_id = ?",
                (provider_account_id,),
            ).fetchone()
        return row["driver_id"] if row else None

    # -- webhook replay protection -------------------------------------------------

    def mark_event_seen(self, event_id: str) -> bool:
        """True the first time an event id is seen, False on replays."""
        with self._lock:
            try:
                with self._data:
                    self._data.execute(
                        "INSERT INTO webhook_events_seen VALUES (?, ?)",
                        (event_id, format_utc(datetime.now(timezone.utc))),
                    )
                return True
            except sqlite3.IntegrityError:
                return False

    # -- survey persistence -----------------------------------------------------------

    def insert_survey_invite(self, driver_id: str, token_hash: str, issued_at: datetime) -> None:
        with self._lock:
            try:
                with self._data:
                    self._data.execute(
                        "INSERT INTO survey_invites (token_hash, driver_id, issued_at)"
                        " VALUES (?, ?, ?)",
                        (token_hash, driver_id, format_utc(issued_at)),
                    )
            except sqlite3.IntegrityError as exc:
                raise Conflict(f"invite already exists for {driver_id}") from exc

    def delete_survey_invite(self, token_hash: str) -> None:
        with self._lock, self._data:
            self._data.execute(
                "DELETE FROM survey_invites WHERE token_hash = ?", (token_hash,)
            )

    def get_invite(self, token_hash: str) -> dict[str, Any] | None:
        with self._lock:
            row = self._data.execute(
                "SELECT * FROM survey_invites WHERE token_hash = ?", (token_hash,)
            ).fetchone()
        if not row:
            return None
        return {
            "token_hash": row["token_hash"],
            "driver_id": row["driver_id"],
            "issued_at": parse_utc(row["issued_at"]),
            "consumed": bool(row["consumed"]),
        }

    def has_invite(self, driver_id: str) -> bool:
        with self._lock:
            row = self._data.execute(
                "SELECT 1 FROM survey_invites WHERE driver_id = ?", (driver_id,)
            ).fetchone()
        return row is not None

    def consume_invite_with_response(
        self,
        token_hash: str,
        estimated_pct: float,
        fair_pct: float,
        factors_text: str,
        submitted_at: datetime,
    ) -> str:
        """Atomically consume the invite token and store the response.

        The UPDATE's consumed=0 guard is the compare-and-set: exactly one
        of two racing submissions can win. Returns the driver_id.
        """
        with self._lock:
            with self._data:
                cur = self._data.execute(
                    "UPDATE survey_invites SET consumed = 1"
                    " WHERE token_hash = ? AND consumed = 0",
                    (token_hash,),
                )
                if cur.rowcount != 1:
                    raise Conflict("invite token missing or already consumed")
                row = self._data.execute(
                    "SELECT driver_id FROM survey_invites WHERE token_hash = ?",
                    (token_hash,),
                ).fetchone()
                driver_id = row["driver_id"]
                self._data.execute(
                    "INSERT INTO survey_responses VALUES (?, ?, ?, ?, ?)",
                    (
                        driver_id,
                        estimated_pct,
                        fair_pct,
                        factors_text,
                        format_utc(submitted_at),
                    ),
                )
        return driver_id

    def get_response(self, driver_id: str) -> dict[str, Any] | None:
        with self._lock:
            row = self._data.execute(
                "SELECT * FROM survey_responses WHERE driver_id = ?", (driver_id,)
            ).fetchone()
        if not row:
            return None
        return {
            "driver_id": row["driver_id"],
            "estimated_take_rate_pct": row["estimated_take_rate_pct"],
            "fair_take_rate_pct": row["fair_take_rate_pct"],
            "factors_text": row["factors_text"],
            "submitted_at": parse_utc(row["submitted_at"]),
        }

    def all_responses(self) -> list[dict[str, Any]]:
        with self._lock:
            rows = self._data.execute(
                "SELECT * FROM survey_responses ORDER BY driver_id"
            ).fetchall()
        return [
            {
                "driver_id": r["driver_id"],
                "estimated_take_rate_pct": r["estimated_take_rate_pct"],
                "fair_take_rate_pct": r["fair_take_rate_pct"],
                "factors_text": r["factors_text"],
                "submitted_at": parse_utc(r["submitted_at"]),
            }
            for r in rows
        ]

    # -- deletion -------------------------------------------------------------------------

    def delete_driver(self, driver_id: str) -> DeletionReceipt:
        """Synchronous hard delete across every store; tombstone retained."""
        now = datetime.now(timezone.utc)
        with self.driver_lock(driver_id), self._lock:
            if self.is_tombstoned(driver_id):
                return DeletionReceipt(
                    driver_id, now, {"pii": 0, "activities": 0, "surveys": 0, "sync": 0}
                )
            if not self.driver_exists(driver_id):
                raise NotFound(f"driver {driver_id}")
            with self._pii:
                pii_n = self._pii.execute(
                    "DELETE FROM driver_profiles WHERE driver_id = ?", (driver_id,)
                ).rowcount
                self._pii.execute(
                    "DELETE FROM access_tokens WHERE driver_id = ?", (driver_id,)
                )
            with self._data:
                act_n = self._data.execute(
                    "DELETE FROM activities WHERE driver_id = ?", (driver_id,)
                ).rowcount
                survey_n = self._data.execute(
                    "DELETE FROM survey_responses WHERE driver_id = ?", (driver_id,)
                ).rowcount
                self._data.execute(
                    "DELETE FROM survey_invites WHERE driver_id = ?", (driver_id,)
                )
                sync_n = self._data.execute(
                    "DELETE FROM sync_state WHERE driver_id = ?", (driver_id,)
                ).rowcount
                self._data.execute(
                    "DELETE FROM driver_affiliations WHERE driver_id = ?", (driver_id,)
                )
                self._data.execute(
                    "INSERT INTO tombstones VALUES (?, ?)", (driver_id, format_utc(now))
                )
            logger.info("deleted driver %s: pii=%d activities=%d", driver_id, pii_n, act_n)
            return DeletionReceipt(
                driver_id,
                now,
                {"pii": pii_n, "activities": act_n, "surveys": survey_n, "sync": sync_n},
            )

    def event_seen(self, event_id: str) -> bool:
        with self._lock:
            row = self._data.execute(
                "SELECT 1 FROM webhook_events_seen WHERE event_id = ?", (event_id,)
            ).fetchone()
        return row is not None

    def scan_driver_rows(self, driver_id: str) -> dict[str, int]:
        """Row counts per store for one driver (deletion-completeness checks)."""
        counts = {}
        with self._lock:
            counts["driver_profiles"] = self._pii.execute(
                "SELECT COUNT(*) AS n FROM driver_profiles WHERE driver_id = ?", (driver_id,)
            ).fetchone()["n"]
            counts["access_tokens"] = self._pii.execute(
                "SELECT COUNT(*) AS n FROM access_tokens WHERE driver_id = ?", (driver_id,)
            ).fetchone()["n"]
        for table in (
            "activities",
            "sync_state",
            "survey_invites",
            "survey_responses",
            "driver_affiliations",
            "tombstones",
        ):
            with self._lock:
                counts[table] = self._data.execute(
                    f"SELECT COUNT(*) AS n FROM {table} WHERE driver_id = ?", (driver_id,)
                ).fetchone()["n"]
        return counts

    # -- audit ----------------------------------------------------------------------------

    def _audit(self, token_id: str, requested: str, reason: str) -> None:
        with self._lock, self._data:
            self._data.execute(
                "INSERT INTO audit_log (at, token_id, requested, reason) VALUES (?, ?, ?, ?)",
                (format_utc(datetime.now(timezone.utc)), token_id, requested, reason),
            )

    def audit_entries(self) -> list[dict[str, Any]]:
        with self._lock:
            rows = self._data.execute("SELECT * FROM audit_log ORDER BY entry_id").fetchall()
        return [dict(r) for r in rows]

    # -- reports --------------------------------------------------------------------------

    def store_report(self, report_id: str, status: str, document: str | None) -> None:
        with self._lock, self._data:
            self._data.execute(
                "INSERT OR REPLACE INTO reports VALUES (?, ?, ?, ?)",
                (report_id, format_utc(datetime.now(timezone.utc)), status, document),
            )

    def get_report(self, report_id: str) -> dict[str, Any] | None:
        with self._lock:
            row = self._data.execute(
                "SELECT * FROM reports WHERE report_id = ?", (report_id,)
            ).fetchone()
        return dict(row) if row else None

    # -- export and digests ------------------------------------------------------------------

    def export_all_analytics(self) -> dict[str, list[dict[str, Any]]]:
        """Every analytics-store table as plain dicts (PII-isolation audits)."""
        out: dict[str, list[dict[str, Any]]] = {}
        tables = [
            "affiliations",
            "driver_affiliations",
            "activities",
            "sync_state",
            "survey_invites",
            "survey_responses",
            "tombstones",
            "webhook_events_seen",
            "audit_log",
        ]
        for table in tables:
            with self._lock:
                rows = self._data.execute(f"SELECT * FROM {table}").fetchall()
            out[table] = [dict(r) for r in rows]
        return out

    def export_activities_ndjson(self, fh) -> int:
        n = 0
        for a in self.get_activities(AccessToken.admin()):
            fh.write(json.dumps(a.to_json_dict(), sort_keys=True) + "\n")
            n += 1
        return n

    def export_activities_csv(self, fh) -> int:
        """Per-ride CSV using the summary-table column vocabulary."""
        import csv

        writer = csv.writer(fh)
        writer.writerow(
            [
                "Driver",
                "Activity",
                "Distance (miles)",
                "Duration (minutes)",
                "Ride Price ($)",
                "Fees ($)",
                "Base Pay ($)",
                "Tips ($)",
            ]
        )
        n = 0
        for a in self.get_activities(AccessToken.admin()):
            writer.writerow(
                [
                    a.driver_id,
                    a.activity_id,
                    a.distance_miles,
                    a.duration_minutes,
                    "" if a.rider_price is None else format_usd(a.rider_price),
                    "" if a.platform_fees is None else format_usd(a.platform_fees),
                    "" if a.base_pay is None else format_usd(a.base_pay),
                    "" if a.tips is None else format_usd(a.tips),
                ]
            )
            n += 1
        return n

    def state_digest(self) -> str:
        """Digest of logical platform state, excluding wall-clock fields.

        Used by replay/idempotency tests: any duplication or per-driver
        order-preserving shuffle of the same event log must land here.
        """
        acc = hashlib.sha256()
        acc.update(self.activities_digest().encode())
        with self._lock:
            rows = self._data.execute(
                "SELECT driver_id, phase, activities_ingested, survey_invited"
                " FROM sync_state ORDER BY driver_id"
            ).fetchall()
        for r in rows:
            acc.update(
                f"{r['driver_id']}|{r['phase']}|{r['activities_ingested']}|{r['survey_invited']}".encode()
            )
        for resp in self.all_responses():
            acc.update(
                f"{resp['driver_id']}|{resp['estimated_take_rate_pct']}|{resp['fair_take_rate_pct']}".encode()
            )
        with self._lock:
            rows = self._data.execute(
                "SELECT driver_id FROM tombstones ORDER BY driver_id"
            ).fetchall()
        for r in rows:
            acc.update(f"tomb:{r['driver_id']}".encode())
        return acc.hexdigest()
