"""Survey delivery over single-use tokenized links.

One invite per driver, one response per driver, enforced at the
storage layer with an atomic consume-and-store. The personal take-rate
summary unlocks only after submission. Outbound text messages go
through a pluggable SMS adapter; the default just prints, and a
transcript adapter writes one JSON object per line for tests.
"""

from __future__ import annotations

import importlib.resources
import json
import logging
import secrets
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal
from typing import Any, Protocol

from .analytics.cleaning import clean
from .datastore import AccessToken, Conflict, Datastore, NotFound, hash_token
from .domain import format_utc

logger = logging.getLogger(__name__)

DEFAULT_MESSAGE_TEMPLATE = (
    "Your ride data has finished syncing. Please take the 3-question "
    "take-rate survey before viewing your personal summary: {url}"
)


class SurveyError(Exception):
    pass


class AlreadyInvited(SurveyError):
    pass


class InviteGone(SurveyError):
    """Unknown, tampered or already-consumed token."""


class ValidationError(SurveyError):
    pass


class SummaryLocked(SurveyError):
    pass


def load_survey_definition() -> dict[str, Any]:
    ref = importlib.resources.files("fareaudit") / "surveys" / "take_rate_v1.json"
    return json.loads(ref.read_text(encoding="utf-8"))


class SmsAdapter(Protocol):
    def send(self, phone: str, body: str) -> None: ...


class ConsoleSmsAdapter:
    def send(self, phone: str, body: str) -> None:
        print(f"[sms] to {phone}: {body}")


class TranscriptSmsAdapter:
    """Appends one JSON object per line: {phone, body, sent_at}."""

    def __init__(self, path: str) -> None:
        self.path = path

    def send(self, phone: str, body: str) -> None:
        line = json.dumps(
            {"phone": phone, "body": body, "sent_at": format_utc(datetime.now(timezone.utc))}
        )
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")


class MemorySmsAdapter:
    def __init__(self) -> None:
        self.sent: list[tuple[str, str]] = []

    def send(self, phone: str, body: str) -> None:
        self.sent.append((phone, body))


@dataclass
class SurveyService:
    store: Datastore
    sms: SmsAdapter
    base_url: str = "http://localhost:8000"
    message_template: str = DEFAULT_MESSAGE_TEMPLATE

    def issue_invite(self, driver_id: str) -> str:
        """Create the single-use invite and send exactly one message.

        Returns the raw token (only its hash is stored). The invite row
        is rolled back if the outbound message cannot be dispatched so a
        later trigger can retry cleanly.
        """
        if self.store.is_tombstoned(driver_id) or not self.store.driver_exists(driver_id):
            raise SurveyError(f"driver {driver_id} is not enrolled")
        if self.store.has_invite(driver_id):
            raise AlreadyInvited(driver_id)
        token = secrets.token_hex(16)  # 128-bit, unguessable
        now = datetime.now(timezone.utc)
        try:
            self.store.insert_survey_invite(driver_id, hash_token(token), now)
        except Conflict:
            raise AlreadyInvited(driver_id) from None
        url = f"{self.base_url.rstrip('/')}/survey/{token}"
        body = self.message_template.format(url=url)
        phone = self.store.get_profile(driver_id).phone
        try:
            self.sms.send(phone, body)
        except Exception as exc:
            # undo the claim so the trigger can retry on the next event
            self.store.delete_survey_invite(hash_token(token))
            raise SurveyError(f"sms dispatch failed: {exc}") from exc
        logger.info("survey invite issued for %s", driver_id)
        return token

    def fetch_survey(self, token: str) -> dict[str, Any]:
        """The survey definition, only while the token is live.

        Lookup is by token hash, so unknown and consumed tokens are
        indistinguishable and need no secret-dependent comparisons.
        """
        invite = self.store.get_invite(hash_token(token))
        if invite is None or invite["consumed"]:
            raise InviteGone("survey link is not available")
        return load_survey_definition()

    def submit(self, token: str, answers: dict[str, Any]) -> dict[str, Any]:
        """Validate and store the response, consuming the token atomically."""
        invite = self.store.get_invite(hash_token(token))
        if invite is None:
            raise InviteGone("survey link is not available")
        estimated = self._pct_answer(answers, "estimated_take_rate_pct")
        fair = self._pct_answer(answers, "fair_take_rate_pct")
        factors = answers.get("factors_text", "")
        if not isinstance(factors, str) or len(factors) > 2000:
            raise ValidationError("factors_text must be a string of at most 2000 chars")
        try:
            driver_id = self.store.consume_invite_with_response(
                hash_token(token), estimated, fair, factors, datetime.now(timezone.utc)
            )
        except Conflict:
            raise InviteGone("survey link is not available") from None
        response = self.store.get_response(driver_id)
        assert response is not None
        return response

    @staticmethod
    def _pct_answer(answers: dict[str, Any], key: str) -> float:
        value = answers.get(key)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{key} must be a number between 0 and 100")
        if not 0 <= value <= 100:
            raise ValidationError(f"{key} must be between 0 and 100, got {value}")
        return float(value)

    def personal_summary(self, driver_id: str) -> dict[str, Any]:
        """Average, highest and lowest take rate over the driver's retained rides.

        Locked until the survey is submitted; a driver whose rides were
        all excluded by cleaning gets an explicit no-analyzable-rides
        result rather than numbers.
        """
        if not self.store.driver_exists(driver_id):
            raise NotFound(f"driver {driver_id}")
        if self.store.get_response(driver_id) is None:
            raise SummaryLocked("complete the survey to view your summary")
        token = AccessToken("internal", "driver", driver_id, datetime.now(timezone.utc), None)
        retained, _ = clean(self.store.get_activities(token))
        if not retained:
            return {
                "driver_id": driver_id,
                "no_analyzable_rides": True,
                "n_rides": 0,
                "average_take_rate_pct": None,
                "highest_take_rate_pct": None,
                "lowest_take_rate_pct": None,
            }
        rates = [r.take_rate_pct for r in retained]
        average = (sum(rates, Decimal(0)) / len(rates)).quantize(Decimal("0.01"))
        return {
            "driver_id": driver_id,
            "no_analyzable_rides": False,
            "n_rides": len(rates),
            "average_take_rate_pct": float(average),
            "highest_take_rate_pct": float(max(rates)),
            "lowest_take_rate_pct": float(min(rates)),
        }
