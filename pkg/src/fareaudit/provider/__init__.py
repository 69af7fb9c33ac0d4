"""Synthetic payroll-data provider: generator, fee model, gigs API, webhooks."""

from .fees import DEFAULT_CUTOVER, FeeEra, FeeModel, default_fee_model
from .generator import CITY_ZIPS, GeneratorParams, bind_driver, generate_history
from .service import (
    SIGNATURE_HEADER,
    AccountNotFound,
    BadRequest,
    Delivery,
    DuplicateAccount,
    ProviderAccount,
    ProviderError,
    ProviderMock,
    WebhookEvent,
    sign_body,
    verify_signature,
)

__all__ = [
    "DEFAULT_CUTOVER",
    "FeeEra",
    "FeeModel",
    "default_fee_model",
    "CITY_ZIPS",
    "GeneratorParams",
    "bind_driver",
    "generate_history",
    "SIGNATURE_HEADER",
    "AccountNotFound",
    "BadRequest",
    "Delivery",
    "DuplicateAccount",
    "ProviderAccount",
    "ProviderError",
    "ProviderMock",
    "WebhookEvent",
    "sign_body",
    "verify_signature",
]
