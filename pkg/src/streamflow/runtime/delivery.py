"""At-most-once HTTP callback delivery: one request, no retry."""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass

import httpx

from ..model import ExternalTarget, SensorUpdate, Subscription

logger = logging.getLogger(__name__)


class DeliveryStatus(enum.Enum):
    DELIVERED = "delivered"
    FAILED = "failed"


@dataclass(frozen=True)
class Delivery:
    subscription_id: str
    status: DeliveryStatus
    detail: str = ""
    elapsed_ns: int = 0


def deliver(client: httpx.Client, sub: Subscription, su: SensorUpdate,
            timeout: float = 2.0) -> Delivery:
    if not isinstance(sub.kind, ExternalTarget):
        raise TypeError("only http.callback subscriptions are delivered over HTTP")
    start = time.perf_counter_ns()
    try:
        resp = client.request(sub.kind.method, sub.kind.callback_url, json=su.document,
                              timeout=timeout)
    except httpx.HTTPError as exc:
        detail = f"{type(exc).__name__}: {exc}"
        status = DeliveryStatus.FAILED
    else:
        if resp.is_success:
            detail, status = str(resp.status_code), DeliveryStatus.DELIVERED
        else:
            detail, status = f"HTTP {resp.status_code}", DeliveryStatus.FAILED
    if status is DeliveryStatus.FAILED:
        logger.warning("callback delivery failed for subscription %s: %s", sub.id, detail)
    return Delivery(sub.id, status, detail, time.perf_counter_ns() - start)
