"""Incident notification delivery and station speaker events.

Webhook deliveries POST a compact JSON body and retry with exponential
backoff; a failure after the last retry is reported in the receipt, never
raised into the event loop. With no webhook configured the notifier acts
as a local sink (receipts succeed, payloads are kept for inspection),
which is what replays and tests use.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .model import StationKind, StationPose

# Verbal reminder pool, cycled in order for deterministic warning streams.
WARNING_PHRASES = (
    "Your life matters, always wear PPE!",
    "Wearing PPE can save your life, wear it always",
    "PPE is your first line of protection, don't forget to wear it!",
)

PAYLOAD_FIELDS = ("incident_id", "kind", "text", "location", "snapshot_url", "t")


@dataclass(frozen=True)
class Receipt:
    ok: bool
    attempts: int
    status: Optional[int] = None
    error: Optional[str] = None


def _http_post(url: str, payload: dict, timeout: float) -> int:
    import httpx

    resp = httpx.post(url, json=payload, timeout=timeout)
    return resp.status_code


class Notifier:
    """Delivers incident payloads to a webhook, retrying transient failures.

    ``transport`` is injectable for tests: a callable (url, payload,
    timeout) -> status code, raising on connection failure. 4xx statuses
    are treated as permanent and not retried.
    """

    def __init__(
        self,
        webhook_url: Optional[str] = None,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        timeout: float = 5.0,
        transport: Optional[Callable] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.webhook_url = webhook_url
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.timeout = timeout
        self.transport = transport or _http_post
        self.sleep = sleep
        self.sent: list[dict] = []  # local sink when no webhook is configured

    def deliver(self, payload: dict) -> Receipt:
        missing = [k for k in PAYLOAD_FIELDS if k not in payload]
        if missing:
            raise ValueError(f"notification payload missing fields: {missing}")
        if self.webhook_url is None:
            self.sent.append(dict(payload))
            return Receipt(ok=True, attempts=0, status=None)

        last_error = None
        last_status = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                status = self.transport(self.webhook_url, payload, self.timeout)
                last_status = status
                if 200 <= status < 300:
                    return Receipt(ok=True, attempts=attempt, status=status)
                if 400 <= status < 500:
                    return Receipt(
                        ok=False,
                        attempts=attempt,
                        status=status,
                        error=f"permanent HTTP {status}",
                    )
                last_error = f"HTTP {status}"
            except Exception as exc:
                last_error = str(exc)
            if attempt < self.max_attempts:
                self.sleep(self.backoff_base * (2 ** (attempt - 1)))
        return Receipt(
            ok=False, attempts=self.max_attempts, status=last_status, error=last_error
        )


def speak(station: StationPose, phrase: str, t: float) -> dict:
    """Build a speaker event for an RGB-D station (the only kind with
    speakers). No audio is synthesized; the event goes to the action log."""
    if station.kind is not StationKind.RGBD:
        raise ValueError(f"station {station.id} has no speakers")
    return {"station": station.id, "phrase": phrase, "t": t}
