"""Inference transports: an HTTP chat-completions client and a scripted
mock with configurable artificial delays.

The contract is send(messages, deadline_s) -> raw transcript text.  A reply
that cannot arrive inside the deadline surfaces as DeadlineExceededError and
is never delivered later.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from ..clock import Clock, RealClock
from .types import IntentError

DEFAULT_TOKEN_ENV = "HIAER_API_TOKEN"


class ClientError(IntentError):
    pass


class DeadlineExceededError(ClientError):
    pass


class TransportError(ClientError):
    pass


class HttpInferenceClient:
    """Chat-completions-compatible endpoint; bearer token read from an
    environment variable at call time."""

    def __init__(self, endpoint: str, model: str, token_env: str = DEFAULT_TOKEN_ENV):
        self.endpoint = endpoint
        self.model = model
        self.token_env = token_env

    @staticmethod
    def _wire_messages(messages) -> list:
        wire = []
        for msg in messages:
            parts = []
            for part in msg["content"]:
                if part["type"] == "text":
                    parts.append({"type": "text", "text": part["text"]})
                elif part["type"] == "image":
                    url = f"data:image/{part['encoding']};base64,{part['data_base64']}"
                    parts.append({"type": "image_url", "image_url": {"url": url}})
                else:
                    raise TransportError(f"unknown content part {part['type']!r}")
            wire.append({"role": msg["role"], "content": parts})
        return wire

    def send(self, messages, deadline_s: float) -> str:
        import httpx

        headers = {}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {"model": self.model, "messages": self._wire_messages(messages)}
        try:
            response = httpx.post(self.endpoint, json=body, headers=headers, timeout=deadline_s)
            response.raise_for_status()
            return response.json()["choices"][0]["message"]["content"]
        except httpx.TimeoutException as exc:
            raise DeadlineExceededError(f"no reply within {deadline_s}s") from exc
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise TransportError(str(exc)) from exc


class ScriptedInferenceClient:
    """Deterministic mock: replays (delay_s, transcript) pairs in order.

    With a real clock the delay is actually slept; with a virtual clock it
    is added to virtual time, which keeps replays exact.  A delay past the
    deadline consumes the deadline and raises, so the scripted reply is
    discarded exactly like a late network reply.
    """

    def __init__(self, replies, clock: Clock | None = None, exhausted: str = "raise"):
        if exhausted not in ("raise", "repeat_last", "cycle"):
            raise IntentError(f"unknown exhausted policy {exhausted!r}")
        self.replies = [(float(d), str(r)) for d, r in replies]
        if not self.replies:
            raise IntentError("scripted client needs at least one reply")
        self.clock = clock if clock is not None else RealClock()
        self.exhausted = exhausted
        self.calls = 0

    @classmethod
    def from_file(cls, path, clock: Clock | None = None, exhausted: str = "raise"):
        """Script file: JSON {"replies": [{"delay": s, "reply": text}, ...]}."""
        doc = json.loads(Path(path).read_text())
        return cls(
            [(entry["delay"], entry["reply"]) for entry in doc["replies"]],
            clock=clock,
            exhausted=exhausted,
        )

    def send(self, messages, deadline_s: float) -> str:
        index = self.calls
        self.calls += 1
        if index >= len(self.replies):
            if self.exhausted == "raise":
                raise TransportError("scripted replies exhausted")
            if self.exhausted == "repeat_last":
                index = len(self.replies) - 1
            else:
                index = index % len(self.replies)
        delay, reply = self.replies[index]
        if delay > deadline_s:
            self.clock.sleep(deadline_s)
            raise DeadlineExceededError(f"scripted delay {delay}s exceeds deadline {deadline_s}s")
        self.clock.sleep(delay)
        return reply
