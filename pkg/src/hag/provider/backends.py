"""Chat backends: OpenAI-compatible HTTP, transcript replay, and recording.

A backend turns a ``ChatRequest`` into raw response text.  It knows nothing
about demographic semantics; validation and repair live in
``KnowledgeProvider``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import defaultdict, deque
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import httpx

from ..errors import OfflineViolation, ProviderUnreachable, ReplayMiss

log = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.openai.com/v1"


def offline_mode() -> bool:
    return os.environ.get("HAG_OFFLINE", "").strip().lower() in ("1", "true", "yes", "on")


@dataclass(frozen=True)
class ChatRequest:
    task: str
    model: str
    temperature: float
    messages: tuple[Mapping[str, str], ...]
    # structured mirror of what the prompt asks; lets the mock answer without NLP
    payload: Mapping[str, Any] = field(default_factory=dict)
    attempt: int = 0

    def wire(self) -> dict:
        return {"model": self.model, "temperature": self.temperature, "messages": [dict(m) for m in self.messages]}

    @property
    def key(self) -> str:
        blob = json.dumps({"task": self.task, **self.wire()}, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ChatBackend(Protocol):
    kind: str

    def complete(self, request: ChatRequest) -> str: ...


class HttpChatBackend:
    """POSTs to ``{base_url}/chat/completions``.

    Credentials come from ``HAG_API_KEY`` (or ``OPENAI_API_KEY``) and the
    endpoint from ``HAG_BASE_URL`` (or ``OPENAI_BASE_URL``).
    """

    kind = "http"
    default_model = "gpt-4o"

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        max_in_flight: int = 4,
        offline: bool | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = (
            base_url or os.environ.get("HAG_BASE_URL") or os.environ.get("OPENAI_BASE_URL") or DEFAULT_BASE_URL
        ).rstrip("/")
        self.api_key = api_key or os.environ.get("HAG_API_KEY") or os.environ.get("OPENAI_API_KEY") or ""
        self.timeout = timeout
        self.max_retries = max_retries
        self.offline = offline_mode() if offline is None else offline
        self._gate = threading.BoundedSemaphore(max_in_flight)
        self._transport = transport

    def complete(self, request: ChatRequest) -> str:
        if self.offline:
            raise OfflineViolation("network backend used in offline mode")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                with self._gate, httpx.Client(timeout=self.timeout, transport=self._transport) as client:
                    resp = client.post(f"{self.base_url}/chat/completions", headers=headers, json=request.wire())
                if resp.status_code >= 500 or resp.status_code == 429:
                    raise httpx.HTTPStatusError(f"status {resp.status_code}", request=resp.request, response=resp)
                if resp.status_code >= 400:
                    raise ProviderUnreachable(f"chat endpoint returned {resp.status_code}: {resp.text[:200]}")
                body = resp.json()
                return body["choices"][0]["message"]["content"] or ""
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last = exc
                log.warning("chat request failed (attempt %d): %s", attempt + 1, exc)
                if attempt + 1 < self.max_retries:
                    time.sleep(0.5 * 2**attempt)
        raise ProviderUnreachable(f"chat endpoint unreachable after {self.max_retries} attempts: {last}")


def read_transcript(path: str | Path) -> list[dict]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(json.loads(line))
    return entries


class RecordingBackend:
    """Wraps a backend and logs every exchange as append-only JSONL."""

    def __init__(self, inner: ChatBackend, path: str | Path | None = None):
        self.inner = inner
        self.kind = inner.kind
        self.default_model = getattr(inner, "default_model", "unknown")
        self.path = Path(path) if path else None
        self.entries: list[dict] = []
        self._lock = threading.Lock()
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def complete(self, request: ChatRequest) -> str:
        t0 = time.perf_counter()
        response = self.inner.complete(request)
        # only remote latency is meaningful; local backends log 0 so transcripts stay reproducible
        latency = round(time.perf_counter() - t0, 6) if self.kind == "http" else 0.0
        entry = {
            "key": request.key,
            "task": request.task,
            "request": request.wire(),
            "response": response,
            "latency_s": latency,
        }
        with self._lock:
            self.entries.append(entry)
            if self.path:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
        return response


class ReplayBackend:
    """Serves recorded responses keyed by request fingerprint, in recorded order."""

    kind = "replay"

    def __init__(self, source: str | Path | list[dict]):
        entries = read_transcript(source) if isinstance(source, (str, Path)) else list(source)
        self._queues: dict[str, deque] = defaultdict(deque)
        for e in entries:
            self._queues[e["key"]].append(e["response"])
        self.default_model = entries[0]["request"]["model"] if entries else "replay"
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> str:
        with self._lock:
            queue = self._queues.get(request.key)
            if not queue:
                raise ReplayMiss(f"no recorded response for {request.task} request {request.key[:12]}")
            return queue.popleft()
