"""Persona text rendering and text embedders."""

from __future__ import annotations

import hashlib
import os
import re
import time
from collections.abc import Sequence
from typing import Protocol

import httpx
import numpy as np

from .errors import EmbedderUnreachable
from .persona import PersonaRecord
from .provider.backends import DEFAULT_BASE_URL, offline_mode

RECORD_BATCH = 32
TOPIC_BATCH = 1

_TOKEN = re.compile(r"[a-z0-9]+")


def render_persona(record: PersonaRecord) -> str:
    """Fixed one-sentence description over all twelve dimensions."""
    v = record.values.get
    return (
        f"A {v('age', 'Unknown')} {v('gender', 'Unknown')} from {v('country', 'Unknown')}"
        f" ({v('ethnicity', 'Unknown')}, speaks {v('language', 'Unknown')}),"
        f" {v('education', 'Unknown')} education, working as {v('occupation', 'Unknown')},"
        f" {v('income_level', 'Unknown')} income, financially {v('financial_status', 'Unknown')},"
        f" {v('social_class', 'Unknown')}, {v('marital_status', 'Unknown')},"
        f" religion: {v('religion', 'Unknown')}."
    )


class Embedder(Protocol):
    model: str

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class HashEmbedder:
    """Deterministic bag-of-words hashing embedder (unit-norm vectors)."""

    def __init__(self, dim: int = 256, model: str = "hash-bow-256"):
        self.dim = dim
        self.model = model

    def _one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for tok in _TOKEN.findall(text.lower()):
            h = hashlib.blake2b(tok.encode(), digest_size=8).digest()
            idx = int.from_bytes(h[:4], "little") % self.dim
            vec[idx] += 1.0 if h[4] & 1 else -1.0
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self._one(t) for t in texts]) if texts else np.zeros((0, self.dim))


class HttpEmbedder:
    """OpenAI-compatible ``/embeddings`` client; the model id is passed through."""

    def __init__(
        self,
        model: str = "sentence-transformers/all-MiniLM-L6-v2",
        base_url: str | None = None,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        offline: bool | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.model = model
        self.base_url = (
            base_url or os.environ.get("HAG_EMBED_URL") or os.environ.get("HAG_BASE_URL") or DEFAULT_BASE_URL
        ).rstrip("/")
        self.api_key = api_key or os.environ.get("HAG_API_KEY") or os.environ.get("OPENAI_API_KEY") or ""
        self.timeout = timeout
        self.max_retries = max_retries
        self.offline = offline_mode() if offline is None else offline
        self._transport = transport

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if self.offline:
            raise EmbedderUnreachable("network embedder used in offline mode")
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                with httpx.Client(timeout=self.timeout, transport=self._transport) as client:
                    resp = client.post(
                        f"{self.base_url}/embeddings", headers=headers, json={"model": self.model, "input": list(texts)}
                    )
                resp.raise_for_status()
                data = sorted(resp.json()["data"], key=lambda d: d.get("index", 0))
                return np.asarray([d["embedding"] for d in data], dtype=float)
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last = exc
                if attempt + 1 < self.max_retries:
                    time.sleep(0.5 * 2**attempt)
        raise EmbedderUnreachable(f"embedding endpoint failed: {last}")


def embed_texts(embedder: Embedder, texts: Sequence[str], batch_size: int = RECORD_BATCH) -> np.ndarray:
    chunks = [embedder.embed(texts[i : i + batch_size]) for i in range(0, len(texts), batch_size)]
    if not chunks:
        return np.zeros((0, 0))
    return np.vstack(chunks)


def embed_records(embedder: Embedder, records: Sequence[PersonaRecord]) -> np.ndarray:
    return embed_texts(embedder, [render_persona(r) for r in records], RECORD_BATCH)


def embed_topic(embedder: Embedder, topic: str) -> np.ndarray:
    return embed_texts(embedder, [topic], TOPIC_BATCH)[0]


def cosine(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1) * np.linalg.norm(vector)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = matrix @ vector / norms
    return np.nan_to_num(sims)
