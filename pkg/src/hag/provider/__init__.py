"""World-knowledge model access: prompts, backends, validation and repair."""

from __future__ import annotations

from pathlib import Path

from .backends import (
    ChatBackend,
    ChatRequest,
    HttpChatBackend,
    RecordingBackend,
    ReplayBackend,
    offline_mode,
    read_transcript,
)
from .knowledge import KnowledgeProvider, ProviderParams, WeightedValue
from .mock import MockBackend
from .parsing import normalize, parse_structured

__all__ = [
    "ChatBackend",
    "ChatRequest",
    "HttpChatBackend",
    "KnowledgeProvider",
    "MockBackend",
    "ProviderParams",
    "RecordingBackend",
    "ReplayBackend",
    "WeightedValue",
    "make_provider",
    "normalize",
    "offline_mode",
    "parse_structured",
    "read_transcript",
]


def make_provider(
    mode: str = "mock",
    params: ProviderParams | None = None,
    model: str | None = None,
    seed: int = 0,
    transcript: str | Path | None = None,
    record: str | Path | None = None,
    mock_options: dict | None = None,
    **http_options,
) -> KnowledgeProvider:
    """Build a provider for ``mode`` in {"mock", "http", "replay"}.

    ``record`` wraps the backend so every exchange is appended to that JSONL
    file; ``transcript`` is the file a replay backend reads from.
    """
    if mode == "mock":
        backend = MockBackend(seed=seed, **(mock_options or {}))
    elif mode == "http":
        backend = HttpChatBackend(**http_options)
    elif mode == "replay":
        if transcript is None:
            raise ValueError("replay mode needs a transcript path")
        backend = ReplayBackend(transcript)
    else:
        raise ValueError(f"unknown provider mode {mode!r}")
    if record is not None:
        backend = RecordingBackend(backend, record)
    return KnowledgeProvider(backend, params=params, model=model)
