"""Run configuration: a JSON file with environment overrides."""

from __future__ import annotations

import json
import os
from collections.abc import Mapping
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError

PROVIDER_MODES = ("mock", "http", "replay")
EMBEDDER_MODES = ("hash", "http")
JUDGE_MODES = ("none", "mock", "http", "replay")


@dataclass(frozen=True)
class TopicSpec:
    """A topic to generate for, with where its ground truth comes from.

    ``gt`` names a saved population; otherwise ``corpus`` and ``theme`` are
    turned into one through the benchmark builder.
    """

    label: str
    topic: str
    gt: str | None = None
    corpus: str | None = None
    theme: str | None = None

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> TopicSpec:
        unknown = set(doc) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown topic fields: {sorted(unknown)}")
        if "topic" not in doc:
            raise ConfigError("each topic needs a 'topic' description")
        return cls(**{"label": doc.get("label") or _slug(doc["topic"]), **{k: v for k, v in doc.items() if k != "label"}})


def _slug(text: str) -> str:
    out = "".join(c.lower() if c.isalnum() else "-" for c in text)
    return "-".join(p for p in out.split("-") if p)[:48] or "topic"


@dataclass(frozen=True)
class RunConfig:
    # provider
    provider: str = "mock"
    base_url: str | None = None
    model: str | None = None
    temperature: float = 0.0
    retries: int = 3
    max_in_flight: int = 8
    timeout: float = 120.0
    transcript: str | None = None
    record: str | None = None
    # embedder
    embedder: str = "hash"
    embed_model: str = "hash-bow-256"
    # judge
    judge: str = "mock"
    # seeds and sizes
    seed: int = 0
    N: int = 200
    max_depth: int = 5
    max_branches: int = 5
    min_path_prob: float = 0.0
    K: int = 4
    epsilon: float = 1e-6
    workers: int = 4
    offline: bool = False
    # paths
    schema: str | None = None
    db: str | None = None
    output_dir: str = "runs"
    label: str = "run"
    topics: tuple[TopicSpec, ...] = ()
    methods: tuple[str, ...] = ("Hag", "HagFlat", "RandomSelect", "TopicRetrieval", "LlmGenerate")

    def __post_init__(self):
        if self.provider not in PROVIDER_MODES:
            raise ConfigError(f"provider must be one of {PROVIDER_MODES}, got {self.provider!r}")
        if self.embedder not in EMBEDDER_MODES:
            raise ConfigError(f"embedder must be one of {EMBEDDER_MODES}, got {self.embedder!r}")
        if self.judge not in JUDGE_MODES:
            raise ConfigError(f"judge must be one of {JUDGE_MODES}, got {self.judge!r}")
        if self.N < 1:
            raise ConfigError("N must be at least 1")
        if not 1 <= self.max_depth <= 12 or self.max_branches < 1:
            raise ConfigError("max_depth must lie in [1, 12] and max_branches be positive")
        if not 0 <= self.min_path_prob < 1:
            raise ConfigError("min_path_prob must lie in [0, 1)")
        if self.provider == "replay" and not self.transcript:
            raise ConfigError("replay provider needs a transcript path")
        object.__setattr__(
            self, "topics", tuple(t if isinstance(t, TopicSpec) else TopicSpec.from_dict(t) for t in self.topics)
        )
        object.__setattr__(self, "methods", tuple(self.methods))

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> RunConfig:
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def with_env(self, env: Mapping[str, str] | None = None) -> RunConfig:
        """Apply HAG_* overrides; secrets stay in the environment and are never stored."""
        env = os.environ if env is None else env
        changes: dict[str, Any] = {}
        if env.get("HAG_OFFLINE", "").lower() in ("1", "true", "yes"):
            changes["offline"] = True
        for key, name in (("HAG_BASE_URL", "base_url"), ("HAG_MODEL", "model"), ("HAG_PROVIDER", "provider")):
            if env.get(key):
                changes[name] = env[key]
        return replace(self, **changes) if changes else self

    def override(self, **changes: Any) -> RunConfig:
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["topics"] = [asdict(t) for t in self.topics]
        doc["methods"] = list(self.methods)
        return doc
