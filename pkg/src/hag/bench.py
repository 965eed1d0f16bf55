"""Ground-truth populations inferred from users' own posts."""

from __future__ import annotations

import json
import re
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .errors import InsufficientVolume, UnreadableCorpus
from .persona import (
    DimensionSchema,
    PersonaRecord,
    Population,
    Provenance,
    default_schema,
)
from .provider import KnowledgeProvider, ProviderParams

MIN_TOKENS = 15
MIN_USERS = 50
TOKEN_BUDGET = 4000

_URL = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)


@dataclass(frozen=True)
class Post:
    user_id: str
    timestamp: datetime
    text: str
    theme: str


@dataclass(frozen=True)
class CorpusUser:
    user_id: str
    texts: tuple[tuple[datetime, str], ...]
    theme: str

    def __post_init__(self):
        if not self.texts:
            raise ValueError(f"user {self.user_id} has no texts")


@dataclass(frozen=True)
class FilterPolicy:
    min_tokens: int = MIN_TOKENS
    start: datetime | None = None
    end: datetime | None = None
    min_texts: int = 1
    max_texts: int | None = None
    strip_urls: bool = True

    def __post_init__(self):
        if self.min_tokens < 1:
            raise ValueError("min_tokens must be at least 1")
        if self.min_texts < 1:
            raise ValueError("min_texts must be at least 1")
        for name in ("start", "end"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _aware(value))

    def to_dict(self) -> dict:
        return {
            "min_tokens": self.min_tokens,
            "start": self.start.isoformat() if self.start else None,
            "end": self.end.isoformat() if self.end else None,
            "min_texts": self.min_texts,
            "max_texts": self.max_texts,
            "strip_urls": self.strip_urls,
        }


@dataclass
class FilterResult:
    users: list[CorpusUser]
    dropped: Counter = field(default_factory=Counter)


def _aware(ts: datetime) -> datetime:
    return ts if ts.tzinfo else ts.replace(tzinfo=timezone.utc)


def parse_timestamp(raw: Any) -> datetime:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return datetime.fromtimestamp(raw, tz=timezone.utc)
    if isinstance(raw, str):
        return _aware(datetime.fromisoformat(raw.replace("Z", "+00:00")))
    raise ValueError(f"unsupported timestamp {raw!r}")


def load_corpus(path: str | Path) -> list[Post]:
    """Posts from a JSON-lines file with user_id, timestamp, text and theme."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableCorpus(f"{path}: {exc}") from exc
    posts = []
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            posts.append(Post(str(doc["user_id"]), parse_timestamp(doc["timestamp"]), str(doc["text"]), str(doc["theme"])))
        except (ValueError, KeyError, TypeError) as exc:
            raise UnreadableCorpus(f"{path}:{n}: {exc}") from exc
    return posts


def tokens(text: str) -> list[str]:
    return text.split()


def filter_corpus(posts: Iterable[Post], policy: FilterPolicy | None = None, theme: str | None = None) -> FilterResult:
    """Keep long-enough, in-range texts and users whose volume fits the policy.

    The upper bound on texts applies to a user's raw post count, so that
    loosening any other field can never push a user over it.
    """
    policy = policy or FilterPolicy()
    raw_counts: Counter = Counter()
    kept: dict[str, list[tuple[datetime, str]]] = defaultdict(list)
    themes: dict[str, Counter] = defaultdict(Counter)
    dropped: Counter = Counter()
    for post in posts:
        if theme is not None and post.theme != theme:
            continue
        raw_counts[post.user_id] += 1
        themes[post.user_id][post.theme] += 1
        ts = _aware(post.timestamp)
        if (policy.start and ts < policy.start) or (policy.end and ts > policy.end):
            dropped["out_of_range"] += 1
            continue
        text = _URL.sub(" ", post.text) if policy.strip_urls else post.text
        text = " ".join(text.split())
        if len(tokens(text)) < policy.min_tokens:
            dropped["short_text"] += 1
            continue
        kept[post.user_id].append((ts, text))

    users = []
    for uid in sorted(raw_counts):
        if policy.max_texts is not None and raw_counts[uid] > policy.max_texts:
            dropped["too_many_texts"] += 1
            continue
        texts = kept.get(uid, [])
        if len(texts) < policy.min_texts:
            dropped["too_few_texts"] += 1
            continue
        main_theme = min(themes[uid].items(), key=lambda kv: (-kv[1], kv[0]))[0]
        users.append(CorpusUser(uid, tuple(sorted(texts, reverse=True)), main_theme))
    return FilterResult(users, dropped)


def user_text(user: CorpusUser, budget: int = TOKEN_BUDGET) -> str:
    """Texts newest first, stopping once the whitespace-token budget is used up."""
    out: list[str] = []
    used = 0
    for _, text in user.texts:
        toks = tokens(text)
        room = budget - used
        if room <= 0:
            break
        if len(toks) > room:
            out.append(" ".join(toks[:room]))
            break
        out.append(text)
        used += len(toks)
    return "\n".join(f"- {t}" for t in out)


def infer_persona(
    provider: KnowledgeProvider,
    user: CorpusUser,
    schema: DimensionSchema | None = None,
    params: ProviderParams | None = None,
    budget: int = TOKEN_BUDGET,
) -> PersonaRecord:
    schema = schema or default_schema()
    values = provider.infer_profile(user.theme, user.user_id, user_text(user, budget), schema, params)
    return PersonaRecord(values, Provenance.REAL, source_id=user.user_id)


def build_benchmark(
    posts: Sequence[Post],
    topic: str,
    provider: KnowledgeProvider,
    policy: FilterPolicy | None = None,
    theme: str | None = None,
    schema: DimensionSchema | None = None,
    force: bool = False,
    workers: int = 1,
    min_users: int = MIN_USERS,
    meta: Mapping[str, Any] | None = None,
) -> Population:
    """One inferred persona per surviving user, in user-id order."""
    policy = policy or FilterPolicy()
    schema = schema or default_schema()
    result = filter_corpus(posts, policy, theme)
    if len(result.users) < min_users and not force:
        raise InsufficientVolume(f"{len(result.users)} users survive filtering; at least {min_users} are required")
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        members = list(pool.map(lambda u: infer_persona(provider, u, schema), result.users))
    return Population(
        topic,
        tuple(members),
        {
            "generator": "benchmark",
            "theme": theme,
            "policy": policy.to_dict(),
            "dropped": dict(sorted(result.dropped.items())),
            "users": len(result.users),
            "provider": provider.fingerprint,
            **(meta or {}),
        },
    )
