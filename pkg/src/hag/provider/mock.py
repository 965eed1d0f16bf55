"""Deterministic offline stand-in for a chat model.

The mock answers from lookup tables when it can and otherwise derives
stable pseudo-random answers from a hash of (seed, task, request payload),
so identical requests always get identical text back.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections.abc import Callable, Mapping, Sequence
from typing import Any

from .backends import ChatRequest

ConditionalFn = Callable[[str, str, Mapping[str, str]], "Sequence[tuple[str, float]] | None"]

WILDCARD = "*"


def _rng(seed: int, *parts: Any) -> random.Random:
    blob = json.dumps([seed, *parts], sort_keys=True, default=str)
    return random.Random(int.from_bytes(hashlib.sha256(blob.encode()).digest()[:8], "big"))


def _context_key(context: Sequence[Sequence[str]]) -> tuple[tuple[str, str], ...]:
    return tuple((d, v) for d, v in context)


class MockBackend:
    """Table-driven chat backend.

    Args:
        seed: drives every hash-based fallback answer.
        dimensions: topic -> ordered dimension names (``"*"`` matches any topic).
        conditionals: ``{(topic, dimension_id, ((dim, label), ...)): [(label, weight), ...]}``
            or a callable ``(topic, dimension_id, context_dict) -> pairs | None``.
        persona_defaults: labels used to fill unconstrained dimensions.
        profiles: user_id -> {dimension_id: label} for text-to-persona.
        profile_fallback: "hash" invents plausible labels, "unknown" answers Unknown.
        judge_score: constant score, or callable(task, payload) -> int.
        overrides: task -> callable(request) -> raw text, for fault injection.
    """

    kind = "mock"

    def __init__(
        self,
        seed: int = 0,
        dimensions: Mapping[str, Sequence[str]] | None = None,
        conditionals: Mapping[tuple, Sequence[tuple[str, float]]] | ConditionalFn | None = None,
        persona_defaults: Mapping[str, str] | None = None,
        profiles: Mapping[str, Mapping[str, str]] | None = None,
        profile_fallback: str = "hash",
        judge_score: int | Callable[[str, Mapping], int] = 4,
        overrides: Mapping[str, Callable[[ChatRequest], str]] | None = None,
    ):
        self.seed = seed
        self.dimensions = dict(dimensions or {})
        self.conditionals = conditionals if callable(conditionals) else dict(conditionals or {})
        self.persona_defaults = dict(persona_defaults or {})
        self.profiles = dict(profiles or {})
        self.profile_fallback = profile_fallback
        self.judge_score = judge_score
        self.overrides = dict(overrides or {})
        self.default_model = f"mock-{seed}"

    def complete(self, request: ChatRequest) -> str:
        if request.task in self.overrides:
            return self.overrides[request.task](request)
        handler = getattr(self, f"_answer_{request.task}")
        return json.dumps(handler(dict(request.payload)))

    # -- world-knowledge tasks ---------------------------------------------

    def _answer_prioritize(self, p: dict) -> dict:
        topic = p["topic"]
        table = self.dimensions.get(topic, self.dimensions.get(WILDCARD))
        if table is not None:
            return {"dimensions": list(table)}
        rng = _rng(self.seed, "prioritize", topic)
        names = list(p["dimension_names"])
        rng.shuffle(names)
        depth = rng.randint(1, min(p["max_depth"], len(names)))
        return {"dimensions": names[:depth]}

    def _lookup_conditional(self, topic: str, dim: str, context: tuple) -> Sequence | None:
        if callable(self.conditionals):
            return self.conditionals(topic, dim, dict(context))
        for t in (topic, WILDCARD):
            hit = self.conditionals.get((t, dim, context))
            if hit is not None:
                return hit
        return None

    def _answer_conditional(self, p: dict) -> dict:
        context = _context_key(p["context"])
        pairs = self._lookup_conditional(p["topic"], p["dimension"], context)
        if pairs is None:
            pairs = self._hash_distribution(p, context)
        return {"distribution": [{"value": v, "probability": w} for v, w in pairs]}

    def _hash_distribution(self, p: dict, context: tuple) -> list[tuple[str, float]]:
        rng = _rng(self.seed, "conditional", p["topic"], p["dimension"], context)
        pool = list(p.get("allowed") or p.get("candidates") or [])
        if not pool:
            pool = [f"{p['dimension_name']} {i}" for i in range(1, p["max_branches"] + 1)]
        k = rng.randint(1, min(p["max_branches"], len(pool)))
        labels = rng.sample(pool, k)
        raw = [rng.uniform(0.05, 1.0) for _ in labels]
        total = sum(raw)
        # three decimals, like a model would write them; the provider renormalizes
        return [(label, round(w / total, 3)) for label, w in zip(labels, raw)]

    def _fill(self, dims: Mapping[str, Sequence[str] | None], *salt: Any) -> dict[str, str]:
        out = {}
        for dim, pool in dims.items():
            if dim in self.persona_defaults:
                out[dim] = self.persona_defaults[dim]
                continue
            pool = list(pool or []) or [f"{dim} A", f"{dim} B"]
            out[dim] = _rng(self.seed, "fill", dim, *salt).choice(pool)
        return out

    def _answer_persona(self, p: dict) -> dict:
        filled = self._fill(p["fill"], p["topic"], p["fixed"], p["variant"])
        return {"profile": {**filled}}

    def _answer_batch(self, p: dict) -> dict:
        return {
            "personas": [self._fill(p["dims"], p["topic"], p["batch"], i) for i in range(p["count"])]
        }

    def _answer_profile(self, p: dict) -> dict:
        table = self.profiles.get(p["user_id"])
        if table is not None:
            return {d: table.get(d, "Unknown") for d in p["dims"]}
        if self.profile_fallback == "unknown":
            return {d: "Unknown" for d in p["dims"]}
        return self._fill(p["dims"], "profile", p["theme"], p["user_id"])

    # -- judge tasks -------------------------------------------------------

    def _score(self, task: str, p: dict) -> int:
        return self.judge_score(task, p) if callable(self.judge_score) else self.judge_score

    def _answer_judge_archetypes(self, p: dict) -> dict:
        return {"archetype_coherence_score": self._score("judge_archetypes", p), "reasoning": "mock"}

    def _answer_judge_individual(self, p: dict) -> dict:
        return {"internal_consistency_score": self._score("judge_individual", p), "reasoning": "mock"}
