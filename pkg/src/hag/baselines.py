"""Comparison generators sharing the Population output contract.

Two retrieve from the database (random and topic-similarity), one asks the
model for whole personas, and the flat variant builds a factorized tree
(every dimension conditioned on the topic alone) before grounding it the
same way as the hierarchical generator.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .embedding import Embedder, cosine, embed_records, embed_topic
from .errors import EmptyDatabase, GenerationBudgetExceeded, InvalidSize
from .grounding import PersonaDatabase, instantiate
from .persona import (
    DimensionSchema,
    PersonaVector,
    Population,
    default_schema,
    validate_record,
)
from .provider import KnowledgeProvider, ProviderParams
from .tree import build_tree, flat_tree, prune, save_tree

LLM_BATCH = 10
# how many batches llm_generate may spend per batch actually needed
BUDGET_FACTOR = 4


class Method(str, enum.Enum):
    RANDOM_SELECT = "RandomSelect"
    TOPIC_RETRIEVAL = "TopicRetrieval"
    LLM_GENERATE = "LlmGenerate"
    HAG_FLAT = "HagFlat"
    HAG = "Hag"

    @classmethod
    def parse(cls, name: str) -> Method:
        key = name.replace("-", "").replace("_", "").lower()
        for m in cls:
            if m.value.lower() == key:
                return m
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(m.value for m in cls)}")

    @property
    def slug(self) -> str:
        return {
            Method.RANDOM_SELECT: "random-select",
            Method.TOPIC_RETRIEVAL: "topic-retrieval",
            Method.LLM_GENERATE: "llm-generate",
            Method.HAG_FLAT: "hag-flat",
            Method.HAG: "hag",
        }[self]


def _check_size(N: int) -> None:
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise InvalidSize(f"population size must be a positive integer, got {N!r}")


def random_select(db: PersonaDatabase, N: int, seed: int = 0, topic: str = "") -> Population:
    """``N`` uniform draws from the database; with replacement only when it is too small."""
    _check_size(N)
    if len(db) == 0:
        raise EmptyDatabase("cannot sample from an empty database")
    rng = np.random.default_rng(seed)
    replace = N > len(db)
    picks = rng.choice(len(db), size=N, replace=replace)
    members = tuple(db.records[i] for i in picks)
    return Population(topic, members, {"generator": "random-select", "seed": seed, "with_replacement": replace})


def topic_retrieval(db: PersonaDatabase, topic: str, N: int, embedder: Embedder) -> Population:
    """Top-``N`` records by cosine similarity of rendered persona text to the topic."""
    _check_size(N)
    if len(db) == 0:
        raise EmptyDatabase("cannot retrieve from an empty database")
    if N > len(db):
        raise InvalidSize(f"asked for {N} records from a database of {len(db)}")
    vectors = embed_records(embedder, db.records)
    sims = cosine(vectors, embed_topic(embedder, topic))
    ids = [r.source_id for r in db.records]
    order = sorted(range(len(db)), key=lambda i: (-sims[i], ids[i]))[:N]
    return Population(
        topic,
        tuple(db.records[i] for i in order),
        {
            "generator": "topic-retrieval",
            "embedder": embedder.model,
            "scores": [{"source_id": ids[i], "similarity": float(sims[i])} for i in order],
        },
    )


def llm_generate(
    provider: KnowledgeProvider,
    topic: str,
    N: int,
    schema: DimensionSchema | None = None,
    batch_size: int = LLM_BATCH,
    params: ProviderParams | None = None,
) -> Population:
    """``N`` personas written directly by the model, ``batch_size`` per request.

    Entries that fail validation are dropped and made up by later batches.
    """
    _check_size(N)
    schema = schema or default_schema()
    budget = BUDGET_FACTOR * math.ceil(N / batch_size)
    members = []
    dropped = 0
    batch = 0
    while len(members) < N:
        if batch >= budget:
            raise GenerationBudgetExceeded(f"only {len(members)} of {N} valid personas after {batch} batches")
        want = min(batch_size, N - len(members))
        got = provider.generate_batch(topic, schema, want, batch, params)
        for rec in got:
            if rec is None or validate_record(rec, schema, allow_unknown=False):
                dropped += 1
            elif len(members) < N:
                members.append(rec)
        dropped += max(0, want - len(got))
        batch += 1
    return Population(
        topic,
        tuple(members),
        {"generator": "llm-generate", "provider": provider.fingerprint, "batches": batch, "dropped": dropped},
    )


def hag_flat(
    provider: KnowledgeProvider,
    topic: str,
    N: int,
    schema: DimensionSchema | None,
    db: PersonaDatabase,
    seed: int = 0,
    params: ProviderParams | None = None,
    workers: int = 1,
    tree_path: str | Path | None = None,
) -> Population:
    """Independent topic-only marginals per dimension, grounded like the full method."""
    _check_size(N)
    schema = schema or db.schema
    params = params or provider.params
    dims = provider.prioritize_dims(topic, schema, params)
    marginals = []
    for d in dims:
        dist = provider.infer_conditional(
            topic, d, PersonaVector(), params, allowed=schema.get(d).vocabulary, schema=schema
        )
        marginals.append([(wv.label, wv.weight) for wv in dist])
    tree = flat_tree(topic, dims, marginals, {"provider": provider.fingerprint, "params": params.to_dict(), "flat": True})
    if tree_path is not None:
        save_tree(tree, tree_path)
    return instantiate(tree, db, N, provider, seed, schema, params, generator="hag-flat", workers=workers)


def hag(
    provider: KnowledgeProvider,
    topic: str,
    N: int,
    schema: DimensionSchema | None,
    db: PersonaDatabase,
    seed: int = 0,
    params: ProviderParams | None = None,
    min_path_prob: float = 0.0,
    workers: int = 1,
    tree_path: str | Path | None = None,
) -> Population:
    """Hierarchical tree followed by grounded instantiation."""
    _check_size(N)
    schema = schema or db.schema
    tree = prune(build_tree(topic, schema, provider, params, workers), min_path_prob)
    if tree_path is not None:
        save_tree(tree, tree_path)
    return instantiate(tree, db, N, provider, seed, schema, params, generator="hag", workers=workers)


@dataclass(frozen=True)
class GeneratorSpec:
    method: Method
    topic: str
    N: int
    seed: int = 0
    options: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method) if isinstance(self.method, str) else self.method)
        _check_size(self.N)


def run_generator(
    spec: GeneratorSpec,
    db: PersonaDatabase | None = None,
    provider: KnowledgeProvider | None = None,
    embedder: Embedder | None = None,
    schema: DimensionSchema | None = None,
) -> Population:
    """Dispatch ``spec`` to its generator; each needs a different subset of the resources."""
    m = spec.method
    opts = dict(spec.options)

    def need(name: str, value):
        if value is None:
            raise ValueError(f"{m.value} needs a {name}")
        return value

    if m is Method.RANDOM_SELECT:
        return random_select(need("database", db), spec.N, spec.seed, topic=spec.topic)
    if m is Method.TOPIC_RETRIEVAL:
        return topic_retrieval(need("database", db), spec.topic, spec.N, need("embedder", embedder))
    if m is Method.LLM_GENERATE:
        return llm_generate(need("provider", provider), spec.topic, spec.N, schema, **opts)
    if m is Method.HAG_FLAT:
        return hag_flat(need("provider", provider), spec.topic, spec.N, schema, need("database", db), spec.seed, **opts)
    return hag(need("provider", provider), spec.topic, spec.N, schema, need("database", db), spec.seed, **opts)
