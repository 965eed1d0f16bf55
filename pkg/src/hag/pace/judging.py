"""LLM-as-judge scoring of archetypes and individual personas."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

from ..embedding import render_persona
from ..persona import UNKNOWN, DimensionSchema, PersonaRecord, default_schema
from ..provider import KnowledgeProvider
from .archetypes import Archetype


def archetype_snippet(archetypes: Sequence[Archetype]) -> str:
    return "\n".join(
        f"Cluster {i} ({a.share:.1%} of agents): {render_persona(a.representative)}"
        for i, a in enumerate(archetypes, 1)
    )


def profile_for_judge(record: PersonaRecord, schema: DimensionSchema | None = None) -> dict[str, str]:
    schema = schema or default_schema()
    return {d.name: record.values.get(d.id, UNKNOWN) for d in schema}


@dataclass(frozen=True)
class IndConResult:
    mean: float
    scores: tuple[int, ...]
    reasons: tuple[str, ...]


def arch_rel(judge: KnowledgeProvider, topic: str, archetypes: Sequence[Archetype]) -> tuple[int, str]:
    """One joint judgment over all dominant clusters."""
    return judge.judge_archetypes(topic, archetype_snippet(archetypes))


def ind_con(
    judge: KnowledgeProvider, topic: str, records: Sequence[PersonaRecord], schema: DimensionSchema | None = None
) -> IndConResult:
    if not records:
        raise ValueError("no records to judge")
    results = [judge.judge_individual(topic, profile_for_judge(r, schema)) for r in records]
    scores = tuple(s for s, _ in results)
    return IndConResult(sum(scores) / len(scores), scores, tuple(r for _, r in results))


def judge_scores(
    judge: KnowledgeProvider,
    topic: str,
    items: Sequence[Archetype] | Sequence[PersonaRecord],
    schema: DimensionSchema | None = None,
) -> float:
    """ArchRel for a list of archetypes, mean IndCon for a list of records."""
    if items and isinstance(items[0], Archetype):
        return float(arch_rel(judge, topic, items)[0])  # type: ignore[arg-type]
    return ind_con(judge, topic, items, schema).mean  # type: ignore[arg-type]
