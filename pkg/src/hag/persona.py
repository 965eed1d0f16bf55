"""Demographic dimensions, personas, populations and marginals.

Everything here is an immutable value object.  Labels are plain strings;
the reserved label ``UNKNOWN`` marks a value that could not be determined
and is dropped before any distribution is computed.
"""

from __future__ import annotations

import enum
import functools
import json
from collections import Counter
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from . import io
from .errors import DataError, EmptyPopulation, InvariantViolation, UnknownDimension

UNKNOWN = "Unknown"

_SUM_TOL = 1e-9


class Category(str, enum.Enum):
    BASIC = "BasicDemographics"
    SOCIOECONOMIC = "SocioEconomicStatus"
    CULTURAL = "CulturalIdentity"


class Provenance(str, enum.Enum):
    REAL = "real"
    AUGMENTED = "augmented"


@dataclass(frozen=True)
class Dimension:
    id: str
    name: str
    category: Category
    source_code: str
    vocabulary: tuple[str, ...] | None = None
    # hints for open dimensions (mock providers, prompts); never enforced
    common_values: tuple[str, ...] = ()

    def __post_init__(self):
        if self.vocabulary is not None:
            if any(not v or not v.strip() for v in self.vocabulary):
                raise InvariantViolation(f"{self.id}: empty vocabulary label")
            if len(set(self.vocabulary)) != len(self.vocabulary):
                raise InvariantViolation(f"{self.id}: duplicate vocabulary labels")

    @property
    def closed(self) -> bool:
        return self.vocabulary is not None

    def canonical(self, label: str) -> str | None:
        """Map ``label`` onto the vocabulary, ignoring case and surrounding space.

        Open dimensions accept any non-empty label.  Returns None when the
        label is not allowed.
        """
        label = label.strip()
        if not label:
            return None
        if label.lower() == UNKNOWN.lower():
            return UNKNOWN
        if self.vocabulary is None:
            return label
        for v in self.vocabulary:
            if v.lower() == label.lower():
                return v
        return None

    def candidates(self) -> tuple[str, ...]:
        return self.vocabulary if self.vocabulary is not None else self.common_values

    def to_dict(self) -> dict:
        doc = {
            "id": self.id,
            "name": self.name,
            "category": self.category.value,
            "source_code": self.source_code,
            "vocabulary": list(self.vocabulary) if self.vocabulary is not None else None,
        }
        if self.common_values:
            doc["common_values"] = list(self.common_values)
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> Dimension:
        vocab = doc.get("vocabulary")
        return cls(
            id=doc["id"],
            name=doc["name"],
            category=Category(doc["category"]),
            source_code=doc["source_code"],
            vocabulary=tuple(vocab) if vocab is not None else None,
            common_values=tuple(doc.get("common_values") or ()),
        )


@dataclass(frozen=True)
class DimensionSchema:
    dimensions: tuple[Dimension, ...]

    def __post_init__(self):
        ids = [d.id for d in self.dimensions]
        if len(set(ids)) != len(ids):
            raise InvariantViolation("dimension ids must be unique")

    def __iter__(self) -> Iterator[Dimension]:
        return iter(self.dimensions)

    def __len__(self) -> int:
        return len(self.dimensions)

    def __contains__(self, dimension_id: object) -> bool:
        return any(d.id == dimension_id for d in self.dimensions)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.dimensions)

    def get(self, dimension_id: str) -> Dimension:
        for d in self.dimensions:
            if d.id == dimension_id:
                return d
        raise UnknownDimension(f"unknown dimension {dimension_id!r}")

    def resolve(self, name: str) -> str | None:
        """Case-insensitive exact match of a display name or id; no fuzzy matching."""
        key = name.strip().lower()
        for d in self.dimensions:
            if key in (d.name.lower(), d.id.lower()):
                return d.id
        return None

    def to_dict(self) -> dict:
        return {
            "format_version": io.FORMAT_VERSION,
            "kind": "schema",
            "dimensions": [d.to_dict() for d in self.dimensions],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> DimensionSchema:
        io.check_version(doc, "schema")
        return cls(tuple(Dimension.from_dict(d) for d in doc["dimensions"]))

    @classmethod
    def load(cls, path: str | Path) -> DimensionSchema:
        return cls.from_dict(io.read_json(path))


@functools.lru_cache(maxsize=1)
def default_schema() -> DimensionSchema:
    """The 12-dimension WVS schema (5 basic, 5 socio-economic, 2 cultural)."""
    text = resources.files("hag.data").joinpath("schema.json").read_text(encoding="utf-8")
    return DimensionSchema.from_dict(json.loads(text))


@dataclass(frozen=True)
class AttributeValue:
    dimension_id: str
    label: str


@dataclass(frozen=True)
class PersonaVector:
    """Ordered partial persona along a prioritized dimension sequence."""

    assignments: tuple[AttributeValue, ...] = ()

    def __post_init__(self):
        dims = [a.dimension_id for a in self.assignments]
        if len(set(dims)) != len(dims):
            raise InvariantViolation(f"dimension repeated in persona vector: {dims}")

    @classmethod
    def of(cls, *pairs: tuple[str, str]) -> PersonaVector:
        return cls(tuple(AttributeValue(d, v) for d, v in pairs))

    def __len__(self) -> int:
        return len(self.assignments)

    def __iter__(self) -> Iterator[AttributeValue]:
        return iter(self.assignments)

    @property
    def dims(self) -> tuple[str, ...]:
        return tuple(a.dimension_id for a in self.assignments)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(a.label for a in self.assignments)

    def get(self, dimension_id: str) -> str | None:
        for a in self.assignments:
            if a.dimension_id == dimension_id:
                return a.label
        return None

    def extend(self, dimension_id: str, label: str) -> PersonaVector:
        return PersonaVector(self.assignments + (AttributeValue(dimension_id, label),))

    def prefix(self, length: int) -> PersonaVector:
        return PersonaVector(self.assignments[:length])

    def as_dict(self) -> dict[str, str]:
        return {a.dimension_id: a.label for a in self.assignments}

    def describe(self) -> str:
        return ", ".join(f"{a.dimension_id}={a.label}" for a in self.assignments)


@dataclass(frozen=True)
class PersonaRecord:
    values: Mapping[str, str]
    provenance: Provenance = Provenance.REAL
    source_id: str | None = None
    free_text: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        if self.provenance is Provenance.REAL and not self.source_id:
            raise InvariantViolation("real persona records need a source_id")

    def __getitem__(self, dimension_id: str) -> str:
        return self.values[dimension_id]

    def value(self, dimension_id: str) -> AttributeValue:
        return AttributeValue(dimension_id, self.values[dimension_id])

    def matches(self, persona: PersonaVector) -> bool:
        return all(self.values.get(a.dimension_id) == a.label for a in persona)

    def to_dict(self) -> dict:
        doc: dict[str, Any] = {"values": dict(self.values), "provenance": self.provenance.value}
        if self.source_id is not None:
            doc["source_id"] = self.source_id
        if self.free_text is not None:
            doc["free_text"] = self.free_text
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> PersonaRecord:
        return cls(
            values=doc["values"],
            provenance=Provenance(doc.get("provenance", "real")),
            source_id=doc.get("source_id"),
            free_text=doc.get("free_text"),
        )


@dataclass(frozen=True)
class Violation:
    kind: str  # MissingDimension | UnknownLabel | ExtraDimension
    dimension_id: str
    detail: str = ""


def validate_record(
    record: PersonaRecord, schema: DimensionSchema, allow_unknown: bool = True
) -> list[Violation]:
    out = []
    for dim in schema:
        if dim.id not in record.values:
            out.append(Violation("MissingDimension", dim.id))
            continue
        label = record.values[dim.id]
        if not isinstance(label, str):
            out.append(Violation("UnknownLabel", dim.id, repr(label)))
            continue
        if label == UNKNOWN:
            if not allow_unknown:
                out.append(Violation("UnknownLabel", dim.id, label))
            continue
        if dim.canonical(label) != label:
            out.append(Violation("UnknownLabel", dim.id, label))
    for key in record.values:
        if key not in schema:
            out.append(Violation("ExtraDimension", key))
    return out


@dataclass(frozen=True)
class Population:
    topic: str
    members: tuple[PersonaRecord, ...]
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def size(self) -> int:
        return len(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[PersonaRecord]:
        return iter(self.members)

    def violations(self, schema: DimensionSchema) -> list[tuple[int, Violation]]:
        return [(i, v) for i, m in enumerate(self.members) for v in validate_record(m, schema)]

    def count(self, provenance: Provenance) -> int:
        return sum(1 for m in self.members if m.provenance is provenance)

    def to_dict(self) -> dict:
        return {
            "format_version": io.FORMAT_VERSION,
            "kind": "population",
            "topic": self.topic,
            "size": self.size,
            "meta": self.meta,
            "members": [m.to_dict() for m in self.members],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> Population:
        io.check_version(doc, "population")
        members = tuple(PersonaRecord.from_dict(m) for m in doc["members"])
        if doc.get("size", len(members)) != len(members):
            raise InvariantViolation(f"size {doc['size']} disagrees with {len(members)} members")
        return cls(doc["topic"], members, doc.get("meta", {}))

    def save(self, path: str | Path) -> Path:
        return io.write_json(path, self.to_dict())

    @classmethod
    def load(cls, path: str | Path) -> Population:
        return cls.from_dict(io.read_json(path))


@dataclass(frozen=True)
class Distribution:
    dimension_id: str
    entries: Mapping[str, float]

    def __post_init__(self):
        entries = dict(self.entries)
        if any(p < 0 for p in entries.values()):
            raise InvariantViolation(f"{self.dimension_id}: negative probability")
        total = sum(entries.values())
        if abs(total - 1.0) > _SUM_TOL:
            raise InvariantViolation(f"{self.dimension_id}: probabilities sum to {total!r}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_counts(cls, dimension_id: str, counts: Mapping[str, int]) -> Distribution:
        total = sum(counts.values())
        if total <= 0:
            raise EmptyPopulation(f"no observations for {dimension_id}")
        return cls(dimension_id, {k: counts[k] / total for k in sorted(counts)})

    def __getitem__(self, label: str) -> float:
        return self.entries.get(label, 0.0)

    @property
    def support(self) -> tuple[str, ...]:
        return tuple(self.entries)


def _known_labels(population: Population, dims: Sequence[str]) -> Iterable[tuple[str, ...]]:
    for m in population.members:
        labels = tuple(m.values.get(d, UNKNOWN) for d in dims)
        if UNKNOWN not in labels:
            yield labels


def marginal(
    population: Population, dimension_id: str, schema: DimensionSchema | None = None
) -> Distribution:
    """Empirical distribution of one dimension, ``Unknown`` excluded."""
    if population.size == 0:
        raise EmptyPopulation("marginal of an empty population")
    schema = schema or default_schema()
    if dimension_id not in schema:
        raise UnknownDimension(f"unknown dimension {dimension_id!r}")
    counts = Counter(labels[0] for labels in _known_labels(population, [dimension_id]))
    return Distribution.from_counts(dimension_id, counts)


def joint(population: Population, dims: Sequence[str], sep: str = " | ") -> Distribution:
    """Empirical joint over several dimensions; cells keyed by ``sep``-joined labels."""
    if population.size == 0:
        raise EmptyPopulation("joint of an empty population")
    counts = Counter(sep.join(labels) for labels in _known_labels(population, dims))
    return Distribution.from_counts("+".join(dims), counts)


def has_known(population: Population, dimension_id: str) -> bool:
    return any(m.values.get(dimension_id, UNKNOWN) != UNKNOWN for m in population.members)


def check_population(population: Population, schema: DimensionSchema) -> None:
    bad = population.violations(schema)
    if bad:
        i, v = bad[0]
        raise DataError(f"member {i} fails validation ({len(bad)} issues): {v.kind} {v.dimension_id} {v.detail}")
