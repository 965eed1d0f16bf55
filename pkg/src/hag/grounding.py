"""Grounded instantiation: fill tree leaves with real people first.

Leaf targets come from largest-remainder apportionment of ``N`` over leaf
path probabilities.  Each leaf takes as many exactly-matching database
records as it needs (HIT) or all that exist (MISS); the shortfall is
synthesized under the leaf's attribute constraints.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import io
from .errors import (
    AugmentationExhausted,
    ColumnMapIncomplete,
    InvariantViolation,
    ResponseError,
    UnreadableSource,
)
from .persona import (
    UNKNOWN,
    DimensionSchema,
    PersonaRecord,
    PersonaVector,
    Population,
    Provenance,
    default_schema,
    validate_record,
)
from .provider import KnowledgeProvider, ProviderParams
from .tree import DistributionTree, LeafPersona, enumerate_leaves

log = logging.getLogger(__name__)


# -- harmonization -------------------------------------------------------------

def default_harmonization() -> dict:
    text = resources.files("hag.data").joinpath("harmonization.json").read_text(encoding="utf-8")
    return json.loads(text)


def _as_number(raw: Any) -> float | None:
    if isinstance(raw, bool):
        return None
    if isinstance(raw, (int, float)):
        return float(raw)
    try:
        return float(str(raw).strip())
    except ValueError:
        return None


def _code_key(num: float) -> str:
    return str(int(num)) if num == int(num) else str(num)


class Harmonizer:
    """Maps raw survey values to schema labels, one rule per dimension.

    Rules are ``codes`` (lookup table, optionally passing non-numeric text
    through) or ``brackets`` (inclusive numeric ranges; ``null`` upper bound
    is open).  Values that already are schema labels pass unchanged, and
    the configured missing-value codes become ``Unknown``.
    """

    def __init__(self, schema: DimensionSchema, config: Mapping[str, Any] | None = None):
        self.schema = schema
        self.config = dict(config or default_harmonization())
        self.missing = {float(c) for c in self.config.get("missing_codes", ())}
        self.rules = self.config.get("dimensions", {})

    def __call__(self, dimension_id: str, raw: Any) -> str | None:
        dim = self.schema.get(dimension_id)
        rule = self.rules.get(dimension_id, {})
        text = str(raw).strip()
        num = _as_number(raw)
        if num is not None and num in self.missing:
            return UNKNOWN
        if rule.get("type") == "codes":
            hit = rule["codes"].get(_code_key(num) if num is not None else text)
            if hit is not None:
                return dim.canonical(hit)
        elif rule.get("type") == "brackets" and num is not None:
            for lo, hi, label in rule["brackets"]:
                if num >= lo and (hi is None or num <= hi):
                    return dim.canonical(label)
            return None
        if num is None and (dim.closed or rule.get("passthrough") or not rule):
            return dim.canonical(text)
        return None


# -- database ------------------------------------------------------------------

class PersonaDatabase:
    """Immutable store of real personas with a per-dimension inverted index."""

    def __init__(
        self,
        records: Iterable[PersonaRecord],
        schema: DimensionSchema | None = None,
        skipped: Counter | None = None,
    ):
        self.schema = schema or default_schema()
        self.records: tuple[PersonaRecord, ...] = tuple(records)
        self.skipped: Counter = Counter(skipped or {})
        ids = [r.source_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise InvariantViolation("database source ids must be unique")
        for r in self.records:
            if r.provenance is not Provenance.REAL:
                raise InvariantViolation("database records must be real")
            bad = validate_record(r, self.schema)
            if bad:
                raise InvariantViolation(f"record {r.source_id} fails validation: {bad[0]}")
        self.index: dict[str, dict[str, np.ndarray]] = {}
        for dim in self.schema.ids:
            buckets: dict[str, list[int]] = {}
            for i, r in enumerate(self.records):
                buckets.setdefault(r.values[dim], []).append(i)
            self.index[dim] = {k: np.asarray(v, dtype=np.int64) for k, v in buckets.items()}

    def __len__(self) -> int:
        return len(self.records)

    def matching(self, persona: PersonaVector) -> np.ndarray:
        """Sorted record positions matching every constraint of ``persona``."""
        result: np.ndarray | None = None
        for a in persona:
            ids = self.index.get(a.dimension_id, {}).get(a.label)
            if ids is None:
                return np.empty(0, dtype=np.int64)
            result = ids if result is None else np.intersect1d(result, ids, assume_unique=True)
            if result.size == 0:
                break
        if result is None:
            return np.arange(len(self.records), dtype=np.int64)
        return result

    def count(self, persona: PersonaVector) -> int:
        return int(self.matching(persona).size)


def _read_rows(path: Path) -> tuple[list[str] | None, list[dict]]:
    try:
        if path.suffix.lower() in (".jsonl", ".ndjson", ".json"):
            rows = []
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rows.append(json.loads(line))
            return None, rows
        delimiter = "\t" if path.suffix.lower() == ".tsv" else ","
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh, delimiter=delimiter)
            rows = list(reader)
            return list(reader.fieldnames or []), rows
    except (OSError, UnicodeDecodeError, json.JSONDecodeError, csv.Error) as exc:
        raise UnreadableSource(f"cannot read {path}: {exc}") from exc


def ingest_database(
    source: str | Path,
    schema: DimensionSchema | None = None,
    harmonization: Mapping[str, Any] | str | Path | None = None,
    column_map: Mapping[str, str] | None = None,
) -> PersonaDatabase:
    """Load a survey extract (CSV/TSV or JSON lines) keyed by survey codes.

    Rows with a blank or unmappable value on any dimension are skipped and
    tallied in ``db.skipped`` by reason.
    """
    schema = schema or default_schema()
    if isinstance(harmonization, (str, Path)):
        harmonization = io.read_json(harmonization)
    harmonize = Harmonizer(schema, harmonization)
    columns = {d.id: (column_map or {}).get(d.id, d.source_code) for d in schema}

    header, rows = _read_rows(Path(source))
    if not rows:
        return PersonaDatabase((), schema)
    present = set(header) if header is not None else set().union(*(r.keys() for r in rows))
    missing = [f"{dim}->{col}" for dim, col in columns.items() if col not in present]
    if missing:
        raise ColumnMapIncomplete(f"source lacks columns for: {', '.join(missing)}")
    id_col = next((c for c in harmonize.config.get("id_columns", ()) if c in present), None)

    records, skipped, seen = [], Counter(), set()
    for n, row in enumerate(rows):
        values = {}
        reason = None
        for dim, col in columns.items():
            raw = row.get(col)
            if raw is None or str(raw).strip() == "":
                reason = f"missing {dim}"
                break
            label = harmonize(dim, raw)
            if label is None:
                reason = f"unmappable {dim}"
                break
            values[dim] = label
        source_id = str(row[id_col]).strip() if id_col and row.get(id_col) not in (None, "") else f"row-{n}"
        if reason is None and source_id in seen:
            reason = "duplicate id"
        if reason is not None:
            skipped[reason] += 1
            continue
        seen.add(source_id)
        records.append(PersonaRecord(values, Provenance.REAL, source_id=source_id))
    if skipped:
        log.info("ingest skipped %d rows: %s", sum(skipped.values()), dict(skipped))
    return PersonaDatabase(records, schema, skipped)


def bundled_database_path() -> Path:
    return Path(str(resources.files("hag.data").joinpath("sample_db.csv")))


def load_sample_database(schema: DimensionSchema | None = None) -> PersonaDatabase:
    """The bundled synthetic 5,000-record survey sample."""
    return ingest_database(bundled_database_path(), schema)


# -- apportionment ---------------------------------------------------------------

def allocate_counts(leaves: Sequence[LeafPersona], N: int) -> dict[PersonaVector, int]:
    """Largest-remainder apportionment of ``N`` agents over leaf probabilities.

    Each leaf gets ``floor(N * W)``; remaining seats go to the largest
    fractional parts, ties broken by higher ``W`` and then by the persona's
    labels in lexicographic order.  The result sums to ``N`` exactly.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not leaves:
        raise ValueError("no leaves to allocate over")
    total = math.fsum(l.path_prob for l in leaves)
    if abs(total - 1.0) > 1e-6:
        raise InvariantViolation(f"leaf probabilities sum to {total!r}")
    quotas = [N * l.path_prob / total for l in leaves]
    counts = [math.floor(q) for q in quotas]
    order = sorted(
        range(len(leaves)),
        key=lambda i: (-(quotas[i] - counts[i]), -leaves[i].path_prob, leaves[i].persona.labels),
    )
    left = N - sum(counts)
    for i in order[:max(left, 0)]:
        counts[i] += 1
    # float slop can only overshoot by a seat or so; take it back from the smallest remainders
    for i in reversed(order):
        if left >= 0:
            break
        if counts[i] > 0:
            counts[i] -= 1
            left += 1
    return {l.persona: c for l, c in zip(leaves, counts)}


# -- retrieval and instantiation ------------------------------------------------

def _generator(seed: int | np.random.Generator | Sequence[int]) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def retrieve(
    db: PersonaDatabase,
    persona: PersonaVector,
    limit: int,
    seed: int | np.random.Generator | Sequence[int] = 0,
    exclude: set[int] | None = None,
) -> list[PersonaRecord]:
    """Uniform sample without replacement of records matching ``persona`` exactly."""
    for a in persona:
        db.schema.get(a.dimension_id)
    ids = db.matching(persona)
    if exclude:
        ids = ids[~np.isin(ids, list(exclude))]
    if limit <= 0 or ids.size == 0:
        return []
    chosen = _generator(seed).permutation(ids)[:limit]
    if exclude is not None:
        exclude.update(int(i) for i in chosen)
    return [db.records[int(i)] for i in chosen]


class Tag(str, enum.Enum):
    HIT = "HIT"
    MISS = "MISS"


@dataclass(frozen=True)
class LeafAllocation:
    persona: PersonaVector
    target: int
    available: int
    tag: Tag
    sampled_ids: tuple[str, ...] = ()
    augment_gap: int = 0

    def to_dict(self) -> dict:
        return {
            "persona": self.persona.as_dict(),
            "target": self.target,
            "available": self.available,
            "tag": self.tag.value,
            "sampled_ids": list(self.sampled_ids),
            "augment_gap": self.augment_gap,
        }


def _fallback_donor(db: PersonaDatabase, persona: PersonaVector, rng: np.random.Generator) -> PersonaRecord:
    # longest prefix of the leaf path that some real record satisfies
    for length in range(len(persona), -1, -1):
        ids = db.matching(persona.prefix(length))
        if ids.size:
            return db.records[int(rng.choice(ids))]
    raise AugmentationExhausted(f"no provider and no database records to augment {persona.describe()}")


def augment(
    topic: str,
    persona: PersonaVector,
    count: int,
    provider: KnowledgeProvider | None,
    schema: DimensionSchema,
    db: PersonaDatabase,
    rng: np.random.Generator,
    params: ProviderParams | None = None,
    attempts: int = 3,
) -> list[PersonaRecord]:
    """``count`` synthetic personas that agree with ``persona`` on every constrained dimension."""
    out = []
    for k in range(count):
        if provider is None:
            donor = _fallback_donor(db, persona, rng)
            values = {**donor.values, **persona.as_dict()}
            out.append(PersonaRecord(values, Provenance.AUGMENTED, free_text=None))
            continue
        errors = []
        for attempt in range(attempts):
            try:
                rec = provider.generate_persona(topic, persona, schema, params, variant=k + attempt * count)
                break
            except ResponseError as exc:
                errors.append(str(exc))
        else:
            raise AugmentationExhausted(
                f"constrained generation failed {attempts} times for {persona.describe()}: {errors[-1]}"
            )
        out.append(rec)
    return out


def tree_reference(tree: DistributionTree) -> dict:
    return {"topic": tree.topic, "dim_sequence": list(tree.dim_sequence), "sha256": io.digest(tree.to_dict())}


def instantiate(
    tree: DistributionTree,
    db: PersonaDatabase,
    N: int,
    provider: KnowledgeProvider | None,
    seed: int = 0,
    schema: DimensionSchema | None = None,
    params: ProviderParams | None = None,
    generator: str = "hag",
    workers: int = 1,
    meta: Mapping[str, Any] | None = None,
) -> Population:
    """Turn a distribution tree into exactly ``N`` agents, real records first."""
    schema = schema or db.schema
    leaves = enumerate_leaves(tree)
    targets = allocate_counts(leaves, N)
    used: set[int] = set()

    # retrieval is sequential so record exclusion is deterministic
    plan = []
    for i, leaf in enumerate(leaves):
        n = targets[leaf.persona]
        rng = np.random.default_rng([seed, i])
        available = db.count(leaf.persona)
        real = retrieve(db, leaf.persona, n, rng, exclude=used)
        plan.append((leaf, n, available, real, rng))

    def fill(item) -> list[PersonaRecord]:
        leaf, n, _, real, rng = item
        return augment(tree.topic, leaf.persona, n - len(real), provider, schema, db, rng, params)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        augmented = list(pool.map(fill, plan))

    members: list[PersonaRecord] = []
    allocations = []
    for (leaf, n, available, real, _), synth in zip(plan, augmented):
        members.extend(real)
        members.extend(synth)
        allocations.append(
            LeafAllocation(
                leaf.persona,
                n,
                available,
                Tag.HIT if available >= n else Tag.MISS,
                tuple(r.source_id for r in real),
                max(0, n - len(real)),
            )
        )
    info = {
        "generator": generator,
        "seed": seed,
        "tree": tree_reference(tree),
        "provider": provider.fingerprint if provider is not None else None,
        "real": sum(len(p[3]) for p in plan),
        "augmented": sum(len(a) for a in augmented),
        "allocations": [a.to_dict() for a in allocations],
        **(meta or {}),
    }
    return Population(tree.topic, tuple(members), info)


def allocations_of(population: Population) -> list[LeafAllocation]:
    out = []
    for a in population.meta.get("allocations", ()):
        out.append(
            LeafAllocation(
                PersonaVector.of(*a["persona"].items()),
                a["target"],
                a["available"],
                Tag(a["tag"]),
                tuple(a["sampled_ids"]),
                a["augment_gap"],
            )
        )
    return out
