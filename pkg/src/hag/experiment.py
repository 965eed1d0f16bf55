"""Wiring from a RunConfig to providers, databases and whole experiments."""

from __future__ import annotations

import csv
import io as _io
import json
import logging
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Any

from . import io
from .baselines import GeneratorSpec, Method, run_generator
from .bench import build_benchmark, load_corpus
from .config import RunConfig, TopicSpec
from .embedding import Embedder, HashEmbedder, HttpEmbedder, embed_records
from .errors import HagError, UnknownArtifactType
from .grounding import PersonaDatabase, bundled_database_path, ingest_database
from .pace import EvalConfig, EvalReport, evaluate
from .persona import DimensionSchema, Population, default_schema
from .provider import KnowledgeProvider, ProviderParams, make_provider
from .tree import deserialize_tree, render_tree

log = logging.getLogger(__name__)

SUMMARY_METRICS = ("JSD", "KL", "DivErr", "ArchRel", "IndCon")


def toy_corpus_path() -> Path:
    return Path(str(resources.files("hag.data").joinpath("toy_corpus.jsonl")))


def toy_profiles() -> dict[str, dict[str, str]]:
    """The mock text-to-persona table that matches the bundled toy corpus."""
    text = resources.files("hag.data").joinpath("toy_personas.json").read_text(encoding="utf-8")
    return json.loads(text)["profiles"]


def provider_params(config: RunConfig) -> ProviderParams:
    return ProviderParams(config.max_depth, config.max_branches, config.temperature, config.retries)


def build_provider(config: RunConfig, mode: str | None = None) -> KnowledgeProvider:
    mode = mode or config.provider
    return make_provider(
        mode,
        params=provider_params(config),
        model=config.model,
        seed=config.seed,
        transcript=config.transcript,
        record=config.record,
        mock_options={"profiles": toy_profiles()},
        base_url=config.base_url,
        timeout=config.timeout,
        max_in_flight=config.max_in_flight,
        offline=config.offline or None,
    )


def build_judge(config: RunConfig) -> KnowledgeProvider | None:
    if config.judge == "none":
        return None
    if config.judge == config.provider:
        return build_provider(config)
    return build_provider(config.override(record=None), config.judge)


def build_embedder(config: RunConfig) -> Embedder:
    if config.embedder == "http":
        return HttpEmbedder(config.embed_model, base_url=config.base_url, offline=config.offline or None)
    return HashEmbedder()


def load_schema(config: RunConfig) -> DimensionSchema:
    return DimensionSchema.load(config.schema) if config.schema else default_schema()


def load_database(config: RunConfig, schema: DimensionSchema | None = None) -> PersonaDatabase:
    return ingest_database(config.db or bundled_database_path(), schema or load_schema(config))


def eval_config(config: RunConfig) -> EvalConfig:
    return EvalConfig(epsilon=config.epsilon, k=config.K, offline=config.offline, seed=config.seed)


def attach(population: Population, **extra: Any) -> Population:
    return Population(population.topic, population.members, {**population.meta, **extra})


# -- experiments ---------------------------------------------------------------

def _ground_truth(spec: TopicSpec, config: RunConfig, provider: KnowledgeProvider, schema) -> Population:
    if spec.gt:
        return Population.load(spec.gt)
    if spec.corpus or spec.theme:
        posts = load_corpus(spec.corpus or toy_corpus_path())
        return build_benchmark(posts, spec.topic, provider, theme=spec.theme, schema=schema, workers=config.workers)
    raise HagError(f"topic {spec.label!r} has no ground truth (set 'gt', or 'corpus' and 'theme')")


def _cell_name(spec: TopicSpec, method: Method) -> str:
    return f"{spec.label}__{method.slug}"


def run_experiment(
    config: RunConfig,
    topics: Sequence[TopicSpec] | None = None,
    methods: Iterable[str] | None = None,
    run_dir: str | Path | None = None,
) -> Path:
    """Generate and evaluate every (topic, method) cell.

    A failing cell is recorded in the summary and the run carries on.
    ``summary.json`` holds no timestamps, so reruns with the same seeds and
    transcripts reproduce it byte for byte; wall-clock details go to
    ``manifest.json``.
    """
    topics = list(topics if topics is not None else config.topics)
    method_list = [Method.parse(m) if isinstance(m, str) else m for m in (methods or config.methods)]
    if not topics:
        raise HagError("no topics configured")
    started = datetime.now(timezone.utc)
    if run_dir is None:
        run_dir = Path(config.output_dir) / f"{started.strftime('%Y%m%dT%H%M%SZ')}-{config.label}"
    run_dir = Path(run_dir)
    for sub in ("trees", "populations", "reports"):
        (run_dir / sub).mkdir(parents=True, exist_ok=True)

    schema = load_schema(config)
    echo = config.to_dict()
    provider = build_provider(config)
    judge = build_judge(config)
    embedder = build_embedder(config)
    try:
        db: PersonaDatabase | None = load_database(config, schema)
        db_error = None
    except HagError as exc:
        db, db_error = None, exc

    gts: dict[str, Population | HagError] = {}
    for spec in topics:
        try:
            gt = attach(_ground_truth(spec, config, provider, schema), config=echo)
            gt.save(run_dir / "populations" / f"{spec.label}__gt.json")
            gts[spec.label] = gt
        except HagError as exc:
            gts[spec.label] = exc

    def cell(spec: TopicSpec, method: Method) -> dict:
        row: dict[str, Any] = {"topic": spec.label, "method": method.value}
        gt = gts[spec.label]
        try:
            if isinstance(gt, HagError):
                raise gt
            if db is None and method is not Method.LLM_GENERATE:
                raise db_error
            options: dict[str, Any] = {}
            if method in (Method.HAG, Method.HAG_FLAT):
                options["tree_path"] = run_dir / "trees" / f"{_cell_name(spec, method)}.json"
            if method is Method.HAG:
                options["min_path_prob"] = config.min_path_prob
            gspec = GeneratorSpec(method, spec.topic, config.N, config.seed, options)
            pop = attach(run_generator(gspec, db, provider, embedder, schema), config=echo)
            pop.save(run_dir / "populations" / f"{_cell_name(spec, method)}.json")
            report = evaluate(pop, gt, eval_config(config), schema, judge, embedder)
            report.config = {**report.config, "run": echo, "seed": config.seed}
            report.save(run_dir / "reports" / f"{_cell_name(spec, method)}.json")
            row.update(report.summary_row())
            row["error"] = None
        except HagError as exc:
            log.warning("cell %s/%s failed: %s", spec.label, method.value, exc)
            row.update(dict.fromkeys(SUMMARY_METRICS))
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    grid = [(s, m) for s in topics for m in method_list]
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        rows = list(pool.map(lambda sm: cell(*sm), grid))

    summary = {
        "format_version": io.FORMAT_VERSION,
        "kind": "summary",
        "config": echo,
        "cells": rows,
        "methods": _method_means(rows, method_list),
    }
    io.write_json(run_dir / "summary.json", summary)
    (run_dir / "summary.csv").write_text(_summary_csv(summary["methods"]), encoding="utf-8")
    io.write_json(
        run_dir / "manifest.json",
        {
            "format_version": io.FORMAT_VERSION,
            "kind": "manifest",
            "started": started.isoformat(),
            "finished": datetime.now(timezone.utc).isoformat(),
            "provider_calls": dict(sorted(provider.calls.items())),
            "config": echo,
        },
    )
    return run_dir


def _method_means(rows: list[dict], methods: Sequence[Method]) -> list[dict]:
    out = []
    for m in methods:
        cells = [r for r in rows if r["method"] == m.value]
        entry: dict[str, Any] = {"method": m.value, "cells": len(cells), "failed": sum(1 for r in cells if r["error"])}
        for metric in SUMMARY_METRICS:
            vals = [r[metric] for r in cells if r[metric] is not None]
            entry[metric] = sum(vals) / len(vals) if vals else None
        out.append(entry)
    return out


def _summary_csv(means: list[dict]) -> str:
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["method", *SUMMARY_METRICS, "cells", "failed"], lineterminator="\n")
    writer.writeheader()
    for entry in means:
        writer.writerow({k: ("" if entry[k] is None else entry[k]) for k in writer.fieldnames})
    return buf.getvalue()


# -- inspection and export -------------------------------------------------------

def _table(rows: list[tuple], header: tuple) -> list[str]:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return [fmt.format(*header), fmt.format(*("-" * w for w in widths)), *(fmt.format(*map(str, r)) for r in rows)]


def render_population(pop: Population, schema: DimensionSchema | None = None) -> str:
    schema = schema or default_schema()
    real = sum(1 for m in pop.members if m.provenance.value == "real")
    lines = [f"population: {pop.topic!r}  size={pop.size}  real={real}  augmented={pop.size - real}"]
    for dim in schema:
        counts: dict[str, int] = {}
        for m in pop.members:
            label = m.values.get(dim.id, "Unknown")
            counts[label] = counts.get(label, 0) + 1
        rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        lines.append("")
        lines.append(f"{dim.name} ({dim.id})")
        lines.extend("  " + s for s in _table([(k, v, f"{v / pop.size:.3f}") for k, v in rows], ("value", "count", "share")))
    return "\n".join(lines)


def render_report(report: EvalReport) -> str:
    lines = [f"report: {report.topic!r}  gen={report.gen_size}  gt={report.gt_size}"]
    rows = [
        (d, f"{report.jsd[d]:.4f}", f"{report.kl[d]:.4f}", f"{report.gini_gen[d]:.4f}", f"{report.gini_gt[d]:.4f}")
        for d in report.dimensions
    ]
    lines.extend(_table(rows, ("dimension", "JSD", "KL", "GS gen", "GS gt")))
    lines.append("")
    for key, value in report.summary_row().items():
        lines.append(f"{key:<8} {'absent' if value is None else (f'{value:.4f}' if isinstance(value, float) else value)}")
    for dim, why in report.excluded.items():
        lines.append(f"excluded {dim}: {why}")
    lines.extend(f"error: {e}" for e in report.errors)
    return "\n".join(lines)


def inspect(path: str | Path) -> str:
    """Human-readable rendering of a tree, population, report or summary file."""
    doc = io.read_json(path)
    kind = doc.get("kind") if isinstance(doc, dict) else None
    if kind == "tree":
        return render_tree(deserialize_tree(doc), default_schema())
    if kind == "population":
        return render_population(Population.from_dict(doc))
    if kind == "report":
        return render_report(EvalReport.from_dict(doc))
    if kind == "summary":
        rows = [
            (m["method"], *("-" if m[k] is None else f"{m[k]:.4f}" for k in SUMMARY_METRICS), m["failed"])
            for m in doc["methods"]
        ]
        return "\n".join(_table(rows, ("method", *SUMMARY_METRICS, "failed")))
    raise UnknownArtifactType(f"{path}: unrecognized artifact kind {kind!r}", 0)


def export_embeddings(pop: Population, embedder: Embedder, out: str | Path) -> int:
    """One ``{"id", "vector"}`` JSON line per member."""
    vectors = embed_records(embedder, pop.members)
    with open(out, "w", encoding="utf-8") as fh:
        fh.writelines(json.dumps({"id": member.source_id or f"member-{i:05d}", "vector": [round(float(x), 8) for x in vec]}) + "\n" for i, (member, vec) in enumerate(zip(pop.members, vectors)))
    return len(pop.members)
