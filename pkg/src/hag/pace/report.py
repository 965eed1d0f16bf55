"""The full evaluation report for one generated population."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .. import io
from ..embedding import Embedder, HashEmbedder, render_persona
from ..errors import HagError, NoEvaluableDimensions
from ..persona import DimensionSchema, Population, default_schema, marginal
from ..provider import KnowledgeProvider
from .archetypes import archetype_centroids
from .judging import arch_rel, ind_con
from .metrics import KL_EPSILON, evaluable_dimensions, gini_simpson, jsd, kl
from .sampling import LIKERT_SIGMA, MARGIN, Z_95, SamplingPlan

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalConfig:
    epsilon: float = KL_EPSILON
    k: int = 4
    offline: bool = True
    seed: int = 0
    Z: float = Z_95
    sigma: float = LIKERT_SIGMA
    E: float = MARGIN

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EvalReport:
    topic: str
    gen_size: int
    gt_size: int
    dimensions: list[str]
    excluded: dict[str, str]
    jsd: dict[str, float]
    kl: dict[str, float]
    s_dist_jsd: float
    s_dist_kl: float
    gini_gen: dict[str, float]
    gini_gt: dict[str, float]
    div_err: float
    arch_rel: int | None = None
    ind_con: float | None = None
    archetypes: list[dict] = field(default_factory=list)
    ind_con_sample: int | None = None
    judge: dict | None = None
    errors: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"format_version": io.FORMAT_VERSION, "kind": "report", **asdict(self)}

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> EvalReport:
        io.check_version(doc, "report")
        body = {k: v for k, v in doc.items() if k not in ("format_version", "kind")}
        return cls(**body)

    def save(self, path: str | Path) -> Path:
        return io.write_json(path, self.to_dict())

    @classmethod
    def load(cls, path: str | Path) -> EvalReport:
        return cls.from_dict(io.read_json(path))

    def summary_row(self) -> dict[str, float | None]:
        return {
            "JSD": self.s_dist_jsd,
            "KL": self.s_dist_kl,
            "DivErr": self.div_err,
            "ArchRel": self.arch_rel,
            "IndCon": self.ind_con,
        }


def evaluate(
    gen: Population,
    gt: Population,
    config: EvalConfig | None = None,
    schema: DimensionSchema | None = None,
    judge: KnowledgeProvider | None = None,
    embedder: Embedder | None = None,
) -> EvalReport:
    """Alignment metrics always; judge-based consistency unless offline or no judge.

    A judge failure leaves the consistency fields empty and is recorded in
    ``errors`` rather than raised.
    """
    config = config or EvalConfig()
    schema = schema or default_schema()
    if gen.topic != gt.topic:
        log.warning("comparing populations with different topics: %r vs %r", gen.topic, gt.topic)
    dims, excluded = evaluable_dimensions(gen, gt, schema)
    if not dims:
        raise NoEvaluableDimensions("no dimension has known values in both populations")
    gen_m = {d: marginal(gen, d, schema) for d in dims}
    gt_m = {d: marginal(gt, d, schema) for d in dims}
    jsd_v = {d: jsd(gen_m[d], gt_m[d]) for d in dims}
    kl_v = {d: kl(gen_m[d], gt_m[d], config.epsilon) for d in dims}
    gs_gen = {d: gini_simpson(gen_m[d]) for d in dims}
    gs_gt = {d: gini_simpson(gt_m[d]) for d in dims}
    report = EvalReport(
        topic=gen.topic,
        gen_size=gen.size,
        gt_size=gt.size,
        dimensions=dims,
        excluded=excluded,
        jsd=jsd_v,
        kl=kl_v,
        s_dist_jsd=sum(jsd_v.values()) / len(dims),
        s_dist_kl=sum(kl_v.values()) / len(dims),
        gini_gen=gs_gen,
        gini_gt=gs_gt,
        div_err=sum(abs(gs_gen[d] - gs_gt[d]) for d in dims) / len(dims),
        config=config.to_dict(),
    )
    if config.offline or judge is None:
        return report

    report.judge = judge.fingerprint
    try:
        k = min(config.k, gen.size)
        archetypes = archetype_centroids(gen, embedder or HashEmbedder(), k, config.seed)
        report.archetypes = [
            {"share": a.share, "size": a.size, "member_index": a.member_index, "text": render_persona(a.representative)}
            for a in archetypes
        ]
        report.arch_rel = arch_rel(judge, gen.topic, archetypes)[0]
    except HagError as exc:
        report.errors.append(f"ArchRel: {exc}")
    try:
        plan = SamplingPlan(gen.size, config.Z, config.sigma, config.E)
        picked = [gen.members[i] for i in plan.draw(config.seed)]
        report.ind_con_sample = len(picked)
        report.ind_con = ind_con(judge, gen.topic, picked, schema).mean
    except HagError as exc:
        report.errors.append(f"IndCon: {exc}")
    return report
