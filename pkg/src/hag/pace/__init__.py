"""Population alignment and consistency evaluation."""

from .archetypes import (
    Archetype,
    archetype_centroids,
    cluster_embeddings,
    farthest_point_seeds,
    kmeans,
)
from .judging import arch_rel, archetype_snippet, ind_con, judge_scores
from .metrics import (
    KL_EPSILON,
    dist_fidelity,
    diversity_error,
    evaluable_dimensions,
    gini_simpson,
    jsd,
    kl,
    per_dimension,
)
from .report import EvalConfig, EvalReport, evaluate
from .sampling import SamplingPlan, adaptive_sample_size

__all__ = [
    "KL_EPSILON",
    "Archetype",
    "EvalConfig",
    "EvalReport",
    "SamplingPlan",
    "adaptive_sample_size",
    "arch_rel",
    "archetype_centroids",
    "archetype_snippet",
    "cluster_embeddings",
    "dist_fidelity",
    "diversity_error",
    "evaluable_dimensions",
    "evaluate",
    "farthest_point_seeds",
    "gini_simpson",
    "ind_con",
    "jsd",
    "judge_scores",
    "kl",
    "kmeans",
    "per_dimension",
]
