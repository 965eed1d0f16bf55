"""Population-alignment metrics: divergences and diversity.

All logarithms are base 2, so the Jensen-Shannon divergence lies in [0, 1].
Distributions are compared over the union of their supports with absent
labels counted as probability zero.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence

from ..errors import DimensionMismatch, NoEvaluableDimensions
from ..persona import (
    DimensionSchema,
    Distribution,
    Population,
    default_schema,
    has_known,
    marginal,
)

KL_EPSILON = 1e-6


def _aligned(P: Distribution, Q: Distribution) -> tuple[list[float], list[float]]:
    if P.dimension_id != Q.dimension_id:
        raise DimensionMismatch(f"cannot compare {P.dimension_id} with {Q.dimension_id}")
    support = sorted(set(P.entries) | set(Q.entries))
    return [P[s] for s in support], [Q[s] for s in support]


def _kl_bits(p: Sequence[float], q: Sequence[float]) -> float:
    return sum(pi * math.log2(pi / qi) for pi, qi in zip(p, q) if pi > 0)


def jsd(P: Distribution, Q: Distribution) -> float:
    p, q = _aligned(P, Q)
    # p / ((p + q) / 2) written as 2p / (p + q): the halved mixture can underflow to zero
    value = 0.5 * sum(a * math.log2(2 * a / (a + b)) for a, b in zip(p, q) if a > 0)
    value += 0.5 * sum(b * math.log2(2 * b / (a + b)) for a, b in zip(p, q) if b > 0)
    return min(1.0, max(0.0, value))


def kl(P: Distribution, Q: Distribution, epsilon: float = KL_EPSILON) -> float:
    """KL(P || Q) in bits.

    When Q assigns zero to a label P uses, Q is smoothed by adding
    ``epsilon`` to every entry and renormalizing, which keeps the value
    finite.  Zero-free comparisons are left exact.
    """
    p, q = _aligned(P, Q)
    # a subnormal q can overflow p / q just as a zero would
    if any(pi > 0 and (qi == 0 or pi / qi == math.inf) for pi, qi in zip(p, q)):
        if epsilon <= 0:
            return math.inf
        z = 1 + epsilon * len(q)
        q = [(qi + epsilon) / z for qi in q]
    return max(0.0, _kl_bits(p, q))


def gini_simpson(P: Distribution) -> float:
    return max(0.0, 1.0 - sum(p * p for p in P.entries.values()))


def evaluable_dimensions(
    gen: Population, gt: Population, schema: DimensionSchema | None = None
) -> tuple[list[str], dict[str, str]]:
    """Dimensions both populations have known values on, plus why the rest were dropped."""
    schema = schema or default_schema()
    keep, excluded = [], {}
    for dim in schema.ids:
        if not has_known(gt, dim):
            excluded[dim] = "ground truth entirely Unknown"
        elif not has_known(gen, dim):
            excluded[dim] = "generated population entirely Unknown"
        else:
            keep.append(dim)
    return keep, excluded


def per_dimension(
    gen: Population,
    gt: Population,
    fn: Callable[[Distribution, Distribution], float],
    schema: DimensionSchema | None = None,
    dims: Sequence[str] | None = None,
) -> dict[str, float]:
    schema = schema or default_schema()
    if dims is None:
        dims, _ = evaluable_dimensions(gen, gt, schema)
    if not dims:
        raise NoEvaluableDimensions("no dimension has known values in both populations")
    return {d: fn(marginal(gen, d, schema), marginal(gt, d, schema)) for d in dims}


def dist_fidelity(
    gen: Population,
    gt: Population,
    schema: DimensionSchema | None = None,
    metric: str = "jsd",
    epsilon: float = KL_EPSILON,
    dims: Sequence[str] | None = None,
) -> float:
    """Mean per-dimension divergence of generated marginals from ground-truth marginals."""
    if metric == "jsd":
        fn = jsd
    elif metric == "kl":
        fn = lambda P, Q: kl(P, Q, epsilon)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    values = per_dimension(gen, gt, fn, schema, dims)
    return sum(values.values()) / len(values)


def diversity_error(
    gen: Population, gt: Population, schema: DimensionSchema | None = None, dims: Sequence[str] | None = None
) -> float:
    """Mean absolute gap between generated and ground-truth Gini-Simpson indices."""
    values = per_dimension(gen, gt, lambda P, Q: abs(gini_simpson(P) - gini_simpson(Q)), schema, dims)
    return sum(values.values()) / len(values)
