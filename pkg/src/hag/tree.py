"""Topic-adaptive demographic distribution trees.

A tree hangs off a weightless virtual root (the topic).  Layer ``l`` holds
values of the ``l``-th prioritized dimension, and each edge carries the
conditional probability of the child value given the topic and the whole
ancestor path.  The probability of a leaf persona is the product of the
edge weights on its path.
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import io
from .errors import AllPruned, InvariantViolation, PartialTree, ProviderError
from .persona import AttributeValue, DimensionSchema, PersonaVector
from .provider import KnowledgeProvider, ProviderParams

SIBLING_TOL = 1e-9
MASS_TOL = 1e-6
# past this depth leaf probabilities are accumulated in log space
LOG_SPACE_DEPTH = 8


@dataclass(frozen=True)
class TreeNode:
    dimension_id: str
    value: AttributeValue
    edge_weight: float
    children: tuple[TreeNode, ...] = ()

    @property
    def label(self) -> str:
        return self.value.label

    def to_dict(self) -> dict:
        doc: dict[str, Any] = {
            "dimension_id": self.dimension_id,
            "value": self.value.label,
            "weight": self.edge_weight,
        }
        if self.children:
            doc["children"] = [c.to_dict() for c in self.children]
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> TreeNode:
        dim = doc["dimension_id"]
        return cls(
            dim,
            AttributeValue(dim, doc["value"]),
            float(doc["weight"]),
            tuple(cls.from_dict(c) for c in doc.get("children", ())),
        )


@dataclass(frozen=True)
class DistributionTree:
    topic: str
    dim_sequence: tuple[str, ...]
    children: tuple[TreeNode, ...]  # first layer; the root itself is virtual
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "dim_sequence", tuple(self.dim_sequence))
        object.__setattr__(self, "children", tuple(self.children))
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def depth(self) -> int:
        return len(self.dim_sequence)

    def nodes(self) -> Iterator[tuple[PersonaVector, TreeNode]]:
        """Depth-first walk yielding (path including the node, node)."""
        stack = [(PersonaVector(), c) for c in reversed(self.children)]
        while stack:
            path, node = stack.pop()
            here = path.extend(node.dimension_id, node.label)
            yield here, node
            stack.extend((here, c) for c in reversed(node.children))

    def internal_node_count(self) -> int:
        """Nodes that were expanded with a model call, the virtual root included."""
        if not self.children:
            return 0
        return 1 + sum(1 for _, n in self.nodes() if n.children)

    def validate(self) -> None:
        problems = tree_problems(self)
        if problems:
            raise InvariantViolation("; ".join(problems[:5]))

    def to_dict(self) -> dict:
        return {
            "format_version": io.FORMAT_VERSION,
            "kind": "tree",
            "topic": self.topic,
            "dim_sequence": list(self.dim_sequence),
            "nodes": [c.to_dict() for c in self.children],
            "meta": self.meta,
        }


def tree_problems(tree: DistributionTree) -> list[str]:
    out: list[str] = []

    def check_group(children: Sequence[TreeNode], depth: int, where: str) -> None:
        if not children:
            return
        if depth >= tree.depth:
            out.append(f"{where}: nodes deeper than the dimension sequence")
            return
        expected = tree.dim_sequence[depth]
        labels = [c.label for c in children]
        if len(set(labels)) != len(labels):
            out.append(f"{where}: duplicate sibling values")
        total = 0.0
        for c in children:
            if c.dimension_id != expected or c.value.dimension_id != expected:
                out.append(f"{where}: child on {c.dimension_id}, expected {expected}")
            if not (0.0 <= c.edge_weight <= 1.0) or math.isnan(c.edge_weight):
                out.append(f"{where}/{c.label}: weight {c.edge_weight} outside [0, 1]")
            total += c.edge_weight
            if not c.children and depth + 1 != tree.depth:
                out.append(f"{where}/{c.label}: leaf at depth {depth + 1}, expected {tree.depth}")
            check_group(c.children, depth + 1, f"{where}/{c.label}")
        if abs(total - 1.0) > SIBLING_TOL:
            out.append(f"{where}: sibling weights sum to {total!r}")

    check_group(tree.children, 0, tree.topic)
    return out


def serialize_tree(tree: DistributionTree) -> dict:
    return tree.to_dict()


def deserialize_tree(doc: Mapping[str, Any]) -> DistributionTree:
    io.check_version(doc, "tree")
    tree = DistributionTree(
        doc["topic"],
        tuple(doc["dim_sequence"]),
        tuple(TreeNode.from_dict(n) for n in doc.get("nodes", ())),
        doc.get("meta", {}),
    )
    tree.validate()
    return tree


def save_tree(tree: DistributionTree, path: str | Path) -> Path:
    return io.write_json(path, serialize_tree(tree))


def load_tree(path: str | Path) -> DistributionTree:
    return deserialize_tree(io.read_json(path))


# -- construction ------------------------------------------------------------

@dataclass
class _Draft:
    dimension_id: str
    label: str
    weight: float
    children: list[_Draft] = field(default_factory=list)

    def freeze(self) -> TreeNode:
        return TreeNode(
            self.dimension_id,
            AttributeValue(self.dimension_id, self.label),
            self.weight,
            tuple(c.freeze() for c in self.children),
        )


def _freeze_partial(topic, dims, roots, meta) -> DistributionTree:
    return DistributionTree(topic, dims, tuple(r.freeze() for r in roots), {**meta, "partial": True})


def build_tree(
    topic: str,
    schema: DimensionSchema,
    provider: KnowledgeProvider,
    params: ProviderParams | None = None,
    workers: int = 1,
) -> DistributionTree:
    """Build the tree layer by layer.

    Every node of layer ``l`` is expanded with one conditional-distribution
    call conditioned on its full ancestor path.  Calls within a layer are
    independent and may run on ``workers`` threads; results are attached in
    enumeration order, so the tree does not depend on scheduling.
    """
    params = params or provider.params
    if not topic.strip():
        raise ValueError("topic must be non-empty")
    dims = tuple(provider.prioritize_dims(topic, schema, params))
    meta = {"provider": provider.fingerprint, "params": params.to_dict()}

    roots: list[_Draft] = []
    # frontier entries: (ancestor path, list that receives the children)
    frontier: list[tuple[PersonaVector, list[_Draft]]] = [(PersonaVector(), roots)]

    def expand(item: tuple[PersonaVector, list[_Draft]], dim_id: str):
        path, _ = item
        allowed = schema.get(dim_id).vocabulary
        return provider.infer_conditional(topic, dim_id, path, params, allowed=allowed, schema=schema)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for layer, dim_id in enumerate(dims):
            futures = [pool.submit(expand, item, dim_id) for item in frontier]
            next_frontier = []
            for (path, sink), fut in zip(frontier, futures):
                try:
                    dist = fut.result()
                except ProviderError as exc:
                    for f in futures:
                        f.cancel()
                    where = path.describe() or "<root>"
                    raise PartialTree(
                        f"expanding {dim_id} under {where} (layer {layer + 1}) failed: {exc}",
                        path,
                        _freeze_partial(topic, dims, roots, meta),
                    ) from exc
                for wv in dist:
                    node = _Draft(dim_id, wv.label, wv.weight)
                    sink.append(node)
                    next_frontier.append((path.extend(dim_id, wv.label), node.children))
            frontier = next_frontier

    tree = DistributionTree(topic, dims, tuple(r.freeze() for r in roots), meta)
    tree.validate()
    return tree


def flat_tree(
    topic: str,
    dims: Sequence[str],
    marginals: Sequence[Sequence[tuple[str, float]]],
    meta: Mapping[str, Any] | None = None,
) -> DistributionTree:
    """A tree whose every layer repeats one context-free marginal (a factorized joint)."""

    def layer(i: int) -> tuple[TreeNode, ...]:
        if i == len(dims):
            return ()
        below = layer(i + 1)
        return tuple(TreeNode(dims[i], AttributeValue(dims[i], lab), w, below) for lab, w in marginals[i])

    tree = DistributionTree(topic, tuple(dims), layer(0), meta or {})
    tree.validate()
    return tree


# -- queries -----------------------------------------------------------------

@dataclass(frozen=True)
class LeafPersona:
    persona: PersonaVector
    path_prob: float


def enumerate_leaves(tree: DistributionTree) -> list[LeafPersona]:
    """Leaves in depth-first order with their root-to-leaf path probabilities."""
    use_logs = tree.depth > LOG_SPACE_DEPTH
    out: list[LeafPersona] = []

    def walk(nodes: Sequence[TreeNode], path: PersonaVector, acc: float) -> None:
        for n in nodes:
            here = path.extend(n.dimension_id, n.label)
            if use_logs:
                nxt = acc + math.log(n.edge_weight) if n.edge_weight > 0 else -math.inf
            else:
                nxt = acc * n.edge_weight
            if n.children:
                walk(n.children, here, nxt)
            else:
                out.append(LeafPersona(here, math.exp(nxt) if use_logs else nxt))

    walk(tree.children, PersonaVector(), 0.0 if use_logs else 1.0)
    return out


def prune(tree: DistributionTree, min_path_prob: float) -> DistributionTree:
    """Drop subtrees whose prefix probability is below ``min_path_prob``.

    Prefix probabilities are computed on the original weights; surviving
    siblings are then renormalized so total leaf mass is 1 again.
    """
    if not 0.0 <= min_path_prob < 1.0:
        raise ValueError("min_path_prob must lie in [0, 1)")
    if min_path_prob == 0.0:
        return tree

    def keep(nodes: Sequence[TreeNode], prefix: float, depth: int) -> tuple[TreeNode, ...]:
        survivors = []
        for n in nodes:
            p = prefix * n.edge_weight
            if p < min_path_prob:
                continue
            kids = keep(n.children, p, depth + 1) if n.children else ()
            if n.children and not kids:
                continue
            survivors.append((n, kids))
        total = sum(n.edge_weight for n, _ in survivors)
        return tuple(TreeNode(n.dimension_id, n.value, n.edge_weight / total, kids) for n, kids in survivors)

    kept = keep(tree.children, 1.0, 0)
    if not kept:
        raise AllPruned(f"no leaf reaches prefix probability {min_path_prob}")
    meta = {**tree.meta, "min_path_prob": min_path_prob}
    pruned = DistributionTree(tree.topic, tree.dim_sequence, kept, meta)
    pruned.validate()
    return pruned


def render_tree(tree: DistributionTree, schema: DimensionSchema | None = None) -> str:
    def name(dim_id: str) -> str:
        if schema is not None and dim_id in schema:
            return schema.get(dim_id).name
        return dim_id

    lines = [f"{tree.topic}  [{' > '.join(name(d) for d in tree.dim_sequence)}]"]

    def walk(nodes: Sequence[TreeNode], indent: int) -> None:
        for n in nodes:
            lines.append(f"{'  ' * indent}{name(n.dimension_id)}={n.label}  ({n.edge_weight:.4g})")
            walk(n.children, indent + 1)

    walk(tree.children, 1)
    return "\n".join(lines)
