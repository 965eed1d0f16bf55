import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hag.errors import (
    AllPruned,
    FormatVersionMismatch,
    InvariantViolation,
    PartialTree,
    UnknownArtifactType,
)
from hag.persona import PersonaVector
from hag.provider import KnowledgeProvider, MockBackend, ProviderParams
from hag.tree import (
    build_tree,
    deserialize_tree,
    enumerate_leaves,
    flat_tree,
    load_tree,
    prune,
    render_tree,
    save_tree,
    serialize_tree,
    tree_problems,
)


def uniform_binary():
    return flat_tree("coin", ["gender", "income_level"], [[("Male", 0.5), ("Female", 0.5)], [("Low", 0.5), ("High", 0.5)]])


def oracle_provider(**kw):
    """Education then income, income depending on education."""
    table = {
        ("*", "education", ()): [("Bachelor", 0.6), ("Doctorate", 0.4)],
        ("*", "income_level", (("education", "Bachelor"),)): [("Medium", 0.7), ("Low", 0.3)],
        ("*", "income_level", (("education", "Doctorate"),)): [("High", 0.9), ("Medium", 0.1)],
    }
    return KnowledgeProvider(MockBackend(dimensions={"*": ["Education", "Income Level"]}, conditionals=table, **kw))


def test_build_follows_provider_conditionals(schema):
    tree = build_tree("Physics", schema, oracle_provider())
    assert tree.dim_sequence == ("education", "income_level")
    leaves = {l.persona.labels: l.path_prob for l in enumerate_leaves(tree)}
    assert leaves == pytest.approx(
        {
            ("Bachelor", "Medium"): 0.42,
            ("Bachelor", "Low"): 0.18,
            ("Doctorate", "High"): 0.36,
            ("Doctorate", "Medium"): 0.04,
        }
    )


def test_one_conditional_call_per_internal_node(schema):
    provider = oracle_provider()
    tree = build_tree("Physics", schema, provider)
    assert provider.calls["prioritize"] == 1
    assert provider.calls["conditional"] == tree.internal_node_count() == 3


def test_closed_vocabulary_is_passed_as_allowed(schema):
    seen = []
    backend = MockBackend(seed=1, dimensions={"*": ["Gender"]})
    original = backend._answer_conditional

    def spy(payload):
        seen.append(payload["allowed"])
        return original(payload)

    backend._answer_conditional = spy
    build_tree("x", schema, KnowledgeProvider(backend))
    assert seen == [["Male", "Female"]]


def test_uniform_binary_tree_renders_two_levels(schema):
    text = render_tree(uniform_binary(), schema)
    lines = text.splitlines()
    assert lines[0] == "coin  [Gender > Income Level]"
    assert lines[1] == "  Gender=Male  (0.5)"
    assert lines[2] == "    Income Level=Low  (0.5)"
    assert len(lines) == 7


def test_leaf_probabilities_product_and_log_space():
    dims = [f"d{i}" for i in range(10)]
    tree = flat_tree("deep", dims, [[("a", 0.25), ("b", 0.75)]] * 10)
    leaves = enumerate_leaves(tree)
    assert len(leaves) == 1024
    assert math.fsum(l.path_prob for l in leaves) == pytest.approx(1.0, abs=1e-9)
    assert leaves[0].path_prob == pytest.approx(0.25**10, rel=1e-12)
    assert leaves[-1].persona.labels == ("b",) * 10


def test_tree_problems_detect_bad_weights():
    tree = uniform_binary()
    doc = serialize_tree(tree)
    doc["nodes"][0]["weight"] = 0.6
    with pytest.raises(InvariantViolation, match="sum"):
        deserialize_tree(doc)
    doc = serialize_tree(tree)
    doc["nodes"][0]["children"][0]["dimension_id"] = "gender"
    with pytest.raises(InvariantViolation):
        deserialize_tree(doc)
    assert tree_problems(tree) == []


def test_round_trip_and_version(tmp_path, schema):
    tree = build_tree("Physics", schema, oracle_provider())
    path = save_tree(tree, tmp_path / "tree.json")
    assert load_tree(path) == tree
    text = path.read_text()
    assert json.loads(text)["format_version"] == 1
    doc = json.loads(text)
    doc["format_version"] = 99
    with pytest.raises(FormatVersionMismatch):
        deserialize_tree(doc)
    (tmp_path / "bad.json").write_text(text[: len(text) // 2])
    with pytest.raises(UnknownArtifactType) as info:
        load_tree(tmp_path / "bad.json")
    assert info.value.offset is not None and info.value.offset > 0


def test_prune_renormalizes_survivors(schema):
    tree = build_tree("Physics", schema, oracle_provider())
    assert prune(tree, 0.0) is tree
    pruned = prune(tree, 0.1)
    leaves = {l.persona.labels: l.path_prob for l in enumerate_leaves(pruned)}
    # Doctorate/Medium (0.04) is gone; Doctorate keeps a single child of weight 1
    assert set(leaves) == {("Bachelor", "Medium"), ("Bachelor", "Low"), ("Doctorate", "High")}
    assert sum(leaves.values()) == pytest.approx(1.0)
    assert leaves[("Doctorate", "High")] == pytest.approx(0.4)
    with pytest.raises(AllPruned):
        prune(tree, 0.5)


def test_failure_mid_build_reports_partial_tree(schema):
    table = {("*", "education", ()): [("Bachelor", 0.5), ("Doctorate", 0.5)]}

    def conditional(topic, dim, ctx):
        if dim == "education":
            return table[("*", "education", ())]
        if ctx.get("education") == "Doctorate":
            return [("Nope", 1.0)]
        return [("Low", 1.0)]

    backend = MockBackend(dimensions={"*": ["Education", "Income Level"]}, conditionals=conditional)
    provider = KnowledgeProvider(backend, ProviderParams(retries=1))
    with pytest.raises(PartialTree) as info:
        build_tree("x", schema, provider)
    err = info.value
    assert err.path == PersonaVector.of(("education", "Doctorate"))
    assert err.partial.meta["partial"] is True
    assert [n.label for n in err.partial.children] == ["Bachelor", "Doctorate"]


def test_parallel_build_matches_serial(schema):
    a = build_tree("Volunteer firefighters", schema, KnowledgeProvider(MockBackend(seed=4)), workers=1)
    b = build_tree("Volunteer firefighters", schema, KnowledgeProvider(MockBackend(seed=4)), workers=8)
    assert serialize_tree(a) == serialize_tree(b)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 4))
def test_mock_trees_satisfy_invariants(seed, depth, branches):
    from hag.persona import default_schema

    params = ProviderParams(max_depth=depth, max_branches=branches)
    tree = build_tree(f"topic {seed}", default_schema(), KnowledgeProvider(MockBackend(seed=seed), params))
    assert tree_problems(tree) == []
    assert 1 <= tree.depth <= depth
    leaves = enumerate_leaves(tree)
    assert math.fsum(l.path_prob for l in leaves) == pytest.approx(1.0, abs=1e-6)
    assert all(len(l.persona) == tree.depth for l in leaves)
    for _, node in tree.nodes():
        assert len(node.children) <= branches
