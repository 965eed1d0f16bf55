"""
From a topic to a grounded population
=====================================

Build a distribution tree with the offline mock provider, look at it, then
fill its leaves from the bundled survey sample.  Leaves the sample cannot
cover are tagged MISS and topped up by the provider.
"""

# %%
from hag.grounding import (
    PersonaDatabase,
    allocations_of,
    instantiate,
    load_sample_database,
)
from hag.persona import default_schema
from hag.provider import KnowledgeProvider, MockBackend, ProviderParams
from hag.tree import build_tree, enumerate_leaves, prune, render_tree

schema = default_schema()
provider = KnowledgeProvider(MockBackend(seed=3), ProviderParams(max_depth=3, max_branches=3))

# %%
# One prioritization call picks the dimensions; then one conditional call
# per internal node, each seeing the full path above it.
tree = build_tree("Retired sailors' forum", schema, provider)
print(render_tree(tree, schema))
print(f"\nprovider calls: {dict(provider.calls)}")

# %%
# Rare branches can be cut before grounding; survivors are renormalized.
leaves = enumerate_leaves(tree)
print(f"{len(leaves)} leaves, smallest path probability {min(l.path_prob for l in leaves):.4f}")
pruned = prune(tree, 0.02)
print(f"after pruning at 0.02: {len(enumerate_leaves(pruned))} leaves")

# %%
# Ground 300 agents in a 400-row slice of the synthetic survey sample, small
# enough that some leaves run short of real people.
db = PersonaDatabase(load_sample_database().records[:400])
pop = instantiate(pruned, db, 300, provider, seed=0)
print(f"\n{'leaf':<60} {'n':>4} {'m':>5}  tag")
for a in allocations_of(pop):
    path = " / ".join(a.persona.labels)
    print(f"{path[:60]:<60} {a.target:>4} {a.available:>5}  {a.tag.value}")

real = sum(m.provenance.value == "real" for m in pop.members)
print(f"\n{real} real records, {pop.size - real} generated to fill gaps")
