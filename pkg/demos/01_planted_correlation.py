"""
Why the tree conditions on its ancestors
========================================

A small world where income depends on education.  An oracle provider knows
the true conditionals, so the only thing separating the hierarchical
generator from the flat one is whether income is asked *given* education.
"""

# %%
# The world: a topic that over-represents three education levels, and an
# income table conditioned on education.
from hag.baselines import hag, hag_flat, random_select
from hag.grounding import PersonaDatabase
from hag.pace import dist_fidelity, jsd
from hag.persona import Distribution, joint
from hag.synthetic import CorrelatedWorld

world = CorrelatedWorld()
for (edu, inc), p in sorted(world.joint().items()):
    print(f"{edu:<16} {inc:<7} {p:.3f}   (product of marginals {world.product()[edu, inc]:.3f})")

# %%
# The closed-form gap between the joint and the product of its marginals is
# the floor on how wrong any factorized generator must be.
def cells(table):
    return Distribution("education+income_level", {" | ".join(k): v for k, v in table.items()})


print(f"\nJSD(joint, product) = {jsd(cells(world.joint()), cells(world.product())):.4f}")

# %%
# Ground truth is drawn from the joint; the database is a general population
# with education spread evenly, so every leaf can be filled with real people.
gt = world.ground_truth(2000, seed=7)
db = PersonaDatabase(world.database_records())
print(f"ground truth: {gt.size} people, database: {len(db)} records")

# %%
# Three generators, same size and seed.
pops = {
    "hag": hag(world.oracle_provider(), world.topic, 2000, None, db, seed=1),
    "hag-flat": hag_flat(world.oracle_provider(), world.topic, 2000, None, db, seed=1),
    "random": random_select(db, 2000, seed=1, topic=world.topic),
}

# %%
# Joint JSD over (education, income) and the mean per-dimension JSD over all
# twelve dimensions.  Social class, finances and occupation hang off the
# education-income pair in this world, so errors in the joint leak into them.
ref = joint(gt, ["education", "income_level"])
print(f"\n{'method':<10} {'joint JSD':>10} {'S_dist':>8}")
for name, pop in pops.items():
    j = jsd(joint(pop, ["education", "income_level"]), ref)
    print(f"{name:<10} {j:>10.4f} {dist_fidelity(pop, gt):>8.4f}")
