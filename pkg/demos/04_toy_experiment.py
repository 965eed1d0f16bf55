"""
A full topic x method experiment, offline
=========================================

Runs the config in ``configs/toy_run.json``: two toy communities, all five
generators, scored against ground truth built from the toy corpus.

The mock provider answers from a hash of each request.  It knows nothing
about astronomers or cooks, so its trees are arbitrary and the hierarchical
generator has no advantage here; random selection from the survey sample
can easily beat it.  The point of this run is the plumbing (layout,
reproducibility, failure isolation).  Swap in ``"provider": "http"`` with a
real endpoint for a meaningful comparison.
"""

# %%
import tempfile
from pathlib import Path

from hag.config import RunConfig
from hag.experiment import inspect, run_experiment

config = RunConfig.load(Path(__file__).parent / "configs" / "toy_run.json")
out = Path(tempfile.mkdtemp()) / "toy"

# %%
run_dir = run_experiment(config, run_dir=out)
print(inspect(run_dir / "summary.json"))

# %%
# Every artifact is plain JSON and can be rendered again later.
for sub in ("trees", "populations", "reports"):
    print(f"{sub}: {sorted(p.name for p in (run_dir / sub).iterdir())[:3]} ...")
print()
print(inspect(run_dir / "reports" / "astronomy__hag.json"))
