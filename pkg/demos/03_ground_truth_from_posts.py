"""
A ground-truth population from user posts
=========================================

The bundled toy corpus has 200 users across three communities.  Each user's
posts are filtered, concatenated newest first and turned into one persona.
"""

# %%
from collections import Counter

from hag.bench import FilterPolicy, build_benchmark, filter_corpus, load_corpus
from hag.errors import InsufficientVolume
from hag.experiment import toy_corpus_path, toy_profiles
from hag.provider import KnowledgeProvider, MockBackend

posts = load_corpus(toy_corpus_path())
print(f"{len(posts)} posts from {len({p.user_id for p in posts})} users")

# %%
# Short posts (under 15 whitespace tokens, after URLs are removed) do not count.
result = filter_corpus(posts, FilterPolicy(), theme="astronomy")
print(f"astronomy: {len(result.users)} users kept, dropped: {dict(result.dropped)}")

# %%
# The mock provider reads a fixed table of profiles, standing in for a model
# reading the posts.  Missing attributes stay Unknown.
provider = KnowledgeProvider(MockBackend(profiles=toy_profiles()))
gt = build_benchmark(posts, "Amateur astronomy enthusiasts", provider, theme="astronomy")
for dim in ("education", "religion", "ethnicity"):
    counts = Counter(m.values[dim] for m in gt.members)
    print(f"{dim:<10} " + ", ".join(f"{k}: {v}" for k, v in counts.most_common(4)))

# %%
# Fewer than 50 surviving users is refused unless forced.
try:
    build_benchmark(posts[:40], "tiny", provider)
except InsufficientVolume as exc:
    print(f"\n{type(exc).__name__}: {exc}")
