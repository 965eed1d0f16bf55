"""Dominant archetypes: k-means over persona embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..embedding import Embedder, HashEmbedder, embed_records
from ..errors import PopulationTooSmall
from ..persona import PersonaRecord, Population

MAX_ITER = 100


def _sq_dists(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def farthest_point_seeds(X: np.ndarray, k: int, seed: int = 0) -> list[int]:
    """A seeded random first center, then repeatedly the point farthest from all chosen ones."""
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(len(X)))]
    d = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        d_masked = d.copy()
        d_masked[chosen] = -1.0
        nxt = int(np.argmax(d_masked))
        chosen.append(nxt)
        d = np.minimum(d, ((X - X[nxt]) ** 2).sum(axis=1))
    return chosen


def kmeans(X: np.ndarray, k: int, seed: int = 0, max_iter: int = MAX_ITER) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iterations from farthest-point seeds; returns (centers, labels)."""
    X = np.asarray(X, dtype=float)
    n = len(X)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    centers = X[farthest_point_seeds(X, k, seed)].copy()
    labels = np.full(n, -1)
    for _ in range(max_iter):
        new = np.argmin(_sq_dists(X, centers), axis=1)
        for j in range(k):
            if not np.any(new == j):
                # re-seed an empty cluster with the worst-served point
                worst = int(np.argmax(((X - centers[new]) ** 2).sum(axis=1)))
                new[worst] = j
        if np.array_equal(new, labels):
            break
        labels = new
        centers = np.stack([X[labels == j].mean(axis=0) for j in range(k)])
    return centers, labels


@dataclass(frozen=True)
class Archetype:
    representative: PersonaRecord
    member_index: int
    share: float
    size: int


def cluster_embeddings(X: np.ndarray, k: int, seed: int = 0) -> list[tuple[int, float, int]]:
    """(representative index, share, size) per cluster, largest share first."""
    n = len(X)
    if k == n:
        return [(i, 1.0 / n, 1) for i in range(n)]
    centers, labels = kmeans(X, k, seed)
    out = []
    for j in range(k):
        members = np.flatnonzero(labels == j)
        dist = ((X[members] - centers[j]) ** 2).sum(axis=1)
        rep = int(members[np.argmin(dist)])
        out.append((rep, members.size / n, int(members.size)))
    out.sort(key=lambda t: (-t[1], t[0]))
    return out


def archetype_centroids(
    population: Population, embedder: Embedder | None = None, K: int = 4, seed: int = 0
) -> list[Archetype]:
    if population.size < K:
        raise PopulationTooSmall(f"population of {population.size} cannot form {K} clusters")
    embedder = embedder or HashEmbedder()
    X = embed_records(embedder, population.members)
    return [
        Archetype(population.members[i], i, share, size)
        for i, share, size in cluster_embeddings(X, K, seed)
    ]
