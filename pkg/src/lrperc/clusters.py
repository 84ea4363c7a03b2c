"""Connected components of a configuration via union-find.

The union-find core (union by rank, full path compression at the end) is
jitted; building a forest is O((V + E) * alpha(V)) and the finished forest is
an immutable array of root labels, so all queries are plain array lookups and
safe to use concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .sampler import Configuration

__all__ = ["ClusterForest", "build_clusters", "connected", "cluster_statistics"]


@njit(cache=True)
def _union_find(n, eu, ev):  # pragma: no cover - exercised via build_clusters
    parent = np.arange(n, dtype=np.int64)
    rank = np.zeros(n, dtype=np.int8)
    for i in range(eu.size):
        a = eu[i]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = ev[i]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a == b:
            continue
        if rank[a] < rank[b]:
            a, b = b, a
        parent[b] = a
        if rank[a] == rank[b]:
            rank[a] += 1
    # full compression: every vertex points straight at its root
    for v in range(n):
        r = v
        while parent[r] != r:
            r = parent[r]
        while parent[v] != r:
            nxt = parent[v]
            parent[v] = r
            v = nxt
    return parent


@dataclass(frozen=True)
class ClusterForest:
    """Fully compressed forest: labels[v] is the root of v's cluster."""

    vertex_count: int
    origin_index: int
    labels: np.ndarray = field(repr=False)  # (V,) int64 root per vertex
    sizes: np.ndarray = field(repr=False)  # (V,) int64, nonzero only at roots

    @property
    def component_count(self) -> int:
        return int(np.count_nonzero(self.sizes))

    def size_of(self, vertex: int) -> int:
        return int(self.sizes[self.labels[vertex]])


def build_clusters(config: Configuration) -> ClusterForest:
    n = config.box.vertex_count
    edges = config.edges
    labels = _union_find(n, np.ascontiguousarray(edges[:, 0]), np.ascontiguousarray(edges[:, 1]))
    sizes = np.bincount(labels, minlength=n).astype(np.int64)
    return ClusterForest(
        vertex_count=n, origin_index=config.box.origin_index, labels=labels, sizes=sizes
    )


def connected(forest: ClusterForest, x: int, y: int) -> bool:
    """True iff vertices x and y (flat indices) lie in the same cluster."""
    for v in (x, y):
        if not 0 <= v < forest.vertex_count:
            raise ValueError(f"vertex index {v} outside the box")
    return bool(forest.labels[x] == forest.labels[y])


def cluster_statistics(forest: ClusterForest) -> tuple[int, np.ndarray, int]:
    """(origin cluster size, sorted cluster sizes, largest cluster size)."""
    all_sizes = np.sort(forest.sizes[forest.sizes > 0])
    origin = forest.size_of(forest.origin_index)
    return origin, all_sizes, int(all_sizes[-1])
