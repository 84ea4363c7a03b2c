"""Finite boxes of Z^d with a flat vertex indexing.

A BoxLattice is the box [-n, n]^d. Vertices map to flat indices row-major
over coordinates, so index 0 is (-n, ..., -n) and the origin sits exactly in
the middle. Displacement classes (all vertex pairs sharing the same
difference vector) are enumerated once per (d, n, truncation) and cached,
since they depend only on geometry.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .kernel import KernelSpec, edge_probability_at_distance

__all__ = ["BoxLattice", "DisplacementClasses", "enumerate_displacement_classes"]


@dataclass(frozen=True)
class BoxLattice:
    d: int
    radius: int

    def __post_init__(self) -> None:
        if not 1 <= self.d <= 3:
            raise ValueError(f"dimension must be in 1..3, got {self.d}")
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def vertex_count(self) -> int:
        return self.side**self.d

    @property
    def origin_index(self) -> int:
        return (self.vertex_count - 1) // 2

    def index_of(self, vertex) -> np.ndarray:
        """Flat index of a vertex (or (..., d) array of vertices)."""
        v = np.atleast_1d(np.asarray(vertex, dtype=np.int64))
        if self.d == 1 and v.ndim == 1 and v.shape[-1] != 1:
            v = v[..., None]
        if np.any(np.abs(v) > self.radius):
            raise ValueError("vertex outside the box")
        idx = np.zeros(v.shape[:-1], dtype=np.int64)
        for i in range(self.d):
            idx = idx * self.side + (v[..., i] + self.radius)
        return idx if idx.shape else idx[()]

    def vertex_of(self, index) -> np.ndarray:
        """Inverse of index_of; returns (..., d) coordinates."""
        idx = np.asarray(index, dtype=np.int64)
        if np.any((idx < 0) | (idx >= self.vertex_count)):
            raise ValueError("index outside the box")
        out = np.empty(idx.shape + (self.d,), dtype=np.int64)
        rem = idx.copy()
        for i in reversed(range(self.d)):
            out[..., i] = rem % self.side - self.radius
            rem //= self.side
        return out

    def coordinates(self) -> np.ndarray:
        """All vertex coordinates in index order, shape (V, d)."""
        return self.vertex_of(np.arange(self.vertex_count))

    def window_indices(self, m: int) -> np.ndarray:
        """Flat indices of the inner window [-m, m]^d, m <= radius."""
        if m > self.radius:
            raise ValueError(f"window radius {m} exceeds box radius {self.radius}")
        axis = np.arange(-m, m + 1, dtype=np.int64)
        if self.d == 1:
            return axis + self.radius
        grids = np.meshgrid(*([axis] * self.d), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        return self.index_of(pts)


@dataclass(frozen=True)
class DisplacementClasses:
    """Canonical displacement vectors with pair counts and edge probabilities.

    ``disp`` holds one representative per {v, -v} pair (first nonzero
    coordinate positive), ``norms`` their sup-norms, ``pair_count`` the number
    M_v of unordered in-box pairs at that displacement, and ``probability``
    the per-pair open probability at the beta the classes were built for.
    """

    disp: np.ndarray  # (C, d) int64
    norms: np.ndarray  # (C,) int64
    pair_count: np.ndarray  # (C,) int64
    probability: np.ndarray  # (C,) float64


@lru_cache(maxsize=32)
def _class_geometry(d: int, radius: int, max_norm: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    side = 2 * radius + 1
    if d == 1:
        v = np.arange(1, max_norm + 1, dtype=np.int64)[:, None]
    else:
        axis = np.arange(-max_norm, max_norm + 1, dtype=np.int64)
        first = np.arange(0, max_norm + 1, dtype=np.int64)
        grids = np.meshgrid(first, *([axis] * (d - 1)), indexing="ij")
        v = np.stack([g.ravel() for g in grids], axis=-1)
        # canonical: first nonzero coordinate strictly positive
        lead_sign = np.zeros(len(v), dtype=np.int64)
        for i in range(d):
            undecided = lead_sign == 0
            lead_sign[undecided] = np.sign(v[undecided, i])
        v = v[lead_sign > 0]
    norms = np.max(np.abs(v), axis=-1)
    keep = norms >= 1
    v, norms = v[keep], norms[keep]
    counts = np.prod(side - np.abs(v), axis=-1).astype(np.int64)
    keep = counts > 0
    v, norms, counts = v[keep], norms[keep], counts[keep]
    order = np.lexsort(tuple(v[:, i] for i in reversed(range(d))) + (norms,))
    return v[order], norms[order], counts[order]


def enumerate_displacement_classes(box: BoxLattice, spec: KernelSpec, beta: float) -> DisplacementClasses:
    """All canonical displacement classes with nonzero pair count and probability."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    if spec.d != box.d:
        raise ValueError("kernel and box dimensions disagree")
    max_norm = 2 * box.radius
    if spec.truncation is not None:
        max_norm = min(max_norm, spec.truncation)
    disp, norms, counts = _class_geometry(box.d, box.radius, max_norm)
    prob = edge_probability_at_distance(spec, beta, norms)
    keep = prob > 0
    return DisplacementClasses(
        disp=disp[keep], norms=norms[keep], pair_count=counts[keep], probability=prob[keep]
    )


def decode_pair_indices(box: BoxLattice, disp: np.ndarray, pair_idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map within-class pair indices to (u, u+v) flat vertex indices.

    Pairs {u, u+v} are ordered mixed-radix over the admissible range of each
    coordinate of u, which has size 2n+1-|v_i|.
    """
    n, side, d = box.radius, box.side, box.d
    sizes = side - np.abs(disp)
    lo = -n + np.maximum(0, -disp)
    u = np.empty((len(pair_idx), d), dtype=np.int64)
    rem = pair_idx.astype(np.int64).copy()
    for i in reversed(range(d)):
        u[:, i] = rem % sizes[i] + lo[i]
        rem //= sizes[i]
    return box.index_of(u), box.index_of(u + disp)
