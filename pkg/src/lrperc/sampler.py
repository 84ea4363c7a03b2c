"""Seeded sampling of long-range percolation configurations.

The marginal law is product-Bernoulli over unordered in-box pairs, with the
pair {x, y} open with probability 1 - exp(-beta * J(x, y)). Sampling is done
per displacement class in expected O(V + open edges) time:

  * the open count K in a class of M_v pairs is drawn as the exact inverse
    binomial CDF of a single uniform W (so K ~ Binomial(M_v, p_v)), and
  * the open pairs are the first K entries of a lazily generated uniform
    random permutation of the class (rejection against already chosen pairs).

Both steps are monotone in the per-pair probability for a fixed key, so
configurations sampled at beta1 <= beta2 from the same (seed, replica) are
nested: the beta1 edge set is a subset of the beta2 edge set. This is the
common-random-numbers coupling used by the critical-point search.

All draws are counter-based (see rng.py), so the same configurations can be
produced one replica at a time or by the vectorized batch driver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import stats

from .kernel import KernelSpec
from .lattice import BoxLattice, DisplacementClasses, decode_pair_indices, enumerate_displacement_classes
from .rng import GOLDEN, counter_values, stream_key

__all__ = ["Configuration", "sample_configuration", "expected_open_edges"]

# Substream tags; the class index is appended for the per-class streams.
TAG_COUNT = 1
TAG_INDEX = 2
TAG_RETRY = 3


@dataclass(frozen=True)
class Configuration:
    """One sampled open-edge set, with full seed provenance."""

    box: BoxLattice
    beta: float
    seed: int
    replica: int
    edges: np.ndarray = field(repr=False)  # (E, 2) int64 flat vertex indices, u < w, sorted

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def _binomial_counts(W: np.ndarray, M: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Exact inverse-CDF binomial draws, one per class; monotone in p."""
    K = stats.binom.ppf(W, M, p)
    K = np.nan_to_num(K, nan=0.0)
    return np.clip(K, 0, M).astype(np.int64)


@njit(cache=True)
def _nb_mix64(z):  # pragma: no cover - exercised via sampler
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _resolve_distinct(cand, retry_key, M):  # pragma: no cover - exercised via sampler
    """Make the slot values distinct, redrawing collisions from the retry stream.

    Implements the lazy-permutation semantics: slot j keeps its candidate
    unless it collides with the final value of an earlier slot, in which case
    it pulls retry-stream values (in counter order) until it finds a free one.
    """
    seen = np.zeros(M, dtype=np.bool_)
    golden = np.uint64(GOLDEN)
    t = np.uint64(0)
    uM = np.uint64(M)
    for j in range(cand.size):
        v = cand[j]
        while seen[v]:
            t += np.uint64(1)
            v = np.int64(_nb_mix64(retry_key + t * golden) % uM)
        seen[v] = True
        cand[j] = v
    return cand


def _distinct_pair_indices(seed: int, replica: int, class_id: int, M: int, K: int) -> np.ndarray:
    """First K entries of the keyed uniform lazy permutation of range(M)."""
    idx_key = stream_key(seed, replica, TAG_INDEX, class_id)
    cand = (counter_values(idx_key, np.arange(K)) % np.uint64(M)).astype(np.int64)
    if K > 1 and len(np.unique(cand)) != K:
        retry_key = np.uint64(stream_key(seed, replica, TAG_RETRY, class_id))
        _resolve_distinct(cand, retry_key, M)
    return cand


def sample_configuration(
    spec: KernelSpec,
    beta: float,
    box: BoxLattice,
    seed: int,
    replica: int,
    classes: DisplacementClasses | None = None,
) -> Configuration:
    """Draw one configuration; a pure function of (spec, beta, box, seed, replica)."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    if classes is None:
        classes = enumerate_displacement_classes(box, spec, beta)
    C = len(classes.pair_count)
    if C == 0 or beta == 0:
        return Configuration(box=box, beta=beta, seed=seed, replica=replica,
                             edges=np.empty((0, 2), dtype=np.int64))

    W = (counter_values(stream_key(seed, replica, TAG_COUNT), np.arange(C))
         >> np.uint64(11)) * 2.0**-53
    K = _binomial_counts(W, classes.pair_count, classes.probability)

    us, ws = [], []
    for c in np.flatnonzero(K):
        idx = _distinct_pair_indices(seed, replica, int(c), int(classes.pair_count[c]), int(K[c]))
        a, b = decode_pair_indices(box, classes.disp[c], idx)
        us.append(a)
        ws.append(b)
    if not us:
        return Configuration(box=box, beta=beta, seed=seed, replica=replica,
                             edges=np.empty((0, 2), dtype=np.int64))
    u = np.concatenate(us)
    w = np.concatenate(ws)
    lo, hi = np.minimum(u, w), np.maximum(u, w)
    order = np.lexsort((hi, lo))
    edges = np.stack([lo[order], hi[order]], axis=1)
    return Configuration(box=box, beta=beta, seed=seed, replica=replica, edges=edges)


def expected_open_edges(spec: KernelSpec, beta: float, box: BoxLattice) -> float:
    """Sum of M_v * p_v over displacement classes (mean open-edge count)."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    classes = enumerate_displacement_classes(box, spec, beta)
    return float(np.sum(classes.pair_count * classes.probability))


def dump_configuration(config: Configuration, path) -> None:
    """Binary debug dump: header (d, n, beta, seed, replica, E), then edge pairs."""
    with open(path, "wb") as fh:
        fh.write(np.array([config.box.d, config.box.radius], dtype="<i8").tobytes())
        fh.write(np.array([config.beta], dtype="<f8").tobytes())
        fh.write(np.array([config.seed, config.replica, config.edge_count], dtype="<i8").tobytes())
        fh.write(config.edges.astype("<i8").tobytes())
