"""Vectorized batch driver for small boxes (d=1).

Produces exactly the same per-replica configurations and accumulator sums as
the one-replica-at-a-time path (sample_configuration + build_clusters +
accumulators), but does the whole replica block in one numba kernel. Oracle
tests at 10^5..10^6 replicas on tiny boxes are only feasible through this
path; its pathwise equality with the reference path is asserted in tests.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .kernel import KernelSpec
from .lattice import BoxLattice, DisplacementClasses, enumerate_displacement_classes
from .rng import GOLDEN, stream_keys
from .sampler import TAG_COUNT, TAG_INDEX, TAG_RETRY, _binomial_counts, _nb_mix64, _resolve_distinct

__all__ = ["FAST_PATH_MAX_VERTICES", "supports", "batch_counts", "batch_class_counts"]

FAST_PATH_MAX_VERTICES = 4096
_MASK64 = (1 << 64) - 1


def supports(box: BoxLattice) -> bool:
    return box.d == 1 and box.vertex_count <= FAST_PATH_MAX_VERTICES


def _replica_keys(seed: int, rep_lo: int, rep_hi: int, class_count: int):
    """Stream keys for every (replica, substream, class), vectorized."""
    reps = np.arange(rep_lo, rep_hi, dtype=np.uint64)
    h1 = stream_keys(np.uint64(seed & _MASK64), reps)  # (R,) chain over replica
    cls = np.arange(class_count, dtype=np.uint64)
    count_keys = stream_keys(h1, np.uint64(TAG_COUNT))
    idx_keys = stream_keys(stream_keys(h1, np.uint64(TAG_INDEX))[:, None], cls[None, :])
    retry_keys = stream_keys(stream_keys(h1, np.uint64(TAG_RETRY))[:, None], cls[None, :])
    return count_keys, idx_keys, retry_keys


def batch_class_counts(spec: KernelSpec, beta: float, box: BoxLattice, seed: int,
                       rep_lo: int, rep_hi: int,
                       classes: DisplacementClasses | None = None) -> np.ndarray:
    """Per-class open counts K for a replica block, shape (R, C)."""
    if classes is None:
        classes = enumerate_displacement_classes(box, spec, beta)
    C = len(classes.pair_count)
    count_keys, _, _ = _replica_keys(seed, rep_lo, rep_hi, C)
    cnt = np.arange(C, dtype=np.uint64)
    with np.errstate(over="ignore"):
        vals = (count_keys[:, None] + (cnt[None, :] + np.uint64(1)) * np.uint64(GOLDEN))
    from .rng import mix64

    W = (mix64(vals) >> np.uint64(11)) * 2.0**-53
    return _binomial_counts(W, classes.pair_count[None, :], classes.probability[None, :])


@njit(cache=True)
def _batch_kernel_1d(n, K, idx_keys, retry_keys, vdisp, Ms, m, thresholds, x_flat):
    """One pass over a replica block: edges, clusters, window statistics.

    Returns (pair count sums, squared sums, tail fraction sums, squared sums,
    largest window-cluster size, origin<->x hit count), accumulated in replica
    order so the results match sequential per-replica accumulation exactly.
    """
    R, C = K.shape
    V = 2 * n + 1
    golden = np.uint64(GOLDEN)
    count_sum = np.zeros(m, dtype=np.int64)
    count_sq = np.zeros(m, dtype=np.float64)
    T = thresholds.size
    frac_sum = np.zeros(T, dtype=np.float64)
    frac_sq = np.zeros(T, dtype=np.float64)
    largest = 0
    conn_hits = 0
    counts = np.zeros(max(m, 1), dtype=np.int64)
    parent = np.empty(V, dtype=np.int64)
    sizes = np.zeros(V, dtype=np.int64)
    win_lo = n - m
    win_hi = n + m
    Vw = 2 * m + 1
    for r in range(R):
        for v in range(V):
            parent[v] = v
        for c in range(C):
            k = K[r, c]
            if k == 0:
                continue
            M = Ms[c]
            cand = np.empty(k, dtype=np.int64)
            for j in range(k):
                cand[j] = np.int64(_nb_mix64(idx_keys[r, c] + np.uint64(j + 1) * golden)
                                   % np.uint64(M))
            _resolve_distinct(cand, retry_keys[r, c], M)
            dv = vdisp[c]
            for j in range(k):
                a = cand[j]
                while parent[a] != a:
                    parent[a] = parent[parent[a]]
                    a = parent[a]
                b = cand[j] + dv
                while parent[b] != b:
                    parent[b] = parent[parent[b]]
                    b = parent[b]
                if a != b:
                    if a < b:
                        parent[b] = a
                    else:
                        parent[a] = b
        for v in range(V):
            root = v
            while parent[root] != root:
                root = parent[root]
            w = v
            while parent[w] != root:
                nxt = parent[w]
                parent[w] = root
                w = nxt
            sizes[v] = 0
        for v in range(V):
            sizes[parent[v]] += 1
        if m > 0:
            for c2 in range(m):
                counts[c2] = 0
            for i in range(win_lo, win_hi + 1):
                top = i + m
                if top > win_hi:
                    top = win_hi
                for j in range(i + 1, top + 1):
                    if parent[i] == parent[j]:
                        counts[j - i - 1] += 1
            for c2 in range(m):
                count_sum[c2] += counts[c2]
                count_sq[c2] += counts[c2] * counts[c2]
        for t in range(T):
            hit = 0
            for i in range(win_lo, win_hi + 1):
                if sizes[parent[i]] >= thresholds[t]:
                    hit += 1
            frac = hit / Vw
            frac_sum[t] += frac
            frac_sq[t] += frac * frac
        for i in range(win_lo, win_hi + 1):
            if sizes[parent[i]] > largest:
                largest = sizes[parent[i]]
        if x_flat >= 0 and parent[n] == parent[x_flat]:
            conn_hits += 1
    return count_sum, count_sq, frac_sum, frac_sq, largest, conn_hits


def batch_counts(spec: KernelSpec, beta: float, box: BoxLattice, m: int, seed: int,
                 rep_lo: int, rep_hi: int, classes: DisplacementClasses | None = None,
                 thresholds: np.ndarray | None = None, x_flat: int = -1):
    """Accumulated window statistics for replicas [rep_lo, rep_hi) on a small box."""
    if not supports(box):
        raise ValueError("fast path supports d=1 boxes up to "
                         f"{FAST_PATH_MAX_VERTICES} vertices")
    if classes is None:
        classes = enumerate_displacement_classes(box, spec, beta)
    C = len(classes.pair_count)
    if thresholds is None:
        thresholds = np.empty(0, dtype=np.int64)
    R = rep_hi - rep_lo
    if C == 0 or beta == 0:
        K = np.zeros((R, C), dtype=np.int64)
        _, idx_keys, retry_keys = _replica_keys(seed, rep_lo, rep_hi, C)
    else:
        K = batch_class_counts(spec, beta, box, seed, rep_lo, rep_hi, classes)
        _, idx_keys, retry_keys = _replica_keys(seed, rep_lo, rep_hi, C)
    vdisp = classes.disp[:, 0].astype(np.int64) if C else np.empty(0, dtype=np.int64)
    Ms = classes.pair_count.astype(np.int64) if C else np.empty(0, dtype=np.int64)
    return _batch_kernel_1d(
        box.radius, K, idx_keys, retry_keys, vdisp, Ms, int(m),
        np.asarray(thresholds, dtype=np.int64), int(x_flat),
    )
