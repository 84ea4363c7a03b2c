"""Estimators for the two-point function and everything derived from it.

Estimation is translation-averaged over an inner window [-m, m]^d of the
sampled box: a pair {u, u+x} counts toward tau_hat(x) when both endpoints lie
in the window and u, u+x are in the same cluster of the full-box
configuration. Working per cluster keeps the cost at
sum over clusters of |cluster ∩ window|^2 instead of (window volume)^2.

Accumulators are mergeable (plain sums), and drivers reduce them in ascending
replica order so results are bit-stable regardless of worker count. Batch
(block-of-replicas) subtotals are retained for bootstrap resampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np
from scipy import fft as sfft
from scipy import signal

from . import _fastpath
from .clusters import ClusterForest, build_clusters
from .kernel import KernelSpec
from .lattice import BoxLattice, _class_geometry
from .sampler import Configuration, sample_configuration

__all__ = [
    "TwoPointTable",
    "TwoPointAccumulator",
    "TailAccumulator",
    "SweepRecord",
    "XiEstimate",
    "two_point_estimate",
    "spatial_average",
    "susceptibility_estimate",
    "correlation_length_estimate",
    "triangle_estimate",
    "cluster_tail",
    "restricted_two_point",
    "window_mean_cluster_size",
]

# Switch a cluster's pair histogram to FFT autocorrelation when the direct
# quadratic count would exceed this many pair operations (d=1 only).
_FFT_PAIR_CUTOFF = 4_000_000
_BRUTE_CHUNK = 20_000_000


class XiEstimate(NamedTuple):
    """Correlation-length estimate; ``is_lower_bound`` marks the '>= m' sentinel."""

    value: int
    is_lower_bound: bool


# ---------------------------------------------------------------------------
# cached window geometry


@lru_cache(maxsize=32)
def _window_geometry(d: int, m: int):
    """Canonical nonzero displacements of the window, their norms and pair counts."""
    disp, norms, pairs = _class_geometry(d, m, m)
    return disp, norms, pairs


@lru_cache(maxsize=32)
def _window_indices(box: BoxLattice, m: int) -> np.ndarray:
    return box.window_indices(m)


@lru_cache(maxsize=32)
def _window_coords(box: BoxLattice, m: int) -> np.ndarray:
    return box.vertex_of(_window_indices(box, m))


@lru_cache(maxsize=16)
def _grid_to_class(d: int, m: int) -> np.ndarray:
    """Ravel-index lookup from a displacement in [-m, m]^d to its class row."""
    disp, _, _ = _window_geometry(d, m)
    side = 2 * m + 1
    lut = np.full(side**d, -1, dtype=np.int64)
    enc = np.zeros(len(disp), dtype=np.int64)
    for i in range(d):
        enc = enc * side + (disp[:, i] + m)
    lut[enc] = np.arange(len(disp))
    return lut


# ---------------------------------------------------------------------------
# per-configuration pair counting


def _cluster_groups(forest: ClusterForest, box: BoxLattice, m: int):
    win = _window_indices(box, m)
    labels_w = forest.labels[win]
    order = np.argsort(labels_w, kind="stable")
    sorted_labels = labels_w[order]
    change = np.concatenate([[True], sorted_labels[1:] != sorted_labels[:-1]])
    starts = np.flatnonzero(change)
    ends = np.append(starts[1:], len(sorted_labels))
    return order, starts, ends


def _pair_counts_1d(forest: ClusterForest, box: BoxLattice, m: int) -> np.ndarray:
    order, starts, ends = _cluster_groups(forest, box, m)
    pos_sorted = (np.arange(-m, m + 1, dtype=np.int64))[order]
    counts = np.zeros(m + 1, dtype=np.int64)
    sizes = ends - starts
    for s in np.unique(sizes):
        if s < 2:
            continue
        sel = np.flatnonzero(sizes == s)
        n_pairs = s * (s - 1) // 2
        if s > 1024 and s * s > _FFT_PAIR_CUTOFF:
            # large clusters: FFT autocorrelation of the membership indicator
            L = sfft.next_fast_len(2 * (2 * m + 1))
            for st in starts[sel]:
                ind = np.zeros(L)
                ind[pos_sorted[st:st + s] + m] = 1.0
                f = sfft.rfft(ind)
                ac = sfft.irfft(f * np.conj(f), L)
                counts += np.rint(ac[: m + 1]).astype(np.int64)
                counts[0] -= s  # lag 0 is just the cluster size
            continue
        iu, ju = np.triu_indices(s, 1)
        chunk = max(1, _BRUTE_CHUNK // max(n_pairs, 1))
        for lo in range(0, len(sel), chunk):
            block = starts[sel[lo:lo + chunk]]
            mat = pos_sorted[block[:, None] + np.arange(s)[None, :]]
            diffs = (mat[:, ju] - mat[:, iu]).ravel()
            diffs = diffs[diffs <= m]
            counts += np.bincount(diffs, minlength=m + 1)
    return counts[1:]


def _pair_counts_nd(forest: ClusterForest, box: BoxLattice, m: int) -> np.ndarray:
    d = box.d
    order, starts, ends = _cluster_groups(forest, box, m)
    coords_sorted = _window_coords(box, m)[order]
    lut = _grid_to_class(d, m)
    side = 2 * m + 1
    grid_counts = np.zeros(side**d, dtype=np.int64)
    for st, en in zip(starts, ends):
        s = en - st
        if s < 2:
            continue
        Q = coords_sorted[st:en]
        iu, ju = np.triu_indices(s, 1)
        diff = Q[ju] - Q[iu]
        lead = np.zeros(len(diff), dtype=np.int64)
        for i in range(d):
            undecided = lead == 0
            lead[undecided] = np.sign(diff[undecided, i])
        diff = np.where(lead[:, None] < 0, -diff, diff)
        keep = np.max(np.abs(diff), axis=1) <= m
        diff = diff[keep]
        enc = np.zeros(len(diff), dtype=np.int64)
        for i in range(d):
            enc = enc * side + (diff[:, i] + m)
        grid_counts += np.bincount(enc, minlength=side**d)
    n_classes = len(_window_geometry(d, m)[0])
    out = np.zeros(n_classes, dtype=np.int64)
    hit = lut >= 0
    out[lut[hit]] = grid_counts[hit]
    return out


def _pair_counts(forest: ClusterForest, box: BoxLattice, m: int) -> np.ndarray:
    if box.d == 1:
        return _pair_counts_1d(forest, box, m)
    return _pair_counts_nd(forest, box, m)


# ---------------------------------------------------------------------------
# accumulators and the finished table


class TwoPointAccumulator:
    """Mergeable per-displacement sums of same-cluster pair counts."""

    def __init__(self, box: BoxLattice, m: int):
        if m > box.radius:
            raise ValueError(f"inner radius {m} exceeds box radius {box.radius}")
        self.box = box
        self.m = m
        n_classes = len(_window_geometry(box.d, m)[0])
        self.count_sum = np.zeros(n_classes, dtype=np.int64)
        self.count_sq = np.zeros(n_classes, dtype=np.float64)
        self.configs = 0

    def add_forest(self, forest: ClusterForest) -> None:
        counts = _pair_counts(forest, self.box, self.m)
        self.count_sum += counts
        self.count_sq += counts.astype(np.float64) ** 2
        self.configs += 1

    def add_configuration(self, config: Configuration) -> None:
        self.add_forest(build_clusters(config))

    def merge(self, other: "TwoPointAccumulator") -> None:
        if (other.box, other.m) != (self.box, self.m):
            raise ValueError("accumulator geometry mismatch")
        self.count_sum += other.count_sum
        self.count_sq += other.count_sq
        self.configs += other.configs


@dataclass(frozen=True)
class TwoPointTable:
    """Displacement -> (tau estimate, stderr, pair count), plus batch subtotals."""

    d: int
    n: int
    m: int
    replicas: int
    disp: np.ndarray = field(repr=False)  # (C, d) canonical nonzero displacements
    norms: np.ndarray = field(repr=False)  # (C,)
    pair_counts: np.ndarray = field(repr=False)  # (C,) pairs per configuration
    tau: np.ndarray = field(repr=False)  # (C,)
    stderr: np.ndarray = field(repr=False)  # (C,)
    batch_counts: np.ndarray = field(repr=False)  # (B, C) per-batch same-cluster pair sums
    batch_configs: np.ndarray = field(repr=False)  # (B,)

    def shell_tau(self) -> tuple[np.ndarray, np.ndarray]:
        """Shell-averaged tau over ||x||_inf = r, r = 1..m, with batch stderr."""
        num, den = self._shell_sums()
        total_num = num.sum(axis=0)
        total_den = den.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = total_num / total_den
            batch_means = num / den
        B = len(self.batch_configs)
        if B > 1:
            dev = batch_means - mean[None, :]
            wts = self.batch_configs[:, None] / self.replicas
            var = np.sum(wts**2 * dev**2, axis=0) * B / (B - 1)
            se = np.sqrt(var)
        else:
            se = np.full(self.m, np.nan)
        return mean, se

    def _shell_sums(self) -> tuple[np.ndarray, np.ndarray]:
        shell = self.norms - 1
        B = len(self.batch_configs)
        num = np.zeros((B, self.m))
        for b in range(B):
            num[b] = np.bincount(shell, weights=self.batch_counts[b], minlength=self.m)
        shell_pairs = np.bincount(shell, weights=self.pair_counts.astype(float), minlength=self.m)
        den = self.batch_configs[:, None] * shell_pairs[None, :]
        return num, den

    def full_grid(self) -> np.ndarray:
        """tau over the full displacement grid [-m, m]^d (tau(0) = 1)."""
        side = 2 * self.m + 1
        grid = np.zeros(side**self.d)
        for sign in (1, -1):  # tau is symmetric; fill both representatives
            enc = np.zeros(len(self.disp), dtype=np.int64)
            for i in range(self.d):
                enc = enc * side + (sign * self.disp[:, i] + self.m)
            grid[enc] = self.tau
        grid[(side**self.d - 1) // 2] = 1.0
        return grid.reshape((side,) * self.d)

    def window_sum_profile(self) -> np.ndarray:
        """Cumulative sums sum_{||x|| <= r} tau_hat(x) for r = 1..m."""
        shell = self.norms - 1
        shell_sum = np.bincount(shell, weights=2.0 * self.tau, minlength=self.m)
        return 1.0 + np.cumsum(shell_sum)


def finalize_table(batches: list[TwoPointAccumulator]) -> TwoPointTable:
    """Combine per-batch accumulators (in order) into a TwoPointTable."""
    if not batches or all(b.configs == 0 for b in batches):
        raise ValueError("empty batch: at least one configuration required")
    batches = [b for b in batches if b.configs > 0]
    box, m = batches[0].box, batches[0].m
    disp, norms, pairs = _window_geometry(box.d, m)
    replicas = sum(b.configs for b in batches)
    count_sum = np.sum([b.count_sum for b in batches], axis=0)
    count_sq = np.sum([b.count_sq for b in batches], axis=0)
    denom = pairs.astype(float) * replicas
    tau = count_sum / denom
    if replicas > 1:
        # per-configuration variance of the pair fraction
        mean_c = count_sum / replicas
        var_c = np.maximum(count_sq / replicas - mean_c**2, 0.0) * replicas / (replicas - 1)
        stderr = np.sqrt(var_c / replicas) / pairs
    else:
        stderr = np.full_like(tau, np.nan)
    return TwoPointTable(
        d=box.d,
        n=box.radius,
        m=m,
        replicas=replicas,
        disp=disp,
        norms=norms,
        pair_counts=pairs,
        tau=tau,
        stderr=stderr,
        batch_counts=np.stack([b.count_sum.astype(float) for b in batches]),
        batch_configs=np.array([b.configs for b in batches], dtype=np.int64),
    )


def two_point_estimate(configs: Iterable[Configuration], inner_radius: int,
                       n_batches: int = 16) -> TwoPointTable:
    """Estimate tau_hat from a batch of configurations sharing (spec, beta, box)."""
    configs = list(configs)
    if not configs:
        raise ValueError("empty batch: at least one configuration required")
    box = configs[0].box
    if any(c.box != box or c.beta != configs[0].beta for c in configs):
        raise ValueError("configurations must share box and beta")
    n_batches = min(n_batches, len(configs))
    accs = [TwoPointAccumulator(box, inner_radius) for _ in range(n_batches)]
    for i, config in enumerate(configs):
        accs[i * n_batches // len(configs)].add_configuration(config)
    return finalize_table(accs)


# ---------------------------------------------------------------------------
# scalar observables derived from a table


def spatial_average(table: TwoPointTable, r: int) -> float:
    """S(r) = r^-d sum_{x in [-r,r]^d} tau_hat(x)."""
    if r > table.m:
        raise ValueError(f"r={r} exceeds inner radius m={table.m}")
    if r < 1:
        raise ValueError("r must be >= 1")
    return float(table.window_sum_profile()[r - 1] / r**table.d)


def susceptibility_estimate(table: TwoPointTable) -> float:
    """chi_hat = sum over the inner window of tau_hat."""
    return float(table.window_sum_profile()[-1])


def susceptibility_with_stderr(table: TwoPointTable) -> tuple[float, float]:
    """chi_hat with a batch-resampling standard error."""
    per_batch = 1.0 + np.sum(
        2.0 * table.batch_counts / (table.pair_counts[None, :] * table.batch_configs[:, None]),
        axis=1,
    )
    w = table.batch_configs / table.replicas
    chi = float(np.sum(w * per_batch))
    B = len(per_batch)
    if B > 1:
        se = float(np.sqrt(np.sum(w**2 * (per_batch - chi) ** 2) * B / (B - 1)))
    else:
        se = float("nan")
    return chi, se


def correlation_length_estimate(table: TwoPointTable, chi: float) -> XiEstimate:
    """Smallest r with sum_{[-r,r]^d} tau_hat >= chi/2, or the '>= m' sentinel."""
    if chi < 1:
        raise ValueError(f"chi must be >= 1, got {chi}")
    profile = table.window_sum_profile()
    hits = np.flatnonzero(profile >= chi / 2)
    if len(hits) == 0:
        return XiEstimate(value=table.m, is_lower_bound=True)
    return XiEstimate(value=int(hits[0]) + 1, is_lower_bound=False)


def triangle_estimate(table: TwoPointTable, method: str = "auto") -> float:
    """Plug-in triangle diagram over the window, via (tau * tau) convolution."""
    grid = table.full_grid()
    size = grid.size
    if method == "auto":
        method = "direct" if size <= 1025 else "fft"
    if method == "direct":
        if table.d == 1:
            conv = np.convolve(grid, grid)
        else:
            conv = signal.convolve(grid, grid, method="direct")
    elif method == "fft":
        conv = signal.fftconvolve(grid, grid)
    else:
        raise ValueError(f"unknown method {method!r}")
    # centre block of the full convolution corresponds to y in [-m, m]^d
    centre = tuple(slice(m, 3 * m + 1) for m in (table.m,) * table.d)
    return float(np.sum(conv[centre] * grid))


# ---------------------------------------------------------------------------
# cluster-size tail


class TailAccumulator:
    """Translation-averaged origin-cluster tail on the dyadic threshold grid."""

    def __init__(self, box: BoxLattice, m: int):
        self.box = box
        self.m = m
        n_thresholds = int(np.floor(np.log2(box.vertex_count))) + 1
        self.thresholds = 2 ** np.arange(n_thresholds, dtype=np.int64)
        self.frac_sum = np.zeros(n_thresholds)
        self.frac_sq = np.zeros(n_thresholds)
        self.configs = 0
        self.largest_seen = 0

    def add_forest(self, forest: ClusterForest) -> None:
        win = _window_indices(self.box, self.m)
        sizes_w = forest.sizes[forest.labels[win]]
        frac = np.mean(sizes_w[:, None] >= self.thresholds[None, :], axis=0)
        self.frac_sum += frac
        self.frac_sq += frac**2
        self.configs += 1
        self.largest_seen = max(self.largest_seen, int(sizes_w.max()))

    def merge(self, other: "TailAccumulator") -> None:
        self.frac_sum += other.frac_sum
        self.frac_sq += other.frac_sq
        self.configs += other.configs
        self.largest_seen = max(self.largest_seen, other.largest_seen)

    def finalize(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(thresholds, probabilities, stderr), trimmed at the largest seen size."""
        if self.configs == 0:
            raise ValueError("empty batch: at least one configuration required")
        keep = self.thresholds <= max(self.largest_seen, 1)
        R = self.configs
        mean = self.frac_sum[keep] / R
        if R > 1:
            var = np.maximum(self.frac_sq[keep] / R - mean**2, 0.0) * R / (R - 1)
            se = np.sqrt(var / R)
        else:
            se = np.full(mean.shape, np.nan)
        return self.thresholds[keep], mean, se


def cluster_tail(configs: Iterable[Configuration], inner_radius: int | None = None,
                 thresholds: np.ndarray | None = None):
    """P_hat(|K| >= t) on a dyadic grid, translation-averaged over the window."""
    configs = list(configs)
    if not configs:
        raise ValueError("empty batch: at least one configuration required")
    box = configs[0].box
    m = inner_radius if inner_radius is not None else max(box.radius // 2, 1)
    acc = TailAccumulator(box, m)
    for config in configs:
        acc.add_forest(build_clusters(config))
    th, probs, se = acc.finalize()
    if thresholds is not None:
        thresholds = np.asarray(thresholds, dtype=np.int64)
        sel = {int(t): i for i, t in enumerate(th)}
        idx = [sel[int(t)] for t in thresholds if int(t) in sel]
        th, probs, se = th[idx], probs[idx], se[idx]
    return th, probs, se


# ---------------------------------------------------------------------------
# restricted-box connectivity and consistency helpers


def restricted_two_point(spec: KernelSpec, beta: float, x, replicas: int,
                         seed: int) -> tuple[float, float]:
    """P_hat(0 <-> x inside [-2||x||, 2||x||]^d) from fresh configurations."""
    x = np.atleast_1d(np.asarray(x, dtype=np.int64))
    norm = int(np.max(np.abs(x)))
    if norm < 1:
        raise ValueError("||x|| must be >= 1")
    box = BoxLattice(d=spec.d, radius=2 * norm)
    target = int(box.index_of(x))
    origin = box.origin_index
    if _fastpath.supports(box):
        *_, hits = _fastpath.batch_counts(spec, beta, box, 0, seed, 0, replicas,
                                          x_flat=target)
    else:
        hits = 0
        for rep in range(replicas):
            config = sample_configuration(spec, beta, box, seed, rep)
            forest = build_clusters(config)
            hits += int(forest.labels[origin] == forest.labels[target])
    p = hits / replicas
    se = np.sqrt(max(p * (1 - p), 1.0 / replicas**2) / replicas)
    return p, float(se)


def window_mean_cluster_size(configs: Iterable[Configuration], inner_radius: int
                             ) -> tuple[float, float]:
    """Mean window-restricted cluster size, a cross-check estimator for chi_hat."""
    vals = []
    for config in configs:
        forest = build_clusters(config)
        win = _window_indices(config.box, inner_radius)
        labels_w = forest.labels[win]
        sizes_w = np.bincount(labels_w - labels_w.min())
        vals.append(np.sum(sizes_w.astype(float) ** 2) / len(win))
    vals = np.asarray(vals)
    if not len(vals):
        raise ValueError("empty batch")
    se = vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else np.nan
    return float(vals.mean()), float(se)


# ---------------------------------------------------------------------------
# sweep record


@dataclass(frozen=True)
class SweepRecord:
    """Per-(beta, n) observables from one batch of replicas."""

    beta: float
    n: int
    replicas: int
    chi: float
    chi_stderr: float
    xi: XiEstimate
    nabla: float
    s_radii: np.ndarray = field(repr=False)
    s_profile: np.ndarray = field(repr=False)
    tail_thresholds: np.ndarray = field(repr=False)
    tail_probs: np.ndarray = field(repr=False)
    tail_stderr: np.ndarray = field(repr=False)
    seed: int = 0
