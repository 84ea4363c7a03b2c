"""Critical-point location and near-critical sweeps.

The discriminator is the log-log slope of the shell-averaged two-point
function: exactly at beta_c it equals -(d - alpha), it is steeper (more
negative) below beta_c and shallower above. find_beta_c bisects on that sign,
keeping a bracketing certificate (one probe certified on each side by more
than one standard error).

All probes share one master seed, and the sampler's common-random-numbers
coupling makes every increasing observable pathwise monotone across probe
betas, which both reduces variance and is asserted in tests.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _fastpath
from .clusters import build_clusters
from .kernel import KernelSpec
from .lattice import BoxLattice, enumerate_displacement_classes
from .observables import (
    SweepRecord,
    TailAccumulator,
    TwoPointAccumulator,
    TwoPointTable,
    correlation_length_estimate,
    finalize_table,
    spatial_average,
    triangle_estimate,
)
from .sampler import sample_configuration

__all__ = [
    "CriticalEstimate",
    "BracketingError",
    "run_point",
    "slope_statistic",
    "find_beta_c",
    "beta_sweep",
    "sweep_point",
]

_BOOTSTRAP_REPS = 200


class BracketingError(RuntimeError):
    """Raised when no certified bracket around beta_c could be established."""


@dataclass(frozen=True)
class CriticalEstimate:
    beta_c_hat: float
    ci: tuple[float, float]
    d: int
    alpha: float
    n: int
    window: tuple[int, int]
    probe_replicas: int
    seed: int
    probes: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "beta_c_hat": self.beta_c_hat,
            "ci": list(self.ci),
            "d": self.d,
            "alpha": self.alpha,
            "n": self.n,
            "window": list(self.window),
            "replicas": self.probe_replicas,
            "seed": self.seed,
            "probes": self.probes,
        }


# ---------------------------------------------------------------------------
# replica driver


def run_point(
    spec: KernelSpec,
    beta: float,
    n: int,
    m: int,
    replicas: int,
    seed: int,
    threads: int = 1,
    n_batches: int = 16,
) -> tuple[TwoPointTable, TailAccumulator]:
    """Sample `replicas` configurations and reduce them batch-by-batch.

    Batches are contiguous replica blocks, so the reduction (performed in
    ascending batch order) is bit-identical for any thread count.
    """
    box = BoxLattice(d=spec.d, radius=n)
    classes = enumerate_displacement_classes(box, spec, beta)
    n_batches = max(1, min(n_batches, replicas))

    use_fast = _fastpath.supports(box)

    def do_batch(b: int) -> tuple[TwoPointAccumulator, TailAccumulator]:
        lo = b * replicas // n_batches
        hi = (b + 1) * replicas // n_batches
        acc = TwoPointAccumulator(box, m)
        tail = TailAccumulator(box, m)
        if use_fast:
            cs, cq, fs, fq, largest, _ = _fastpath.batch_counts(
                spec, beta, box, m, seed, lo, hi, classes, thresholds=tail.thresholds)
            acc.count_sum += cs
            acc.count_sq += cq
            acc.configs += hi - lo
            tail.frac_sum += fs
            tail.frac_sq += fq
            tail.configs += hi - lo
            tail.largest_seen = max(tail.largest_seen, int(largest))
            return acc, tail
        for rep in range(lo, hi):
            config = sample_configuration(spec, beta, box, seed, rep, classes)
            forest = build_clusters(config)
            acc.add_forest(forest)
            tail.add_forest(forest)
        return acc, tail

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(do_batch, range(n_batches)))
    else:
        results = [do_batch(b) for b in range(n_batches)]

    table = finalize_table([r[0] for r in results])
    tail = results[0][1]
    for _, t in results[1:]:
        tail.merge(t)
    return table, tail


# ---------------------------------------------------------------------------
# slope statistic


def _wls_line(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, float, float]:
    """Weighted least squares fit y = a + b x; returns (b, a, se_b)."""
    W = np.sum(w)
    xb = np.sum(w * x) / W
    yb = np.sum(w * y) / W
    sxx = np.sum(w * (x - xb) ** 2)
    b = np.sum(w * (x - xb) * (y - yb)) / sxx
    a = yb - b * xb
    resid = y - (a + b * x)
    dof = max(len(x) - 2, 1)
    sigma2 = np.sum(w * resid**2) / dof
    se_b = math.sqrt(sigma2 / sxx)
    return float(b), float(a), se_b


def slope_statistic(table: TwoPointTable, window: tuple[int, int]) -> tuple[float, float]:
    """Log-log slope of shell-averaged tau over shells r in [r_min, r_max]."""
    r_min, r_max = window
    if not (2 <= r_min < r_max <= table.m):
        raise ValueError(f"window {window} not inside [2, m={table.m}]")
    mean, se = table.shell_tau()
    radii = np.arange(1, table.m + 1)
    sel = (radii >= r_min) & (radii <= r_max) & (mean > 0)
    if np.count_nonzero(sel) < 3:
        raise ValueError("fewer than 3 usable shells in the fit window")
    x = np.log(radii[sel].astype(float))
    y = np.log(mean[sel])
    se_sel = se[sel]
    if np.all(np.isfinite(se_sel)) and np.all(se_sel > 0):
        w = (mean[sel] / se_sel) ** 2  # delta method: Var(log tau) = (se/tau)^2
    else:
        w = np.ones_like(x)
    slope, _, se_wls = _wls_line(x, y, w)

    se_boot = 0.0
    B = len(table.batch_configs)
    if B > 1:
        num, den = table._shell_sums()
        rng = np.random.default_rng(12345)
        slopes = []
        for _ in range(_BOOTSTRAP_REPS):
            pick = rng.integers(0, B, size=B)
            bm_num = num[pick].sum(axis=0)[sel]
            bm_den = den[pick].sum(axis=0)[sel]
            ok = (bm_num > 0) & (bm_den > 0)
            if np.count_nonzero(ok) < 3:
                continue
            yb = np.log(bm_num[ok] / bm_den[ok])
            s, _, _ = _wls_line(x[ok], yb, w[ok])
            slopes.append(s)
        if len(slopes) > 10:
            se_boot = float(np.std(slopes))
    return slope, max(se_wls, se_boot)


# ---------------------------------------------------------------------------
# bisection for beta_c


def find_beta_c(
    spec: KernelSpec,
    n: int,
    window: tuple[int, int],
    probe_replicas: int,
    tolerance: float,
    seed: int,
    beta_lo: float = 0.05,
    beta_hi: float = 1.0,
    inner_fraction: float = 0.5,
    threads: int = 1,
    max_expand: int = 8,
) -> CriticalEstimate:
    """Bisection on the shell slope against the critical value -(d - alpha)."""
    target = -(spec.d - spec.alpha)
    m = max(int(n * inner_fraction), window[1])
    probes: list[dict] = []

    def probe(beta: float, replicas: int) -> tuple[float, float, str]:
        table, _ = run_point(spec, beta, n, m, replicas, seed, threads=threads)
        slope, se = slope_statistic(table, window)
        if slope < target - se:
            verdict = "subcritical"
        elif slope > target + se:
            verdict = "supercritical"
        else:
            verdict = "indistinguishable"
        probes.append({"beta": beta, "slope": slope, "stderr": se,
                       "verdict": verdict, "replicas": replicas})
        return slope, se, verdict

    lo, hi = beta_lo, beta_hi
    # certify the bracket, expanding geometrically if the user guess fails
    for _ in range(max_expand + 1):
        _, _, v = probe(lo, probe_replicas)
        if v == "subcritical":
            break
        lo /= 2.0
    else:
        raise BracketingError(f"could not certify a subcritical beta down to {lo}")
    for _ in range(max_expand + 1):
        _, _, v = probe(hi, probe_replicas)
        if v == "supercritical":
            break
        hi *= 2.0
    else:
        raise BracketingError(f"could not certify a supercritical beta up to {hi}")

    widened = False
    while hi - lo > tolerance * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        replicas = probe_replicas
        _, _, verdict = probe(mid, replicas)
        if verdict == "indistinguishable" and not widened:
            widened = True
            _, _, verdict = probe(mid, 2 * replicas)
        if verdict == "subcritical":
            lo = mid
        elif verdict == "supercritical":
            hi = mid
        else:
            break  # statistically indistinguishable: finish at current bracket
    beta_c_hat = 0.5 * (lo + hi)
    return CriticalEstimate(
        beta_c_hat=beta_c_hat,
        ci=(lo, hi),
        d=spec.d,
        alpha=spec.alpha,
        n=n,
        window=window,
        probe_replicas=probe_replicas,
        seed=seed,
        probes=probes,
    )


# ---------------------------------------------------------------------------
# sweeps


def sweep_point(
    spec: KernelSpec,
    beta: float,
    n: int,
    m: int,
    replicas: int,
    seed: int,
    threads: int = 1,
) -> tuple[SweepRecord, TwoPointTable]:
    """All observables for one (beta, n) point."""
    from .observables import susceptibility_with_stderr

    table, tail_acc = run_point(spec, beta, n, m, replicas, seed, threads=threads)
    chi, chi_se = susceptibility_with_stderr(table)
    xi = correlation_length_estimate(table, chi)
    nabla = triangle_estimate(table)
    radii = 2 ** np.arange(int(np.log2(m)) + 1)
    radii = radii[radii <= m]
    s_profile = np.array([spatial_average(table, int(r)) for r in radii])
    th, probs, se = tail_acc.finalize()
    record = SweepRecord(
        beta=beta, n=n, replicas=replicas,
        chi=chi, chi_stderr=chi_se, xi=xi, nabla=nabla,
        s_radii=radii, s_profile=s_profile,
        tail_thresholds=th, tail_probs=probs, tail_stderr=se,
        seed=seed,
    )
    return record, table


def beta_sweep(
    spec: KernelSpec,
    n: int,
    beta_grid,
    replicas: int,
    seed: int,
    inner_fraction: float = 0.5,
    threads: int = 1,
    keep_tables: bool = False,
):
    """One SweepRecord per beta; all betas share the master seed (CRN coupling)."""
    beta_grid = list(beta_grid)
    if any(b < 0 for b in beta_grid):
        raise ValueError("all betas must be nonnegative")
    if any(b2 <= b1 for b1, b2 in zip(beta_grid, beta_grid[1:])):
        raise ValueError("beta grid must be strictly increasing")
    m = max(int(n * inner_fraction), 1)
    records, tables = [], {}
    for beta in beta_grid:
        record, table = sweep_point(spec, beta, n, m, replicas, seed, threads=threads)
        records.append(record)
        if keep_tables:
            tables[beta] = table
    return (records, tables) if keep_tables else records
