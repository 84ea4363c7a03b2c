"""Power-law fitting, exponent reporting, and crossover data collapse.

fit_power_law is a weighted least-squares fit of log y on log x with a
point-resampling bootstrap CI. Points are sorted internally so results are
exactly invariant under input reordering, and rescaling all y by a constant
moves only the intercept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .critical import CriticalEstimate, _wls_line, slope_statistic
from .observables import SweepRecord, TwoPointTable

__all__ = [
    "FitResult",
    "CollapseResult",
    "InsufficientDataError",
    "fit_power_law",
    "exponent_report",
    "collapse_check",
]

_BOOTSTRAP_REPS = 500


class InsufficientDataError(ValueError):
    """Raised when a fit or collapse has too few usable points."""


@dataclass(frozen=True)
class FitResult:
    exponent: float
    intercept: float
    stderr: float
    ci: tuple[float, float]
    window: tuple[float, float]
    max_abs_log_residual: float
    n_points: int

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "ci": list(self.ci),
            "window": list(self.window),
            "max_abs_log_residual": self.max_abs_log_residual,
            "n_points": self.n_points,
        }


def fit_power_law(points, window: tuple[float, float] | None = None,
                  bootstrap_seed: int = 7) -> FitResult:
    """Fit y ~ C x^e by WLS in log-log space; bootstrap CI by point resampling.

    ``points`` is an iterable of (x, y, y_stderr) triples; pass stderr 0 or
    None for unweighted points.
    """
    pts = [(float(x), float(y), float(s) if s is not None else 0.0) for x, y, s in points]
    pts.sort()
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    s = np.array([p[2] for p in pts])
    if window is None:
        window = (float(x.min()) if len(x) else 0.0, float(x.max()) if len(x) else 0.0)
    sel = (x >= window[0]) & (x <= window[1])
    x, y, s = x[sel], y[sel], s[sel]
    if len(x) < 3:
        raise InsufficientDataError(f"need >= 3 points in window, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("fit_power_law requires strictly positive x and y")
    lx, ly = np.log(x), np.log(y)
    if np.all(s > 0) and np.all(np.isfinite(s)):
        w = (y / s) ** 2
    else:
        w = np.ones_like(lx)
    slope, intercept, se = _wls_line(lx, ly, w)
    resid = ly - (intercept + slope * lx)

    rng = np.random.default_rng(bootstrap_seed)
    slopes = []
    N = len(lx)
    for _ in range(_BOOTSTRAP_REPS):
        pick = rng.integers(0, N, size=N)
        if len(np.unique(lx[pick])) < 2:
            continue
        b, _, _ = _wls_line(lx[pick], ly[pick], w[pick])
        slopes.append(b)
    if slopes:
        ci = (float(np.percentile(slopes, 2.5)), float(np.percentile(slopes, 97.5)))
        ci = (min(ci[0], slope), max(ci[1], slope))
        se = max(se, float(np.std(slopes)))
    else:
        ci = (slope, slope)
    return FitResult(
        exponent=slope,
        intercept=intercept,
        stderr=se,
        ci=ci,
        window=(float(window[0]), float(window[1])),
        max_abs_log_residual=float(np.max(np.abs(resid))),
        n_points=int(N),
    )


def _tail_points(record: SweepRecord) -> list[tuple[int, float, float]]:
    th, pr, se = record.tail_thresholds, record.tail_probs, record.tail_stderr
    ok = pr > 0
    return [(int(t), float(p), float(s)) for t, p, s in zip(th[ok], pr[ok], se[ok])]


def _try_fit(name: str, expected: float, points, window=None) -> dict:
    try:
        fit = fit_power_law(points, window)
        out = fit.to_dict()
        out.update({"name": name, "expected": expected})
        return out
    except (InsufficientDataError, ValueError) as exc:
        return {"name": name, "expected": expected, "error": f"insufficient data: {exc}"}


def exponent_report(
    sweep: list[SweepRecord],
    critical: CriticalEstimate | None = None,
    tau_at_critical: TwoPointTable | None = None,
    critical_record: SweepRecord | None = None,
    subcritical_table: TwoPointTable | None = None,
    subcritical_xi: int | None = None,
    slope_window: tuple[int, int] | None = None,
) -> dict:
    """Fit every exponent the sweep and critical runs support.

    Missing inputs produce per-item "insufficient data" entries rather than
    silently dropping the item.
    """
    d = critical.d if critical is not None else None
    alpha = critical.alpha if critical is not None else None
    report: dict = {"schema": 1, "fits": {}}
    expectations = {}
    if d is not None:
        expectations = {
            "eta_slope": -(d - alpha),
            "chi_vs_xi": alpha,
            "gamma": -1.0,
            "tail": -0.5,
            "far_field": -(d + alpha),
            "triangle_vs_xi": max(0.0, 3 * alpha - d),
        }
    report["expected"] = expectations

    # critical two-point slope (eta via 2 - eta = alpha)
    if tau_at_critical is not None and critical is not None:
        window = slope_window or critical.window
        try:
            s, se = slope_statistic(tau_at_critical, window)
            report["fits"]["eta_slope"] = {
                "name": "eta_slope", "exponent": s, "stderr": se,
                "window": list(window), "expected": expectations.get("eta_slope"),
            }
        except ValueError as exc:
            report["fits"]["eta_slope"] = {"name": "eta_slope",
                                           "error": f"insufficient data: {exc}"}
    else:
        report["fits"]["eta_slope"] = {"name": "eta_slope",
                                       "error": "insufficient data: no critical table"}

    finite = [r for r in sweep if not r.xi.is_lower_bound]
    report["fits"]["chi_vs_xi"] = _try_fit(
        "chi_vs_xi", expectations.get("chi_vs_xi"),
        [(r.xi.value, r.chi, r.chi_stderr) for r in finite],
    )
    report["fits"]["triangle_vs_xi"] = _try_fit(
        "triangle_vs_xi", expectations.get("triangle_vs_xi"),
        [(r.xi.value, r.nabla, None) for r in finite],
    )
    if critical is not None:
        eps_points = [(critical.beta_c_hat - r.beta, r.chi, r.chi_stderr)
                      for r in finite if r.beta < critical.beta_c_hat]
        report["fits"]["gamma"] = _try_fit("gamma", expectations.get("gamma"), eps_points)
    else:
        report["fits"]["gamma"] = {"name": "gamma",
                                   "error": "insufficient data: no critical estimate"}

    if critical_record is not None:
        report["fits"]["tail"] = _try_fit(
            "tail", expectations.get("tail"), _tail_points(critical_record))
    else:
        report["fits"]["tail"] = {"name": "tail",
                                  "error": "insufficient data: no critical-point record"}
    # tail exponent is steeply sensitive to the critical-point estimate, so
    # the bisection CI is propagated by refitting at any sweep record taken
    # at a CI endpoint
    if critical is not None:
        for tag, endpoint in (("tail_lo", critical.ci[0]), ("tail_hi", critical.ci[1])):
            at_endpoint = [r for r in sweep
                           if math.isclose(r.beta, endpoint, rel_tol=1e-9)]
            if at_endpoint:
                report["fits"][tag] = _try_fit(
                    tag, expectations.get("tail"), _tail_points(at_endpoint[0]))

    if subcritical_table is not None and subcritical_xi is not None:
        mean, se = subcritical_table.shell_tau()
        radii = np.arange(1, subcritical_table.m + 1)
        lo, hi = 4 * subcritical_xi, subcritical_table.n // 8
        sel = (radii >= lo) & (radii <= hi) & (mean > 0)
        report["fits"]["far_field"] = _try_fit(
            "far_field", expectations.get("far_field"),
            [(int(r), float(t), float(s)) for r, t, s
             in zip(radii[sel], mean[sel], se[sel])],
        )
    else:
        report["fits"]["far_field"] = {"name": "far_field",
                                       "error": "insufficient data: no subcritical table"}
    return report


@dataclass(frozen=True)
class CollapseResult:
    score: float
    near_log_level: float
    far_slope: float
    far_intercept: float
    n_points: int
    curves: dict = field(repr=False, default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "near_log_level": self.near_log_level,
            "far_slope": self.far_slope,
            "far_intercept": self.far_intercept,
            "n_points": self.n_points,
        }


def collapse_check(tables: dict[float, TwoPointTable], xi: dict[float, int],
                   alpha: float, d: int) -> CollapseResult:
    """Two-branch master-curve check of the crossover form.

    Rescales each table to (u, g) = (r / xi, shell_tau(r) * r^(d - alpha)),
    fits a constant on u <= 1/2 and a free-slope line on u >= 2, and scores
    the max absolute log-deviation of branch points from the master curve.
    """
    usable = [b for b in tables if b in xi and xi[b] >= 1]
    if len(usable) < 3:
        raise InsufficientDataError(
            f"insufficient data: need >= 3 betas with finite xi, got {len(usable)}")
    us, gs, curves = [], [], {}
    for b in sorted(usable):
        table = tables[b]
        mean, _ = table.shell_tau()
        radii = np.arange(1, table.m + 1, dtype=float)
        ok = mean > 0
        u = radii[ok] / xi[b]
        g = mean[ok] * radii[ok] ** (d - alpha)
        us.append(u)
        gs.append(g)
        curves[b] = (u, g)
    u = np.concatenate(us)
    g = np.concatenate(gs)
    lu, lg = np.log(u), np.log(g)

    near = u <= 0.5
    far = u >= 2.0
    if near.sum() < 1 or far.sum() < 3:
        raise InsufficientDataError("insufficient data: branches not both populated")
    near_level = float(np.mean(lg[near]))
    far_slope, far_icpt, _ = _wls_line(lu[far], lg[far], np.ones(int(far.sum())))

    dev_near = np.abs(lg[near] - near_level)
    dev_far = np.abs(lg[far] - (far_icpt + far_slope * lu[far]))
    score = float(max(dev_near.max(initial=0.0), dev_far.max(initial=0.0)))
    return CollapseResult(
        score=score,
        near_log_level=near_level,
        far_slope=float(far_slope),
        far_intercept=float(far_icpt),
        n_points=int(near.sum() + far.sum()),
        curves=curves,
    )
