"""Figure rendering: SVG plus a sidecar JSON echoing every number drawn.

The sidecar is the testable contract; the SVG is a human artifact.  All
reference slopes are taken from report.json, never recomputed here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .io import read_report, read_sweep, read_two_point, shell_average  # noqa: E402

KINDS = ("two-point", "chi-xi", "tail", "triangle", "collapse")

_RC = {
    "figure.figsize": (4.2, 3.2),
    "font.size": 9,
    "svg.fonttype": "none",
    "axes.grid": True,
    "grid.alpha": 0.3,
}


@dataclass(frozen=True)
class FigureSpec:
    """Inputs and output location for one figure."""

    kind: str
    out: Path
    two_point: Path | None = None
    sweep: Path | None = None
    report: Path | None = None
    tables: Mapping[float, Path] | None = None  # collapse: beta -> two_point.csv

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}, expected one of {KINDS}")


def _require(spec: FigureSpec, *fields: str) -> None:
    missing = [f for f in fields if getattr(spec, f) is None]
    if missing:
        raise ValueError(f"figure kind {spec.kind!r} needs inputs: {', '.join(missing)}")


def _ref_lines(report: dict, *names: str) -> list[dict]:
    lines = []
    for name in names:
        expected = report.get("expected", {}).get(name)
        if expected is not None:
            lines.append({"label": f"{name} expected", "slope": float(expected)})
        fit = report.get("fits", {}).get(name, {})
        if "exponent" in fit:
            lines.append({"label": f"{name} fitted", "slope": float(fit["exponent"])})
    return lines


def _draw_loglog(ax, series: list[dict], lines: list[dict], xlabel: str, ylabel: str):
    """Plot series and slope guide lines; anchor each line at the data midpoint."""
    xs = np.concatenate([np.asarray(s["x"], dtype=float) for s in series])
    ys = np.concatenate([np.asarray(s["y"], dtype=float) for s in series])
    for s in series:
        err = s.get("yerr")
        ax.errorbar(s["x"], s["y"], yerr=err, fmt="o-", ms=2.5, lw=0.8,
                    capsize=1.5, label=s["label"])
    anchor_x = float(np.exp(np.mean(np.log(xs))))
    anchor_y = float(np.exp(np.mean(np.log(ys))))
    span = np.array([xs.min(), xs.max()], dtype=float)
    for line in lines:
        guide = anchor_y * (span / anchor_x) ** line["slope"]
        ax.plot(span, guide, "--", lw=0.8, label=f"{line['label']} ({line['slope']:+.3g})")
        line["anchor_x"] = anchor_x
        line["anchor_y"] = anchor_y
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=6)


def _max_log_gap(curves: list[tuple[np.ndarray, np.ndarray]]) -> float:
    """Largest vertical log-gap between any two curves where they overlap in u."""
    gap = 0.0
    logs = [(np.log(u), np.log(g)) for u, g in curves]
    for i, (xi, yi) in enumerate(logs):
        for j, (xj, yj) in enumerate(logs):
            if i == j:
                continue
            lo, hi = max(xi[0], xj[0]), min(xi[-1], xj[-1])
            sel = (xi >= lo) & (xi <= hi)
            if not sel.any():
                continue
            gap = max(gap, float(np.max(np.abs(yi[sel] - np.interp(xi[sel], xj, yj)))))
    return gap


def _alpha_d_from_report(report: dict) -> tuple[float, int]:
    """Recover (alpha, d) from the reference slopes -(d-alpha) and -(d+alpha)."""
    expected = report.get("expected", {})
    try:
        eta, far = expected["eta_slope"], expected["far_field"]
    except KeyError as exc:
        raise ValueError(f"report.json lacks expected slope {exc} needed for collapse")
    return (eta - far) / 2.0, round(-(eta + far) / 2.0)


def render(spec: FigureSpec) -> Path:
    """Write spec.out (SVG) and a sidecar JSON next to it; return the SVG path."""
    out = Path(spec.out)
    _require(spec, "report")
    report = read_report(spec.report)
    sidecar: dict = {"figure": spec.kind, "series": [], "reference_lines": []}

    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        if spec.kind == "two-point":
            _require(spec, "two_point")
            radii, tau, se = shell_average(read_two_point(spec.two_point))
            keep = tau > 0
            series = [{"label": "tau", "x": radii[keep].tolist(),
                       "y": tau[keep].tolist(), "yerr": se[keep].tolist()}]
            lines = _ref_lines(report, "eta_slope")
            _draw_loglog(ax, series, lines, "shell radius r", "two-point tau(r)")
        elif spec.kind == "chi-xi":
            _require(spec, "sweep")
            rows = [r for r in read_sweep(spec.sweep)
                    if not r.xi_is_lower_bound and r.xi >= 1]
            series = [{"label": "chi", "x": [r.xi for r in rows],
                       "y": [r.chi for r in rows],
                       "yerr": [r.chi_stderr for r in rows]}]
            lines = _ref_lines(report, "chi_vs_xi")
            _draw_loglog(ax, series, lines, "correlation length xi",
                         "susceptibility chi")
        elif spec.kind == "triangle":
            _require(spec, "sweep")
            rows = [r for r in read_sweep(spec.sweep)
                    if not r.xi_is_lower_bound and r.xi >= 1]
            series = [{"label": "nabla", "x": [r.xi for r in rows],
                       "y": [r.nabla for r in rows]}]
            lines = _ref_lines(report, "triangle_vs_xi")
            _draw_loglog(ax, series, lines, "correlation length xi",
                         "triangle diagram nabla")
        elif spec.kind == "tail":
            _require(spec, "sweep")
            series = []
            for r in read_sweep(spec.sweep):
                keep = r.tail_probs > 0
                if keep.sum() < 2:
                    continue
                series.append({"label": f"beta={r.beta:.6g}",
                               "x": r.tail_thresholds[keep].tolist(),
                               "y": r.tail_probs[keep].tolist(),
                               "yerr": r.tail_stderr[keep].tolist()})
            lines = _ref_lines(report, "tail")
            _draw_loglog(ax, series, lines, "cluster size s", "P(|K| >= s)")
        else:  # collapse
            _require(spec, "sweep", "tables")
            alpha, d = _alpha_d_from_report(report)
            xi_by_beta = {r.beta: r.xi for r in read_sweep(spec.sweep)
                          if not r.xi_is_lower_bound and r.xi >= 1}
            series, curves = [], []
            for beta in sorted(spec.tables):
                if beta not in xi_by_beta:
                    continue
                radii, tau, _ = shell_average(read_two_point(spec.tables[beta]))
                keep = tau > 0
                u = radii[keep] / xi_by_beta[beta]
                g = tau[keep] * radii[keep].astype(float) ** (d - alpha)
                curves.append((u, g))
                series.append({"label": f"beta={beta:.6g}",
                               "x": u.tolist(), "y": g.tolist()})
            lines = _ref_lines(report, "far_field")
            for line in lines:  # far branch decays like u^-2alpha after rescaling
                line["slope"] = line["slope"] + (d - alpha)
                line["label"] += " rescaled"
            _draw_loglog(ax, series, lines, "u = r / xi",
                         "g = tau(r) r^(d-alpha)")
            sidecar["collapse"] = {"alpha": alpha, "d": d,
                                   "max_log_gap": _max_log_gap(curves)}
        sidecar["series"] = series
        sidecar["reference_lines"] = lines
        fig.tight_layout()
        fig.savefig(out, format="svg", metadata={"Date": None})
        plt.close(fig)

    sidecar_path = out.with_suffix(".json")
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out
