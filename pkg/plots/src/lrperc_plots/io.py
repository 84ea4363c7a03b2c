"""Readers for the simulation CSV/JSON artifact schemas.

The plotting layer is read-only over its inputs and never re-derives
physics: reference slopes come from report.json as written.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_SWEEP_COLUMNS = ["beta", "n", "replicas", "chi", "xi", "nabla",
                  "kind", "index", "value", "stderr"]


class SchemaError(ValueError):
    """Input file does not match the expected column schema."""


def _check_columns(header: list[str], expected: list[str], path) -> None:
    missing = [c for c in expected if c not in header]
    extra = [c for c in header if c not in expected]
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing columns: {', '.join(missing)}")
        if extra:
            parts.append(f"unexpected columns: {', '.join(extra)}")
        raise SchemaError(f"{path}: {'; '.join(parts)}")


@dataclass(frozen=True)
class TwoPointData:
    d: int
    disp: np.ndarray  # (N, d) including the zero row
    tau: np.ndarray
    stderr: np.ndarray
    pairs: np.ndarray


def read_two_point(path) -> TwoPointData:
    """Parse two_point.csv: dx1..dxd, tau, stderr, pairs."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        d = 0
        while d < len(header) and re.fullmatch(r"dx\d+", header[d]):
            d += 1
        if d == 0:
            raise SchemaError(f"{path}: missing columns: dx1")
        _check_columns(header[d:], ["tau", "stderr", "pairs"], path)
        rows = [row for row in reader if row]
    disp = np.array([[int(v) for v in row[:d]] for row in rows])
    tau = np.array([float(row[d]) for row in rows])
    stderr = np.array([float(row[d + 1]) for row in rows])
    pairs = np.array([int(row[d + 2]) for row in rows])
    return TwoPointData(d=d, disp=disp, tau=tau, stderr=stderr, pairs=pairs)


def shell_average(data: TwoPointData) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pair-weighted tau per sup-norm shell r >= 1: (radii, tau, stderr)."""
    norms = np.max(np.abs(data.disp), axis=1)
    keep = norms >= 1
    norms, tau, se, pairs = (norms[keep], data.tau[keep],
                             data.stderr[keep], data.pairs[keep])
    radii = np.unique(norms)
    mean = np.empty(len(radii))
    err = np.empty(len(radii))
    for i, r in enumerate(radii):
        sel = norms == r
        w = pairs[sel].astype(float)
        w /= w.sum()
        mean[i] = float(np.sum(w * tau[sel]))
        err[i] = float(np.sqrt(np.sum((w * np.nan_to_num(se[sel])) ** 2)))
    return radii, mean, err


@dataclass(frozen=True)
class SweepRow:
    beta: float
    n: int
    replicas: int
    chi: float
    chi_stderr: float
    xi: int
    xi_is_lower_bound: bool
    nabla: float
    s_radii: np.ndarray
    s_profile: np.ndarray
    tail_thresholds: np.ndarray
    tail_probs: np.ndarray
    tail_stderr: np.ndarray


def read_sweep(path) -> list[SweepRow]:
    """Parse sweep.csv into one row bundle per beta (ascending)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        _check_columns(header, _SWEEP_COLUMNS, path)
        rows = [row for row in reader if row]
    by_beta: dict[float, list[list[str]]] = {}
    for row in rows:
        by_beta.setdefault(float(row[0]), []).append(row)
    out = []
    for beta in sorted(by_beta):
        group = by_beta[beta]
        first = group[0]
        xi_raw = int(first[4])
        chi_se = float("nan")
        s_r, s_v, t_t, t_p, t_s = [], [], [], [], []
        for row in group:
            kind, idx, val, se = row[6], int(row[7]), float(row[8]), float(row[9])
            if kind == "chi":
                chi_se = se
            elif kind == "S":
                s_r.append(idx)
                s_v.append(val)
            elif kind == "tail":
                t_t.append(idx)
                t_p.append(val)
                t_s.append(se)
        out.append(SweepRow(
            beta=beta, n=int(first[1]), replicas=int(first[2]),
            chi=float(first[3]), chi_stderr=chi_se,
            xi=abs(xi_raw), xi_is_lower_bound=xi_raw < 0,
            nabla=float(first[5]),
            s_radii=np.array(s_r), s_profile=np.array(s_v),
            tail_thresholds=np.array(t_t), tail_probs=np.array(t_p),
            tail_stderr=np.array(t_s),
        ))
    return out


def read_report(path) -> dict:
    """Parse report.json and validate the sections the figures rely on."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        report = json.load(fh)
    for key in ("expected", "fits"):
        if key not in report:
            raise SchemaError(f"{path}: missing columns: {key}")
    return report
