"""Machine-readable output files: CSV/JSON schemas, digests, atomic writes."""

from __future__ import annotations

import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .observables import SweepRecord, TwoPointTable, XiEstimate

__all__ = [
    "fnv1a",
    "atomic_write",
    "format_float",
    "two_point_csv",
    "sweep_csv",
    "read_sweep_csv",
    "report_csv",
]

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a(data: bytes) -> int:
    """64-bit FNV-1a digest."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_float(v: float) -> str:
    return f"{v:.17g}"


def _xi_field(xi: XiEstimate) -> int:
    # the '>= m' sentinel is encoded as a negative radius
    return -xi.value if xi.is_lower_bound else xi.value


def two_point_csv(table: TwoPointTable) -> bytes:
    buf = io.StringIO()
    cols = [f"dx{i + 1}" for i in range(table.d)]
    buf.write(",".join(cols + ["tau", "stderr", "pairs"]) + "\n")
    zero = ",".join(["0"] * table.d)
    window_volume = (2 * table.m + 1) ** table.d
    buf.write(f"{zero},{format_float(1.0)},{format_float(0.0)},{window_volume}\n")
    for i in range(len(table.disp)):
        coords = ",".join(str(int(c)) for c in table.disp[i])
        se = table.stderr[i]
        buf.write(
            f"{coords},{format_float(table.tau[i])},"
            f"{format_float(se if np.isfinite(se) else float('nan'))},"
            f"{int(table.pair_counts[i])}\n"
        )
    return buf.getvalue().encode()


def sweep_csv(records: list[SweepRecord]) -> bytes:
    buf = io.StringIO()
    buf.write("beta,n,replicas,chi,xi,nabla,kind,index,value,stderr\n")
    for r in records:
        prefix = (
            f"{format_float(r.beta)},{r.n},{r.replicas},{format_float(r.chi)},"
            f"{_xi_field(r.xi)},{format_float(r.nabla)}"
        )
        buf.write(f"{prefix},chi,0,{format_float(r.chi)},{format_float(r.chi_stderr)}\n")
        for radius, s in zip(r.s_radii, r.s_profile):
            buf.write(f"{prefix},S,{int(radius)},{format_float(s)},nan\n")
        for t, p, se in zip(r.tail_thresholds, r.tail_probs, r.tail_stderr):
            buf.write(f"{prefix},tail,{int(t)},{format_float(p)},{format_float(se)}\n")
    return buf.getvalue().encode()


def read_sweep_csv(path) -> list[SweepRecord]:
    """Reconstruct SweepRecords from sweep.csv (profiles and tails included)."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        expected = ["beta", "n", "replicas", "chi", "xi", "nabla", "kind", "index", "value", "stderr"]
        if header != expected:
            raise ValueError(f"sweep.csv header mismatch: {header}")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) == len(expected):
                rows.append(parts)
    by_beta: dict[float, list] = {}
    for parts in rows:
        by_beta.setdefault(float(parts[0]), []).append(parts)
    records = []
    for beta in sorted(by_beta):
        group = by_beta[beta]
        first = group[0]
        xi_raw = int(first[4])
        xi = XiEstimate(value=abs(xi_raw), is_lower_bound=xi_raw < 0)
        chi_se = float("nan")
        s_r, s_v, t_t, t_p, t_s = [], [], [], [], []
        for parts in group:
            kind, idx, val, se = parts[6], int(parts[7]), float(parts[8]), float(parts[9])
            if kind == "chi":
                chi_se = se
            elif kind == "S":
                s_r.append(idx)
                s_v.append(val)
            elif kind == "tail":
                t_t.append(idx)
                t_p.append(val)
                t_s.append(se)
        records.append(SweepRecord(
            beta=beta, n=int(first[1]), replicas=int(first[2]),
            chi=float(first[3]), chi_stderr=chi_se, xi=xi, nabla=float(first[5]),
            s_radii=np.array(s_r), s_profile=np.array(s_v),
            tail_thresholds=np.array(t_t), tail_probs=np.array(t_p),
            tail_stderr=np.array(t_s),
        ))
    return records


def report_csv(report: dict) -> bytes:
    buf = io.StringIO()
    buf.write("name,expected,exponent,stderr,ci_lo,ci_hi,error\n")
    for name, fit in report["fits"].items():
        expected = fit.get("expected")
        exp_s = format_float(expected) if expected is not None else ""
        if "error" in fit:
            buf.write(f'{name},{exp_s},,,,,"{fit["error"]}"\n')
        else:
            ci = fit.get("ci", [fit["exponent"], fit["exponent"]])
            buf.write(
                f"{name},{exp_s},{format_float(fit['exponent'])},"
                f"{format_float(fit.get('stderr', float('nan')))},"
                f"{format_float(ci[0])},{format_float(ci[1])},\n"
            )
    return buf.getvalue().encode()


def json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()
