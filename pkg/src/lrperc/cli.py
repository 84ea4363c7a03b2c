"""Command-line entry point wiring the whole pipeline.

Exit codes: 0 success, 2 invalid flags, 3 precondition violation,
4 bracketing failure in find-critical, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import analytic
from .artifacts import (
    atomic_write,
    fnv1a,
    format_float,
    json_bytes,
    read_sweep_csv,
    report_csv,
    sweep_csv,
    two_point_csv,
)
from .critical import BracketingError, beta_sweep, find_beta_c, sweep_point
from .kernel import KernelSpec
from .lattice import BoxLattice
from .sampler import dump_configuration, sample_configuration
from .scaling import exponent_report

SCHEMA_VERSION = 1

_CONFIG_KEYS = {
    "d", "alpha", "A", "beta", "beta_grid", "n", "inner_fraction", "replicas",
    "seed", "truncate", "window", "tol", "out", "threads", "beta_lo", "beta_hi",
    "max_expand", "replica", "x",
}


def load_config(path) -> dict:
    """key = value lines, UTF-8, '#' comments; unknown keys are errors."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value.strip()
    return values


def _parse_grid(text: str) -> list[float]:
    try:
        lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError as exc:
        raise ValueError(f"--beta-grid must be lo:hi:steps, got {text!r}") from exc
    if steps < 1:
        raise ValueError("--beta-grid needs steps >= 1")
    return list(np.linspace(lo, hi, steps))


def _parse_window(text: str) -> tuple[int, int]:
    try:
        r_min, r_max = (int(v) for v in text.split(":"))
    except ValueError as exc:
        raise ValueError(f"--window must be rmin:rmax, got {text!r}") from exc
    return r_min, r_max


def _default_threads() -> int:
    env = os.environ.get("PERC_LR_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrperc",
                                     description="Long-range percolation Monte Carlo lab")
    parser.add_argument("--config", type=str, default=None,
                        help="key=value parameter file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, beta=True):
        p.add_argument("--d", type=int, default=1)
        p.add_argument("--alpha", type=float, default=0.5)
        p.add_argument("--A", type=float, default=1.0, dest="A")
        if beta:
            p.add_argument("--beta", type=float, default=0.1)
        p.add_argument("--n", type=int, default=64)
        p.add_argument("--inner-fraction", type=float, default=0.5, dest="inner_fraction")
        p.add_argument("--replicas", type=int, default=10)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--truncate", type=int, default=None)
        p.add_argument("--out", type=str, default=".")
        p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("sample", help="dump one configuration (binary debug format)")
    common(p)
    p.add_argument("--replica", type=int, default=0)

    p = sub.add_parser("two-point", help="estimate the two-point table")
    common(p)

    p = sub.add_parser("triangle", help="two-point table plus chi, xi, triangle diagram")
    common(p)

    p = sub.add_parser("sweep", help="beta sweep of all observables")
    common(p, beta=False)
    p.add_argument("--beta-grid", type=str, required=True, dest="beta_grid")

    p = sub.add_parser("find-critical", help="bisection estimate of beta_c")
    common(p, beta=False)
    p.add_argument("--window", type=str, default=None)
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--beta-lo", type=float, default=0.05, dest="beta_lo")
    p.add_argument("--max-expand", type=int, default=8, dest="max_expand")
    p.add_argument("--beta-hi", type=float, default=1.0, dest="beta_hi")

    p = sub.add_parser("report", help="exponent report from sweep.csv (+ critical.json)")
    p.add_argument("--sweep", type=str, required=True)
    p.add_argument("--critical", type=str, default=None)
    p.add_argument("--out", type=str, default=".")

    p = sub.add_parser("verify-analytic", help="deterministic convolution checks")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--out", type=str, default=".")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    # first pass gets --config; file values become defaults so flags win
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=str, default=None)
    known, _ = pre.parse_known_args(argv)
    args = parser.parse_args(argv)
    if known.config:
        file_values = load_config(known.config)
        passed = {a.lstrip("-").replace("-", "_").split("=")[0] for a in argv if a.startswith("--")}
        for key, value in file_values.items():
            if key in passed or not hasattr(args, key):
                continue
            current = getattr(args, key)
            caster = type(current) if current is not None else str
            if key in ("beta_grid", "window"):
                caster = str
            elif key in ("d", "n", "replicas", "seed", "truncate", "threads",
                         "max_expand", "replica"):
                caster = int
            elif key in ("alpha", "A", "beta", "inner_fraction", "tol", "beta_lo", "beta_hi"):
                caster = float
            setattr(args, key, caster(value))
    return args


class _Run:
    """Collects output files, then writes them plus a manifest atomically."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.files: dict[str, bytes] = {}
        self.t_wall = time.perf_counter()
        self.t_cpu = time.process_time()

    def add(self, name: str, data: bytes) -> None:
        self.files[name] = data

    def finish(self, kernel: KernelSpec | None, params: dict, summary: str) -> int:
        out_dir = Path(self.args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        digests = {}
        for name, data in self.files.items():
            atomic_write(out_dir / name, data)
            digests[name] = f"{fnv1a(data):016x}"
        manifest = {
            "schema": SCHEMA_VERSION,
            "command": self.args.command,
            "kernel": kernel.to_dict() if kernel else None,
            "params": params,
            "seed": params.get("seed"),
            "wall_clock_s": time.perf_counter() - self.t_wall,
            "core_seconds": time.process_time() - self.t_cpu,
            "outputs": digests,
        }
        atomic_write(out_dir / "manifest.json", json_bytes(manifest))
        print(summary)
        return 0


def _kernel(args) -> KernelSpec:
    return KernelSpec(d=args.d, alpha=args.alpha, amplitude=args.A,
                      truncation=getattr(args, "truncate", None))


def _cmd_sample(args, run: _Run) -> int:
    spec = _kernel(args)
    box = BoxLattice(d=args.d, radius=args.n)
    config = sample_configuration(spec, args.beta, box, args.seed, args.replica)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_configuration(config, out_dir / "config.bin")
    run.add("config.meta.json", json_bytes({
        "d": args.d, "n": args.n, "beta": args.beta, "seed": args.seed,
        "replica": args.replica, "edges": config.edge_count,
    }))
    return run.finish(spec, _params(args), f"sample: {config.edge_count} open edges")


def _params(args) -> dict:
    skip = {"command", "config", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _cmd_two_point(args, run: _Run, with_triangle: bool = False) -> int:
    from .observables import (correlation_length_estimate, susceptibility_with_stderr,
                              triangle_estimate)

    spec = _kernel(args)
    m = max(int(args.n * args.inner_fraction), 1)
    from .critical import run_point
    table, _ = run_point(spec, args.beta, args.n, m, args.replicas, args.seed,
                         threads=args.threads or _default_threads())
    run.add("two_point.csv", two_point_csv(table))
    summary = f"two-point: {len(table.disp)} displacements, {args.replicas} replicas"
    if with_triangle:
        chi, chi_se = susceptibility_with_stderr(table)
        xi = correlation_length_estimate(table, chi)
        nabla = triangle_estimate(table)
        run.add("triangle.json", json_bytes({
            "beta": args.beta, "n": args.n, "replicas": args.replicas,
            "chi": chi, "chi_stderr": chi_se,
            "xi": xi.value, "xi_is_lower_bound": xi.is_lower_bound,
            "nabla": nabla,
        }))
        summary = f"triangle: chi={format_float(chi)} xi={xi.value} nabla={format_float(nabla)}"
    return run.finish(spec, _params(args), summary)


def _cmd_sweep(args, run: _Run) -> int:
    spec = _kernel(args)
    grid = _parse_grid(args.beta_grid)
    records = beta_sweep(spec, args.n, grid, args.replicas, args.seed,
                         inner_fraction=args.inner_fraction,
                         threads=args.threads or _default_threads())
    run.add("sweep.csv", sweep_csv(records))
    return run.finish(spec, _params(args), f"sweep: {len(records)} beta points")


def _cmd_find_critical(args, run: _Run) -> int:
    spec = _kernel(args)
    m = max(int(args.n * args.inner_fraction), 1)
    window = _parse_window(args.window) if args.window else (8, max(m // 4, 9))
    est = find_beta_c(spec, args.n, window, args.replicas, args.tol, args.seed,
                      beta_lo=args.beta_lo, beta_hi=args.beta_hi,
                      inner_fraction=args.inner_fraction,
                      max_expand=args.max_expand,
                      threads=args.threads or _default_threads())
    run.add("critical.json", json_bytes(est.to_dict()))
    return run.finish(spec, _params(args),
                      f"find-critical: beta_c_hat={format_float(est.beta_c_hat)} "
                      f"ci=[{format_float(est.ci[0])},{format_float(est.ci[1])}]")


def _cmd_report(args, run: _Run) -> int:
    from .critical import CriticalEstimate

    records = read_sweep_csv(args.sweep)
    critical = None
    critical_record = None
    if args.critical:
        with open(args.critical, encoding="utf-8") as fh:
            data = json.load(fh)
        critical = CriticalEstimate(
            beta_c_hat=data["beta_c_hat"], ci=tuple(data["ci"]), d=data["d"],
            alpha=data["alpha"], n=data["n"], window=tuple(data["window"]),
            probe_replicas=data["replicas"], seed=data["seed"],
            probes=data.get("probes", []),
        )
        at_crit = [r for r in records if abs(r.beta - critical.beta_c_hat)
                   <= 1e-9 * max(1.0, critical.beta_c_hat)]
        critical_record = at_crit[0] if at_crit else None
    report = exponent_report(records, critical=critical, critical_record=critical_record)
    run.add("report.json", json_bytes(report))
    run.add("report.csv", report_csv(report))
    fitted = sum(1 for f in report["fits"].values() if "error" not in f)
    return run.finish(None, _params(args), f"report: {fitted} exponents fitted")


def _cmd_verify_analytic(args, run: _Run) -> int:
    rows = ["check,d,alpha,R,x_norm,value,ratio"]
    for res in analytic.threshold_ratio_grid(args.d, args.alpha, [4, 8, 16], [4, 8, 16]):
        p = res.parameters
        rows.append(f"convolution,{p['d']},{format_float(p['alpha'])},{p['R']},"
                    f"{p['x_norm']},{format_float(res.value)},{format_float(res.normalized_ratio)}")
    run.add("convolution.csv", ("\n".join(rows) + "\n").encode())

    rows = ["k,c_prime"]
    for k in range(4, 9):
        us, vs, frac, bound = analytic.box_exit_sweep(1, k)
        ratio = np.where(frac > 0, frac / bound, 0.0)
        rows.append(f"{k},{format_float(float(ratio.max()))}")
    run.add("box_exit.csv", ("\n".join(rows) + "\n").encode())
    return run.finish(None, _params(args), "verify-analytic: checks written")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if getattr(args, "beta_grid", None) is not None:
            _parse_grid(args.beta_grid)
        if getattr(args, "window", None):
            _parse_window(args.window)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    run = _Run(args)
    handlers = {
        "sample": _cmd_sample,
        "two-point": _cmd_two_point,
        "triangle": lambda a, r: _cmd_two_point(a, r, with_triangle=True),
        "sweep": _cmd_sweep,
        "find-critical": _cmd_find_critical,
        "report": _cmd_report,
        "verify-analytic": _cmd_verify_analytic,
    }
    try:
        return handlers[args.command](args, run)
    except BracketingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
