"""Acceptance checks for the plotting component.

The collapse criterion runs on synthetic crossover-form tables; the
independence check renders every figure kind in a subprocess where the
simulation package is made unimportable.
"""

import json
import subprocess
import sys
import textwrap
from pathlib import Path

from fixture_data import FIXTURES, write_crossover_fixture


def test_collapse_sidecar_gap(tmp_path):
    """Synthetic crossover tables: sidecar max vertical log-gap < 0.01."""
    from lrperc_plots import FigureSpec, render

    tables, sweep, report = write_crossover_fixture(tmp_path)
    out = tmp_path / "collapse.svg"
    render(FigureSpec(kind="collapse", out=out, sweep=sweep, report=report,
                      tables=tables))
    with open(out.with_suffix(".json")) as fh:
        gap = json.load(fh)["collapse"]["max_log_gap"]
    ok = gap < 0.01
    print(f"{'PASS' if ok else 'FAIL'} collapse sidecar: max log-gap {gap:.3e} < 0.01")
    assert ok


def test_renders_without_primary_package(tmp_path):
    """All figure kinds render from canned fixtures with lrperc unimportable."""
    script = textwrap.dedent(f"""
        import sys

        class Block:
            def find_module(self, name, path=None):
                if name == "lrperc" or name.startswith("lrperc."):
                    raise ImportError("primary package blocked for this test")
        sys.meta_path.insert(0, Block())

        from pathlib import Path
        from lrperc_plots import FigureSpec, render
        from fixture_data import write_crossover_fixture

        fixtures = Path({str(FIXTURES)!r})
        out = Path({str(tmp_path)!r})
        render(FigureSpec(kind="two-point", out=out / "two_point.svg",
                          two_point=fixtures / "two_point.csv",
                          report=fixtures / "report.json"))
        for kind in ("chi-xi", "tail", "triangle"):
            render(FigureSpec(kind=kind, out=out / (kind + ".svg"),
                              sweep=fixtures / "sweep.csv",
                              report=fixtures / "report.json"))
        tables, sweep, report = write_crossover_fixture(out)
        render(FigureSpec(kind="collapse", out=out / "collapse.svg",
                          sweep=sweep, report=report, tables=tables))
        print("rendered all kinds")
    """)
    proc = subprocess.run([sys.executable, "-c", script], capture_output=True,
                          text=True, cwd=Path(__file__).parent)
    ok = proc.returncode == 0 and "rendered all kinds" in proc.stdout
    print(f"{'PASS' if ok else 'FAIL'} figures render without primary package"
          + ("" if ok else f": {proc.stderr[-500:]}"))
    assert ok, proc.stderr
    for kind in ("two_point", "chi-xi", "tail", "triangle", "collapse"):
        svg = tmp_path / f"{kind}.svg"
        assert svg.stat().st_size > 0
        assert svg.with_suffix(".json").exists()
