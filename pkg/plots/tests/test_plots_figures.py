import json

import pytest

from lrperc_plots import FigureSpec, read_report, read_sweep, render

from fixture_data import write_crossover_fixture


def _sidecar(path):
    with open(path.with_suffix(".json")) as fh:
        return json.load(fh)


def test_two_point_figure_smoke(fixtures, tmp_path):
    out = tmp_path / "two_point.svg"
    render(FigureSpec(kind="two-point", out=out,
                      two_point=fixtures / "two_point.csv",
                      report=fixtures / "report.json"))
    svg = out.read_text()
    assert out.stat().st_size > 0
    assert "shell radius r" in svg and "two-point tau(r)" in svg
    side = _sidecar(out)
    assert side["figure"] == "two-point"
    assert len(side["series"][0]["x"]) == len(side["series"][0]["y"]) > 10


def test_reference_slopes_come_from_report(fixtures, tmp_path):
    out = tmp_path / "chi_xi.svg"
    render(FigureSpec(kind="chi-xi", out=out, sweep=fixtures / "sweep.csv",
                      report=fixtures / "report.json"))
    report = read_report(fixtures / "report.json")
    slopes = {l["label"]: l["slope"] for l in _sidecar(out)["reference_lines"]}
    assert slopes["chi_vs_xi expected"] == report["expected"]["chi_vs_xi"]
    assert slopes["chi_vs_xi fitted"] == report["fits"]["chi_vs_xi"]["exponent"]


def test_sidecar_echoes_sweep_numbers(fixtures, tmp_path):
    out = tmp_path / "triangle.svg"
    render(FigureSpec(kind="triangle", out=out, sweep=fixtures / "sweep.csv",
                      report=fixtures / "report.json"))
    rows = [r for r in read_sweep(fixtures / "sweep.csv")
            if not r.xi_is_lower_bound and r.xi >= 1]
    series = _sidecar(out)["series"][0]
    assert series["x"] == [r.xi for r in rows]
    assert series["y"] == [r.nabla for r in rows]


def test_tail_figure_one_series_per_beta(fixtures, tmp_path):
    out = tmp_path / "tail.svg"
    render(FigureSpec(kind="tail", out=out, sweep=fixtures / "sweep.csv",
                      report=fixtures / "report.json"))
    side = _sidecar(out)
    rows = read_sweep(fixtures / "sweep.csv")
    assert len(side["series"]) == len(rows)
    labels = {s["label"] for s in side["series"]}
    assert all(f"beta={r.beta:.6g}" in labels for r in rows)


def test_collapse_figure_synthetic_exact(tmp_path):
    tables, sweep, report = write_crossover_fixture(tmp_path)
    out = tmp_path / "collapse.svg"
    render(FigureSpec(kind="collapse", out=out, sweep=sweep, report=report,
                      tables=tables))
    side = _sidecar(out)
    assert side["collapse"]["alpha"] == pytest.approx(0.6)
    assert side["collapse"]["d"] == 1
    assert side["collapse"]["max_log_gap"] < 1e-9
    assert len(side["series"]) == 3


def test_unknown_kind_and_missing_inputs(fixtures, tmp_path):
    with pytest.raises(ValueError, match="unknown figure kind"):
        FigureSpec(kind="pie", out=tmp_path / "x.svg")
    with pytest.raises(ValueError, match="two_point"):
        render(FigureSpec(kind="two-point", out=tmp_path / "x.svg",
                          report=fixtures / "report.json"))
    with pytest.raises(ValueError, match="needs inputs: report"):
        render(FigureSpec(kind="chi-xi", out=tmp_path / "x.svg",
                          sweep=fixtures / "sweep.csv"))
