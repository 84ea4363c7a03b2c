import json

import numpy as np
import pytest

from lrperc.artifacts import fnv1a
from lrperc.cli import load_config, main


def run(args):
    return main(args)


def test_two_point_beta_zero(tmp_path):
    out = tmp_path / "run"
    rc = run(["two-point", "--d", "1", "--alpha", "0.6", "--A", "1", "--beta", "0",
              "--n", "64", "--replicas", "10", "--seed", "7", "--out", str(out)])
    assert rc == 0
    lines = (out / "two_point.csv").read_text().strip().split("\n")
    assert lines[1].split(",")[1] == "1"  # tau(0) = 1
    for line in lines[2:]:
        assert float(line.split(",")[1]) == 0.0


def test_repeat_runs_byte_identical(tmp_path):
    args = ["two-point", "--d", "1", "--alpha", "0.5", "--beta", "0.3",
            "--n", "32", "--replicas", "20", "--seed", "11"]
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run(args + ["--out", str(out)]) == 0
        outs.append((out / "two_point.csv").read_bytes())
    assert outs[0] == outs[1]
    manifests = [json.loads((tmp_path / n / "manifest.json").read_text()) for n in ("a", "b")]
    assert manifests[0]["outputs"] == manifests[1]["outputs"]


def test_thread_count_invariance(tmp_path):
    # box above the batch fast-path cutoff so threading is actually exercised
    base = ["two-point", "--d", "1", "--alpha", "0.5", "--beta", "0.25",
            "--n", "2100", "--replicas", "8", "--seed", "4"]
    blobs = []
    for threads, name in (("1", "t1"), ("8", "t8")):
        out = tmp_path / name
        assert run(base + ["--threads", threads, "--out", str(out)]) == 0
        blobs.append((out / "two_point.csv").read_bytes())
    assert blobs[0] == blobs[1]


def test_manifest_digests_match_files(tmp_path):
    out = tmp_path / "run"
    assert run(["sweep", "--d", "1", "--alpha", "0.5", "--beta-grid", "0.1:0.3:3",
                "--n", "32", "--replicas", "8", "--seed", "2", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    for name, digest in manifest["outputs"].items():
        assert f"{fnv1a((out / name).read_bytes()):016x}" == digest
    # 3 beta groups in the sweep file
    lines = (out / "sweep.csv").read_text().strip().split("\n")[1:]
    betas = {line.split(",")[0] for line in lines}
    assert len(betas) == 3


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "params.cfg"
    cfg.write_text("alpha = 0.6\nn = 48\nreplicas = 5\n# comment\n\n")
    out = tmp_path / "run"
    assert run(["--config", str(cfg), "two-point", "--alpha", "0.5", "--beta", "0.2",
                "--seed", "1", "--out", str(out)]) == 0
    params = json.loads((out / "manifest.json").read_text())["params"]
    assert params["alpha"] == 0.5  # flag wins
    assert params["n"] == 48  # file fills the gap
    assert params["replicas"] == 5


def test_empty_config_uses_defaults(tmp_path):
    cfg = tmp_path / "empty.cfg"
    cfg.write_text("")
    out = tmp_path / "run"
    assert run(["--config", str(cfg), "two-point", "--beta", "0.1", "--n", "16",
                "--replicas", "3", "--out", str(out)]) == 0


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("alpha = 0.5\nalpha_c = 2\n")
    assert run(["--config", str(cfg), "two-point", "--out", str(tmp_path / "x")]) == 2
    err = capsys.readouterr().err
    assert "alpha_c" in err and ":2:" in err


def test_load_config_malformed_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("alpha 0.5\n")
    with pytest.raises(ValueError, match=":1:"):
        load_config(cfg)


def test_invalid_beta_grid_exit_code(tmp_path):
    assert run(["sweep", "--beta-grid", "nonsense", "--out", str(tmp_path / "x")]) == 2


def test_precondition_violation_exit_code(tmp_path):
    rc = run(["two-point", "--beta", "-0.5", "--n", "16", "--out", str(tmp_path / "x")])
    assert rc == 3


def test_bracketing_failure_exit_code(tmp_path):
    # subcritical bracket with expansion disabled cannot be certified
    rc = run(["find-critical", "--d", "1", "--alpha", "0.6",
              "--n", "256", "--replicas", "24", "--window", "4:32", "--tol", "0.2",
              "--beta-lo", "0.10", "--beta-hi", "0.13", "--max-expand", "0",
              "--seed", "3", "--out", str(tmp_path / "x")])
    assert rc == 4


def test_io_failure_exit_code(tmp_path):
    rc = run(["report", "--sweep", str(tmp_path / "missing.csv"),
              "--out", str(tmp_path / "x")])
    assert rc == 5


def test_sample_command_writes_binary(tmp_path):
    out = tmp_path / "run"
    assert run(["sample", "--d", "1", "--alpha", "0.5", "--beta", "0.4", "--n", "16",
                "--seed", "9", "--replica", "1", "--out", str(out)]) == 0
    raw = (out / "config.bin").read_bytes()
    d, n = np.frombuffer(raw[:16], dtype="<i8")
    assert (d, n) == (1, 16)
    meta = json.loads((out / "config.meta.json").read_text())
    assert meta["edges"] * 16 + 48 == len(raw)


def test_find_critical_and_report_pipeline(tmp_path):
    fc = tmp_path / "fc"
    assert run(["find-critical", "--d", "1", "--alpha", "0.6", "--n", "256",
                "--replicas", "16", "--window", "4:32", "--tol", "0.15",
                "--beta-lo", "0.15", "--beta-hi", "1.0", "--seed", "3",
                "--out", str(fc)]) == 0
    crit = json.loads((fc / "critical.json").read_text())
    assert crit["ci"][0] <= crit["beta_c_hat"] <= crit["ci"][1]
    sw = tmp_path / "sw"
    grid = f"{crit['beta_c_hat']*0.5:.4f}:{crit['beta_c_hat']*0.9:.4f}:6"
    assert run(["sweep", "--d", "1", "--alpha", "0.6", "--beta-grid", grid,
                "--n", "512", "--replicas", "60", "--seed", "5", "--out", str(sw)]) == 0
    rep = tmp_path / "rep"
    assert run(["report", "--sweep", str(sw / "sweep.csv"),
                "--critical", str(fc / "critical.json"), "--out", str(rep)]) == 0
    report = json.loads((rep / "report.json").read_text())
    assert report["expected"]["chi_vs_xi"] == pytest.approx(0.6)
    assert (rep / "report.csv").exists()


def test_verify_analytic(tmp_path):
    out = tmp_path / "va"
    assert run(["verify-analytic", "--d", "1", "--alpha", "0.5", "--out", str(out)]) == 0
    conv = (out / "convolution.csv").read_text().strip().split("\n")
    assert conv[0] == "check,d,alpha,R,x_norm,value,ratio"
    assert len(conv) == 10
    box = (out / "box_exit.csv").read_text().strip().split("\n")
    assert box[0] == "k,c_prime"
    cps = [float(l.split(",")[1]) for l in box[1:]]
    assert max(cps) / min(cps) < 2


def test_threads_env_fallback(monkeypatch):
    from lrperc.cli import _default_threads

    monkeypatch.setenv("PERC_LR_THREADS", "5")
    assert _default_threads() == 5
    monkeypatch.delenv("PERC_LR_THREADS")
    assert _default_threads() >= 1
