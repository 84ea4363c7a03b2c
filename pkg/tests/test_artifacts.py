import json

import numpy as np
import pytest

from lrperc.artifacts import (
    atomic_write,
    fnv1a,
    format_float,
    json_bytes,
    read_sweep_csv,
    report_csv,
    sweep_csv,
    two_point_csv,
)
from lrperc.kernel import KernelSpec
from lrperc.observables import SweepRecord, XiEstimate, two_point_estimate
from lrperc.sampler import sample_configuration
from lrperc.lattice import BoxLattice


def test_fnv1a_known_vectors():
    assert fnv1a(b"") == 0xCBF29CE484222325
    assert fnv1a(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a(b"hello") == 0xA430D84680AABD0B


def test_atomic_write_replaces(tmp_path):
    path = tmp_path / "out.txt"
    atomic_write(path, b"one")
    atomic_write(path, b"two")
    assert path.read_bytes() == b"two"
    assert list(tmp_path.iterdir()) == [path]  # no temp file left behind


def test_format_float_round_trips():
    for v in (1 / 3, 0.1, 2.0**-52, 1e300, -0.0):
        assert float(format_float(v)) == v


def _table(beta=0.4, n=8, m=4, replicas=6):
    spec = KernelSpec(d=1, alpha=0.5)
    box = BoxLattice(d=1, radius=n)
    configs = [sample_configuration(spec, beta, box, 3, r) for r in range(replicas)]
    return two_point_estimate(configs, inner_radius=m)


def test_two_point_csv_layout():
    table = _table()
    lines = two_point_csv(table).decode().strip().split("\n")
    assert lines[0] == "dx1,tau,stderr,pairs"
    zero = lines[1].split(",")
    assert zero[0] == "0" and float(zero[1]) == 1.0 and int(zero[3]) == 9
    assert len(lines) == 2 + len(table.disp)
    row1 = lines[2].split(",")
    assert int(row1[0]) == 1
    assert float(row1[1]) == table.tau[0]


def _records():
    th = np.array([1, 2, 4])
    recs = []
    for i, (beta, xi) in enumerate([(0.1, XiEstimate(2, False)), (0.2, XiEstimate(8, True))]):
        recs.append(SweepRecord(
            beta=beta, n=16, replicas=5, chi=1.5 + i, chi_stderr=0.01,
            xi=xi, nabla=2.25 + i,
            s_radii=np.array([1, 2, 4]), s_profile=np.array([1.2, 0.8, 0.5]),
            tail_thresholds=th, tail_probs=np.array([1.0, 0.5, 0.25]),
            tail_stderr=np.array([0.0, 0.01, 0.01]),
        ))
    return recs


def test_sweep_csv_round_trip(tmp_path):
    recs = _records()
    data = sweep_csv(recs)
    path = tmp_path / "sweep.csv"
    path.write_bytes(data)
    back = read_sweep_csv(path)
    assert len(back) == 2
    for a, b in zip(recs, back):
        assert (a.beta, a.n, a.replicas) == (b.beta, b.n, b.replicas)
        assert a.chi == b.chi and a.chi_stderr == b.chi_stderr
        assert a.xi == b.xi  # including the lower-bound sentinel
        assert a.nabla == b.nabla
        assert np.array_equal(a.s_radii, b.s_radii)
        assert np.array_equal(a.s_profile, b.s_profile)
        assert np.array_equal(a.tail_probs, b.tail_probs)


def test_read_sweep_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "sweep.csv"
    path.write_text("beta,n,oops\n")
    with pytest.raises(ValueError):
        read_sweep_csv(path)


def test_report_csv_rows():
    report = {
        "fits": {
            "good": {"expected": -1.0, "exponent": -0.98, "stderr": 0.02,
                     "ci": [-1.02, -0.94]},
            "bad": {"expected": 0.5, "error": "insufficient data: no points"},
        }
    }
    lines = report_csv(report).decode().strip().split("\n")
    assert lines[0].startswith("name,expected,exponent")
    good = lines[1].split(",")
    assert good[0] == "good" and float(good[2]) == -0.98
    assert "insufficient data" in lines[2]


def test_json_bytes_stable():
    a = json_bytes({"b": 1, "a": [1, 2]})
    b = json_bytes({"a": [1, 2], "b": 1})
    assert a == b
    assert json.loads(a) == {"a": [1, 2], "b": 1}
