import numpy as np
import pytest
from scipy import stats

from lrperc import _fastpath
from lrperc.clusters import build_clusters
from lrperc.kernel import KernelSpec, edge_probability_at_distance
from lrperc.lattice import BoxLattice, enumerate_displacement_classes
from lrperc.observables import TailAccumulator, TwoPointAccumulator
from lrperc.sampler import (
    Configuration,
    dump_configuration,
    expected_open_edges,
    sample_configuration,
)

from oracles import all_pairs_1d


def test_beta_zero_is_empty():
    spec = KernelSpec(d=1, alpha=0.5)
    cfg = sample_configuration(spec, 0.0, BoxLattice(d=1, radius=8), 1, 0)
    assert cfg.edge_count == 0


def test_negative_beta_rejected():
    spec = KernelSpec(d=1, alpha=0.5)
    with pytest.raises(ValueError):
        sample_configuration(spec, -0.1, BoxLattice(d=1, radius=8), 1, 0)


def test_bit_identical_repeat():
    spec = KernelSpec(d=2, alpha=0.7)
    box = BoxLattice(d=2, radius=6)
    a = sample_configuration(spec, 0.4, box, 42, 3)
    b = sample_configuration(spec, 0.4, box, 42, 3)
    assert np.array_equal(a.edges, b.edges)
    c = sample_configuration(spec, 0.4, box, 42, 4)
    assert not np.array_equal(a.edges, c.edges)


def test_edges_valid_and_sorted():
    spec = KernelSpec(d=2, alpha=0.4)
    box = BoxLattice(d=2, radius=5)
    cfg = sample_configuration(spec, 0.8, box, 7, 1)
    assert cfg.edge_count > 0
    assert np.all(cfg.edges[:, 0] < cfg.edges[:, 1])  # no self-loops, ordered
    assert np.all((cfg.edges >= 0) & (cfg.edges < box.vertex_count))
    keys = cfg.edges[:, 0] * box.vertex_count + cfg.edges[:, 1]
    assert len(np.unique(keys)) == cfg.edge_count  # no duplicates
    assert np.all(np.diff(keys) > 0)  # sorted


def test_truncation_respected():
    spec = KernelSpec(d=1, alpha=0.3, truncation=2)
    box = BoxLattice(d=1, radius=30)
    for rep in range(20):
        cfg = sample_configuration(spec, 2.0, box, 5, rep)
        coords = box.vertex_of(cfg.edges)
        lengths = np.abs(coords[:, 1, 0] - coords[:, 0, 0])
        assert np.all(lengths <= 2)


def test_expected_open_edges_matches_pair_sum():
    spec = KernelSpec(d=1, alpha=0.6)
    box = BoxLattice(d=1, radius=2)
    _, probs = all_pairs_1d(box, spec, 0.5)
    assert expected_open_edges(spec, 0.5, box) == pytest.approx(float(np.sum(probs)), rel=1e-12)
    assert expected_open_edges(spec, 0.0, box) == 0.0


def test_expected_open_edges_single_class():
    # d=1, n=1 truncated to length 2 only: one class with M=1
    spec = KernelSpec(d=1, alpha=0.5)
    box = BoxLattice(d=1, radius=1)
    p2 = float(edge_probability_at_distance(spec, 0.7, 2))
    cls = enumerate_displacement_classes(box, spec, 0.7)
    assert expected_open_edges(spec, 0.7, box) == pytest.approx(
        float(np.sum(cls.pair_count * cls.probability)))
    assert cls.probability[-1] == pytest.approx(p2)


def test_per_pair_marginals_and_covariance():
    """Empirical per-pair open frequencies match edge_probability (4 SE), and
    indicators of distinct pairs are uncorrelated (4 SE)."""
    spec = KernelSpec(d=1, alpha=0.6)
    box = BoxLattice(d=1, radius=2)
    beta, R = 0.5, 20000
    pairs, probs = all_pairs_1d(box, spec, beta)
    lut = {pair: i for i, pair in enumerate(pairs)}
    ind = np.zeros((R, len(pairs)), dtype=np.int8)
    classes = enumerate_displacement_classes(box, spec, beta)
    for rep in range(R):
        cfg = sample_configuration(spec, beta, box, 2024, rep, classes)
        for u, w in cfg.edges:
            ind[rep, lut[(int(u), int(w))]] = 1
    freq = ind.mean(axis=0)
    se = np.sqrt(probs * (1 - probs) / R)
    assert np.all(np.abs(freq - probs) <= 4 * se)
    # pairwise covariances
    centered = ind - freq
    cov = centered.T @ centered / (R - 1)
    var = np.diag(cov)
    cov_se = np.sqrt(np.outer(var, var) / R)
    off = ~np.eye(len(pairs), dtype=bool)
    assert np.all(np.abs(cov[off]) <= 4 * cov_se[off])


def test_class_counts_binomial_chi_square():
    """Open counts per class follow Binomial(M_v, p_v) (chi-square, 1e-3)."""
    spec = KernelSpec(d=1, alpha=0.6)
    box = BoxLattice(d=1, radius=2)
    beta, R = 0.5, 100_000
    classes = enumerate_displacement_classes(box, spec, beta)
    K = _fastpath.batch_class_counts(spec, beta, box, 77, 0, R, classes)
    for c in range(len(classes.pair_count)):
        M, p = int(classes.pair_count[c]), float(classes.probability[c])
        observed = np.bincount(K[:, c], minlength=M + 1)
        expected = stats.binom.pmf(np.arange(M + 1), M, p) * R
        keep = expected >= 5
        if keep.sum() < 2:
            continue
        chi2 = float(np.sum((observed[keep] - expected[keep]) ** 2 / expected[keep]))
        chi2 += float(observed[~keep].sum() - expected[~keep].sum()) ** 2 / max(
            float(expected[~keep].sum()), 1e-9) if (~keep).any() else 0.0
        dof = int(keep.sum()) - 1 + int((~keep).any())
        pvalue = stats.chi2.sf(chi2, dof)
        assert pvalue > 1e-3, f"class {c}: chi2={chi2:.2f} dof={dof} p={pvalue:.2e}"


def test_nested_coupling_across_beta():
    """Same (seed, replica): edge set at smaller beta is a subset (CRN coupling)."""
    spec = KernelSpec(d=1, alpha=0.5)
    box = BoxLattice(d=1, radius=40)
    for rep in range(30):
        prev: set = set()
        for beta in (0.05, 0.15, 0.3, 0.6):
            cfg = sample_configuration(spec, beta, box, 99, rep)
            cur = set(map(tuple, cfg.edges))
            assert prev <= cur
            prev = cur


def test_fast_path_matches_reference_path():
    """The batch kernel reproduces per-replica sampling and accumulation exactly."""
    spec = KernelSpec(d=1, alpha=0.6)
    box = BoxLattice(d=1, radius=2)
    beta, seed, m, R = 0.5, 9, 2, 800
    classes = enumerate_displacement_classes(box, spec, beta)
    acc = TwoPointAccumulator(box, m)
    tail = TailAccumulator(box, m)
    hits = 0
    target = int(box.index_of(np.array([2])))
    for rep in range(R):
        forest = build_clusters(sample_configuration(spec, beta, box, seed, rep, classes))
        acc.add_forest(forest)
        tail.add_forest(forest)
        hits += int(forest.labels[box.origin_index] == forest.labels[target])
    cs, cq, fs, fq, largest, conn = _fastpath.batch_counts(
        spec, beta, box, m, seed, 0, R, classes, thresholds=tail.thresholds, x_flat=target)
    assert np.array_equal(acc.count_sum, cs)
    assert np.array_equal(acc.count_sq, cq)
    assert np.array_equal(tail.frac_sum, fs)
    assert np.array_equal(tail.frac_sq, fq)
    assert largest == tail.largest_seen
    assert conn == hits


def test_fast_path_class_counts_match_reference():
    spec = KernelSpec(d=1, alpha=0.6)
    box = BoxLattice(d=1, radius=5)
    beta, seed = 0.4, 31
    classes = enumerate_displacement_classes(box, spec, beta)
    K = _fastpath.batch_class_counts(spec, beta, box, seed, 0, 50, classes)
    for rep in range(50):
        cfg = sample_configuration(spec, beta, box, seed, rep, classes)
        if cfg.edge_count == 0:
            assert K[rep].sum() == 0
            continue
        coords = box.vertex_of(cfg.edges)
        lengths = np.abs(coords[:, 1, 0] - coords[:, 0, 0])
        per_class = np.bincount(lengths, minlength=int(classes.norms[-1]) + 1)[1:]
        assert np.array_equal(per_class, K[rep])


def test_dump_configuration_round_trip(tmp_path):
    spec = KernelSpec(d=1, alpha=0.5)
    box = BoxLattice(d=1, radius=10)
    cfg = sample_configuration(spec, 0.5, box, 13, 2)
    path = tmp_path / "config.bin"
    dump_configuration(cfg, path)
    raw = path.read_bytes()
    d, n = np.frombuffer(raw[:16], dtype="<i8")
    beta = np.frombuffer(raw[16:24], dtype="<f8")[0]
    seed, replica, E = np.frombuffer(raw[24:48], dtype="<i8")
    edges = np.frombuffer(raw[48:], dtype="<i8").reshape(-1, 2)
    assert (d, n, beta, seed, replica, E) == (1, 10, 0.5, 13, 2, cfg.edge_count)
    assert np.array_equal(edges, cfg.edges)
