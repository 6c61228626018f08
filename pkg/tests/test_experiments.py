"""Experiment machinery on small lattices."""

import numpy as np
import pytest

from loopsoup.clusters import component_labels, adjacency_pairs
from loopsoup.experiments import (
    AnnulusResult,
    ScanConfig,
    additivity_check,
    annulus_chain_tail,
    boundary_touch_scan,
    crossing_scan,
    merge_results,
    percolation_scan,
    restriction_check,
    wilson_ci,
)
from loopsoup.soup import sample_layered_soup


def test_scan_config_validation():
    with pytest.raises(ValueError):
        ScanConfig(cs=(), size=16)
    with pytest.raises(ValueError):
        ScanConfig(cs=(-0.1,), size=16)
    with pytest.raises(ValueError):
        ScanConfig(cs=(0.5,), size=16, replicates=0)
    with pytest.raises(ValueError):
        ScanConfig(cs=(0.5,), size=16, aspect=-1)


def test_wilson_ci_contains_estimate():
    for s, n in ((0, 10), (3, 10), (10, 10), (250, 1000)):
        lo, hi = wilson_ci(s, n)
        assert lo <= s / n <= hi
        assert 0 <= lo <= hi <= 1


def test_zero_intensity_scan_is_zero():
    cfg = ScanConfig(cs=(0.0,), size=16, max_len=8, replicates=5, seed=1)
    res = percolation_scan(cfg)
    for row in res.rows:
        assert row.value == 0.0


def test_scan_monotone_and_fields():
    cfg = ScanConfig(cs=(0.3, 0.8, 1.3), size=24, max_len=32, replicates=30, seed=5)
    res = boundary_touch_scan(cfg)
    touch = res.series("boundary_touch")
    cross = res.series("crossing")
    assert touch == sorted(touch)
    assert cross == sorted(cross)
    for row in res.rows:
        assert 0 <= row.value <= 1
        assert row.ci_lo <= row.value <= row.ci_hi
        assert row.n == 30
    assert res.kind == "scan"
    assert len(res.replicate_seeds) == 30


def test_scan_threads_deterministic():
    cfg1 = ScanConfig(cs=(0.5, 1.0), size=16, max_len=16, replicates=12, seed=9, threads=1)
    cfg2 = ScanConfig(cs=(0.5, 1.0), size=16, max_len=16, replicates=12, seed=9, threads=2)
    r1 = percolation_scan(cfg1)
    r2 = percolation_scan(cfg2)
    assert [(r.c, r.stat, r.successes) for r in r1.rows] == [
        (r.c, r.stat, r.successes) for r in r2.rows
    ]


def test_crossing_scan_aspect():
    cfg = ScanConfig(cs=(0.5,), size=16, max_len=16, replicates=3, seed=2)
    res = crossing_scan(cfg, aspect=2.0)
    assert res.config["aspect"] == 2.0


def test_coupled_cluster_containment():
    # every cluster at low intensity sits inside one cluster at high intensity
    from loopsoup.lattice import LatticeDomain

    for seed in range(20):
        soup = sample_layered_soup(LatticeDomain(24, 24), 1.2, 32, seed=seed)
        lo, hi = adjacency_pairs(soup)
        k_lo = int(np.searchsorted(soup.arrivals, 0.4, side="right"))
        k_hi = len(soup)
        if k_lo == 0:
            continue
        keep = hi < k_lo
        labels_lo = component_labels(k_lo, lo[keep], hi[keep])
        labels_hi = component_labels(k_hi, lo, hi)
        pairs = np.unique(np.stack([labels_lo, labels_hi[:k_lo]], axis=1), axis=0)
        # each low cluster maps into exactly one high cluster
        assert len(pairs) == labels_lo.max() + 1


def test_annulus_validation_and_basics():
    cfg = ScanConfig(cs=(0.5,), size=32, max_len=16, replicates=10, seed=3)
    with pytest.raises(ValueError):
        annulus_chain_tail(0.5, 8.0, 4.0, cfg)
    with pytest.raises(ValueError):
        annulus_chain_tail(0.5, 4.0, 30.0, cfg)
    res = annulus_chain_tail(0.0, 3.0, 8.0, cfg)
    assert res.counts == [0] * 10
    assert res.rows == []


def test_annulus_tail_nonincreasing():
    cfg = ScanConfig(cs=(1.0,), size=32, max_len=64, replicates=40, seed=4)
    res = annulus_chain_tail(1.0, 3.0, 10.0, cfg)
    freqs = [row.value for row in res.rows]
    assert freqs == sorted(freqs, reverse=True)
    assert isinstance(res, AnnulusResult)


def test_additivity_check_small():
    cfg = ScanConfig(cs=(1.0,), size=16, max_len=16, replicates=300, seed=6)
    report = additivity_check(0.5, 0.5, cfg)
    names = [e.name for e in report.entries]
    assert "per_length_totals" in names
    assert report.passed(alpha=0.001)


def test_restriction_check_small():
    cfg = ScanConfig(cs=(1.0,), size=16, max_len=16, replicates=300, seed=7)
    report = restriction_check(1.0, 8, cfg)
    assert report.passed(alpha=0.001)
    assert report.kind == "restriction"


def test_merge_identity_commutes_pools():
    cfg_a = ScanConfig(cs=(0.5, 1.0), size=16, max_len=16, replicates=10, seed=11)
    cfg_b = ScanConfig(cs=(0.5, 1.0), size=16, max_len=16, replicates=10, seed=12)
    ra = percolation_scan(cfg_a)
    rb = percolation_scan(cfg_b)
    same = merge_results([ra])
    assert [(r.c, r.stat, r.successes, r.n) for r in same.rows] == sorted(
        [(r.c, r.stat, r.successes, r.n) for r in ra.rows]
    )
    ab = merge_results([ra, rb])
    ba = merge_results([rb, ra])
    assert [(r.c, r.stat, r.successes, r.n) for r in ab.rows] == [
        (r.c, r.stat, r.successes, r.n) for r in ba.rows
    ]
    assert all(r.n == 20 for r in ab.rows)
    bad = ScanConfig(cs=(0.5, 1.0), size=18, max_len=16, replicates=10, seed=13)
    with pytest.raises(ValueError):
        merge_results([ra, percolation_scan(bad)])
