"""Soup sampling semantics: restriction, superposition, coupling, serialization."""

import numpy as np
import pytest
from scipy import stats

from loopsoup.lattice import LatticeDomain
from loopsoup.soup import (
    Loop,
    LoopSoup,
    restrict,
    sample_bridge,
    sample_layered_soup,
    sample_soup,
    soup_from_text,
    soup_to_text,
    superpose,
)


def test_loop_validation():
    Loop(root=(0, 0), steps="EW")
    with pytest.raises(ValueError):
        Loop(root=(0, 0), steps="E")
    with pytest.raises(ValueError):
        Loop(root=(0, 0), steps="EE")


def test_loop_sites():
    loop = Loop(root=(2, 3), steps="ENWS")
    assert loop.site_set() == {(2, 3), (3, 3), (3, 4), (2, 4)}


def test_visited_sites_matches_per_loop_oracle():
    domain = LatticeDomain(12, 12)
    soup = sample_soup(domain, c=1.0, max_len=16, seed=5)
    assert len(soup) > 0
    ids, x, y = soup.visited_sites()
    by_loop = {}
    for i, xi, yi in zip(ids, x, y):
        by_loop.setdefault(int(i), []).append((int(xi), int(yi)))
    for i in range(len(soup)):
        expected = [tuple(p) for p in soup.loop(i).sites()]
        assert by_loop[int(i)] == expected


def test_zero_intensity_is_empty():
    soup = sample_soup(LatticeDomain(16, 16), c=0.0, max_len=8, seed=1)
    assert len(soup) == 0


def test_sampled_loops_stay_in_domain():
    domain = LatticeDomain(10, 8, offset=(3, -2))
    soup = sample_soup(domain, c=1.5, max_len=24, seed=9)
    _, x, y = soup.visited_sites()
    assert np.all(domain.contains_points(x, y))


def test_kept_length2_rate_on_interior_sites():
    # Expected kept length-2 loops rooted at a fully interior site: c * 1/8.
    domain = LatticeDomain(40, 40)
    total = 0
    reps = 200
    for rep in range(reps):
        soup = sample_soup(domain, c=1.0, max_len=2, seed=1000 + rep)
        interior = (
            (soup.roots[:, 0] >= 1)
            & (soup.roots[:, 0] <= 38)
            & (soup.roots[:, 1] >= 1)
            & (soup.roots[:, 1] <= 38)
        )
        total += int(interior.sum())
    n_interior_sites = 38 * 38
    mean = total / (reps * n_interior_sites)
    sigma = np.sqrt((1 / 8) / (reps * n_interior_sites))
    assert abs(mean - 1 / 8) < 5 * sigma


def test_determinism_same_seed():
    domain = LatticeDomain(20, 20)
    a = sample_soup(domain, c=0.8, max_len=32, seed=42)
    b = sample_soup(domain, c=0.8, max_len=32, seed=42)
    assert np.array_equal(a.roots, b.roots)
    assert np.array_equal(a.codes, b.codes)
    c = sample_soup(domain, c=0.8, max_len=32, seed=43)
    assert not (
        len(c) == len(a)
        and np.array_equal(a.roots, c.roots)
        and np.array_equal(a.codes, c.codes)
    )


def test_restrict_identity_and_subset():
    domain = LatticeDomain(16, 16)
    soup = sample_soup(domain, c=1.0, max_len=16, seed=3)
    same = restrict(soup, domain)
    assert len(same) == len(soup)
    sub = LatticeDomain(8, 8, offset=(4, 4))
    cut = restrict(soup, sub)
    _, x, y = cut.visited_sites()
    assert np.all(sub.contains_points(x, y))
    with pytest.raises(ValueError):
        restrict(soup, LatticeDomain(20, 20))


def test_restrict_1x2_strip_only_back_and_forth():
    domain = LatticeDomain(16, 16)
    soup = sample_soup(domain, c=2.0, max_len=16, seed=8)
    strip = LatticeDomain(2, 1, offset=(5, 5))
    cut = restrict(soup, strip)
    for loop in cut:
        assert loop.length == 2
        assert loop.site_set() <= {(5, 5), (6, 5)}


def test_superpose_identity_and_errors():
    domain = LatticeDomain(12, 12)
    a = sample_soup(domain, c=0.5, max_len=8, seed=1)
    empty = sample_soup(domain, c=0.0, max_len=8, seed=2)
    merged = superpose(a, empty)
    assert len(merged) == len(a)
    assert merged.intensity_c == 0.5
    b = sample_soup(domain, c=0.5, max_len=8, seed=3)
    both = superpose(a, b)
    assert both.intensity_c == pytest.approx(1.0)
    assert len(both) == len(a) + len(b)
    with pytest.raises(ValueError):
        superpose(a, sample_soup(LatticeDomain(10, 12), c=0.5, max_len=8, seed=4))
    with pytest.raises(ValueError):
        superpose(a, sample_soup(domain, c=0.5, max_len=16, seed=4))


def test_superposition_law_small_chisquare():
    # per-length total counts: superpose(0.5, 0.5) vs direct 1.0
    domain = LatticeDomain(16, 16)
    reps = 400
    lengths = (2, 4, 6, 8)
    counts_a = np.zeros(len(lengths))
    counts_b = np.zeros(len(lengths))
    for rep in range(reps):
        s1 = sample_soup(domain, c=0.5, max_len=8, seed=20_000 + rep)
        s2 = sample_soup(domain, c=0.5, max_len=8, seed=40_000 + rep)
        sup = superpose(s1, s2)
        direct = sample_soup(domain, c=1.0, max_len=8, seed=60_000 + rep)
        for j, l in enumerate(lengths):
            counts_a[j] += int((sup.lengths == l).sum())
            counts_b[j] += int((direct.lengths == l).sum())
    table = np.stack([counts_a, counts_b])
    _, p, _, _ = stats.chi2_contingency(table)
    assert p > 0.001


def test_restriction_law_small_chisquare():
    domain = LatticeDomain(16, 16)
    sub = LatticeDomain(8, 8, offset=(4, 4))
    reps = 400
    lengths = (2, 4, 6, 8)
    counts_a = np.zeros(len(lengths))
    counts_b = np.zeros(len(lengths))
    for rep in range(reps):
        cut = restrict(sample_soup(domain, c=1.0, max_len=8, seed=rep), sub)
        direct = sample_soup(sub, c=1.0, max_len=8, seed=100_000 + rep)
        for j, l in enumerate(lengths):
            counts_a[j] += int((cut.lengths == l).sum())
            counts_b[j] += int((direct.lengths == l).sum())
    table = np.stack([counts_a, counts_b])
    _, p, _, _ = stats.chi2_contingency(table)
    assert p > 0.001


def test_layered_soup_monotone_prefixes():
    domain = LatticeDomain(24, 24)
    layered = sample_layered_soup(domain, c_max=1.5, max_len=16, seed=17)
    assert layered.arrivals is not None
    assert np.all(np.diff(layered.arrivals) >= 0)
    low = layered.at_intensity(0.5)
    high = layered.at_intensity(1.2)
    assert len(low) <= len(high) <= len(layered)
    # prefix property: low's loops are exactly the first len(low) of high
    assert np.array_equal(low.roots, high.roots[: len(low)])
    assert np.array_equal(low.codes, high.codes[: high.offsets[len(low)]])
    assert np.all(low.arrivals <= 0.5)
    assert np.all(high.arrivals <= 1.2)


def test_serialization_round_trip():
    domain = LatticeDomain(14, 14)
    soup = sample_soup(domain, c=1.2, max_len=12, seed=77)
    text = soup_to_text(soup)
    back = soup_from_text(text)
    assert len(back) == len(soup)
    assert np.array_equal(back.roots, soup.roots)
    assert np.array_equal(back.codes, soup.codes)
    assert back.intensity_c == soup.intensity_c
    assert back.max_len == soup.max_len
    assert back.seed == soup.seed
    assert back.domain.width == 14 and back.domain.mesh == 1.0
    # header shape
    assert text.startswith("#soup c=1.2 W=14 H=14 mesh=1.0 maxlen=12 seed=77\n")


def test_sample_bridge_single():
    rng = np.random.default_rng(0)
    loop = sample_bridge((5, 5), 6, rng)
    assert loop.length == 6
    assert loop.root == (5, 5)
