"""Fractal percolation: tree structure, extinction, crossing, square covering."""

import numpy as np
import pytest
from scipy import optimize

from loopsoup.fractal import (
    DyadicSquare,
    FractalPercolation,
    bitmap_text,
    crossing_exists,
    extinction_oracle,
    l1_diameter,
    loop_to_square,
    loop_unit_points,
    sample_fractal,
    sample_fractal_coupled,
    survival_frequency,
)
from loopsoup.lattice import LatticeDomain
from loopsoup.soup import sample_soup


def extinction_by_cubic(p: float) -> float:
    """Independent oracle: deflate the known fixed point q=1 and root-find.

    (1-p+pq)^4 - q = (q - 1) * cubic(q); for p > 1/4 the cubic has its root
    in (0, 1).
    """
    a, b = p, 1 - p
    c3 = a**4
    c2 = c3 + 4 * a**3 * b
    c1 = c2 + 6 * a**2 * b**2
    c0 = c1 + 4 * a * b**3 - 1
    if 4 * p <= 1:
        return 1.0
    return float(optimize.brentq(lambda q: ((c3 * q + c2) * q + c1) * q + c0, 0.0, 1.0))


def test_full_and_empty_retention():
    full = sample_fractal(1.0, 4, seed=0)
    assert all(level.all() for level in full.levels)
    empty = sample_fractal(0.0, 3, seed=0)
    assert not any(level.any() for level in empty.levels)


def test_ancestor_invariant_enforced():
    with pytest.raises(AssertionError):
        FractalPercolation(
            p=0.5,
            depth=2,
            levels=(
                np.zeros((2, 2), dtype=bool),
                np.ones((4, 4), dtype=bool),
            ),
        )


def test_retained_count_mean_matches_branching():
    # mean retained count at depth k is (4p)^k
    p, depth, n = 0.6, 5, 400
    totals = np.zeros(depth)
    for s in range(n):
        fp = sample_fractal(p, depth, seed=s)
        totals += [fp.retained_count(k) for k in range(1, depth + 1)]
    means = totals / n
    for k in range(1, depth + 1):
        mean_k = (4 * p) ** k
        # crude variance bound: supercritical branching has var ~ mean^2
        sigma = mean_k * 3 / np.sqrt(n)
        assert abs(means[k - 1] - mean_k) < 3 * sigma


@pytest.mark.parametrize("p", [0.0, 0.1, 0.25])
def test_extinction_is_one_at_or_below_quarter(p):
    assert extinction_oracle(p) == 1.0


def test_extinction_matches_cubic_oracle():
    for p in (0.3, 0.5, 0.7, 0.9):
        assert extinction_oracle(p) == pytest.approx(extinction_by_cubic(p), abs=1e-10)
        assert 0 < extinction_oracle(p) < 1


def test_extinction_matches_monte_carlo():
    p = 0.9
    q = extinction_oracle(p)
    freq = survival_frequency(p, depth=14, samples=4000, seed=11)
    target = 1 - q
    sigma = np.sqrt(target * (1 - target) / 4000)
    assert abs(freq - target) < 3 * sigma


def test_crossing_trivial_cases():
    assert crossing_exists(sample_fractal(1.0, 4, seed=1))
    assert not crossing_exists(sample_fractal(0.0, 4, seed=1))


def test_crossing_single_row():
    # a retained row spanning the full x-range at fixed y crosses left-right
    levels = [np.zeros((2, 2), dtype=bool), np.zeros((4, 4), dtype=bool)]
    levels[0][:, 0] = True
    levels[1][:, 0] = True
    fp = FractalPercolation(p=0.5, depth=2, levels=tuple(levels))
    assert crossing_exists(fp)


def test_crossing_corner_adjacency_counts():
    level = np.zeros((4, 4), dtype=bool)
    for i in range(4):
        level[i, i] = True  # diagonal chain touches only at corners
    fp = FractalPercolation(p=0.5, depth=1, levels=(np.ones((2, 2), dtype=bool),))
    # build a depth-2 tree with the diagonal at the bottom
    fp2 = FractalPercolation(p=0.5, depth=2, levels=(np.ones((2, 2), dtype=bool), level))
    assert crossing_exists(fp2)


def test_crossing_monotone_under_coupling():
    ps = [0.55, 0.7, 0.85, 0.95]
    for seed in range(30):
        fps = sample_fractal_coupled(ps, depth=6, seed=seed)
        flags = [crossing_exists(fp) for fp in fps]
        for a, b in zip(flags, flags[1:]):
            assert (not a) or b  # monotone in p


def test_coupled_masks_nested():
    fps = sample_fractal_coupled([0.4, 0.8], depth=5, seed=3)
    for lo_level, hi_level in zip(fps[0].levels, fps[1].levels):
        assert not np.any(lo_level & ~hi_level)


def test_bitmap_text_shape():
    fp = sample_fractal(0.7, 3, seed=2)
    text = bitmap_text(fp)
    lines = text.strip().split("\n")
    assert len(lines) == 8 and all(len(ln) == 8 for ln in lines)


def test_loop_to_square_examples():
    # diameter 0.3 -> n=1 (side 1); diameter 0.2 -> n=2 (side 0.5)
    pts = np.array([[0.35, 0.5], [0.65, 0.5], [0.5, 0.4]])
    assert l1_diameter(pts) == pytest.approx(0.3)
    sq = loop_to_square(pts)
    assert sq.n == 1 and sq.side == pytest.approx(1.0)
    pts2 = np.array([[0.4, 0.5], [0.6, 0.5]])
    sq2 = loop_to_square(pts2)
    assert sq2.n == 2 and sq2.side == pytest.approx(0.5)


def test_loop_to_square_rejects_bad_diameter():
    with pytest.raises(ValueError):
        loop_to_square(np.array([[0.5, 0.5], [0.5, 0.5]]))  # d = 0
    with pytest.raises(ValueError):
        loop_to_square(np.array([[1.5, 0.5], [0.2, 0.5]]))  # outside unit square


def test_loop_to_square_containment_on_random_soups():
    domain = LatticeDomain(64, 64, mesh=1 / 64)
    soup = sample_soup(domain, c=1.0, max_len=32, seed=21)
    checked = 0
    for loop in soup:
        pts = loop_unit_points(loop, domain)
        sq = loop_to_square(pts)
        assert np.all(sq.contains(pts[:, 0], pts[:, 1]))
        checked += 1
    assert checked > 50


def test_loop_to_square_scale_covariant():
    base = np.array([[0.4, 0.42], [0.52, 0.5], [0.44, 0.56]])
    sq = loop_to_square(base)
    halved = base / 2
    sq_half = loop_to_square(halved)
    assert sq_half.n == sq.n + 1
    assert sq_half.side == pytest.approx(sq.side / 2)


def test_dyadic_square_validation():
    with pytest.raises(ValueError):
        DyadicSquare(n=0, j=1, j2=0)  # side 2 from corner 1 leaves (0,2)^2
    DyadicSquare(n=1, j=2, j2=0)
