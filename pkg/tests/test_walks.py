"""Walk counting and bridge sampling against brute-force enumeration."""

from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from scipy import stats

from loopsoup.walks import (
    DIR_CHARS,
    DX,
    DY,
    build_mass_table,
    closed_walk_count,
    return_probability,
    sample_bridge_steps,
    walk_count,
)


def enumerate_return_fraction(n: int) -> Fraction:
    """Brute force: fraction of all 4^n walks that end at the origin."""
    hits = 0
    for codes in product(range(4), repeat=n):
        dx = sum(int(DX[c]) for c in codes)
        dy = sum(int(DY[c]) for c in codes)
        if dx == 0 and dy == 0:
            hits += 1
    return Fraction(hits, 4**n)


@pytest.mark.parametrize("n", [0, 1, 2, 3, 4, 6])
def test_return_probability_matches_enumeration(n):
    assert return_probability(n) == enumerate_return_fraction(n)


def test_return_probability_known_values():
    assert return_probability(2) == Fraction(1, 4)
    assert return_probability(4) == Fraction(9, 64)
    assert return_probability(6) == Fraction(25, 256)
    assert return_probability(3) == 0


def test_return_probability_float_tail_continuous():
    # float branch beyond 16 steps should continue the exact values smoothly
    exact = float(Fraction(return_probability(16)))
    assert isinstance(return_probability(18), float)
    assert 0 < return_probability(18) < exact


def test_walk_count_matches_enumeration():
    for length in (2, 3, 4, 5):
        from collections import Counter

        counter = Counter()
        for codes in product(range(4), repeat=length):
            dx = sum(int(DX[c]) for c in codes)
            dy = sum(int(DY[c]) for c in codes)
            counter[(dx, dy)] += 1
        for (dx, dy), cnt in counter.items():
            assert walk_count(length, dx, dy) == cnt
        # and zero where enumeration saw nothing
        assert walk_count(length, length + 1, 0) == 0


def test_closed_walk_count_values():
    assert closed_walk_count(2) == 4
    assert closed_walk_count(4) == 36


def test_mass_table_exact_values():
    table = build_mass_table(4)
    assert table.exact[2] == Fraction(1, 8)
    assert table.exact[4] == Fraction(9, 256)
    assert table.lam[0] == pytest.approx(1 / 8)


def test_mass_table_monotone_and_validation():
    table = build_mass_table(64)
    assert np.all(np.diff(table.lam) < 0)
    with pytest.raises(ValueError):
        build_mass_table(3)
    with pytest.raises(ValueError):
        build_mass_table(0)


def test_bridges_close_and_stay_even():
    rng = np.random.default_rng(7)
    for length in (2, 4, 10, 32):
        codes = sample_bridge_steps(200, length, rng)
        assert codes.shape == (200, length)
        assert np.all(DX[codes].sum(axis=1) == 0)
        assert np.all(DY[codes].sum(axis=1) == 0)


def test_length2_bridges_uniform_over_four():
    rng = np.random.default_rng(11)
    codes = sample_bridge_steps(20000, 2, rng)
    walks = ["".join(DIR_CHARS[c] for c in row) for row in codes]
    observed = {w: walks.count(w) for w in set(walks)}
    assert set(observed) == {"EW", "WE", "NS", "SN"}
    _, p = stats.chisquare(list(observed.values()))
    assert p > 0.01


def test_length4_bridges_uniform_over_36():
    rng = np.random.default_rng(13)
    codes = sample_bridge_steps(40000, 4, rng)
    closed = {
        "".join(DIR_CHARS[c] for c in codes_tuple)
        for codes_tuple in product(range(4), repeat=4)
        if sum(int(DX[c]) for c in codes_tuple) == 0
        and sum(int(DY[c]) for c in codes_tuple) == 0
    }
    assert len(closed) == 36
    walks = ["".join(DIR_CHARS[c] for c in row) for row in codes]
    counts = {w: 0 for w in closed}
    for w in walks:
        counts[w] += 1
    assert all(v > 0 for v in counts.values())
    _, p = stats.chisquare(list(counts.values()))
    assert p > 0.01
