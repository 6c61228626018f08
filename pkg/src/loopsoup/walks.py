"""Closed nearest-neighbor walk counting and exact bridge sampling on Z^2.

The per-site intensity of rooted closed walks of length 2n is
``lambda_{2n} = q_{2n} / (2n)`` where ``q_{2n}`` is the probability that a
simple random walk returns to its start after 2n steps.  Every rooted closed
walk of length L then carries weight ``4**(-L) / L``, the standard rooted
random-walk loop measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

# Direction codes used throughout: 0=E, 1=N, 2=W, 3=S.
DIR_CHARS = "ENWS"
DX = np.array([1, 0, -1, 0], dtype=np.int64)
DY = np.array([0, 1, 0, -1], dtype=np.int64)

# Rational arithmetic is kept up to this step count; floats beyond.
_EXACT_MAX_STEPS = 16


def return_probability(n: int):
    """Probability that a simple random walk on Z^2 is at its start after n steps.

    Returns an exact Fraction for n <= 16 and a float beyond.  Odd n gives 0
    (parity).  Uses the diagonal decomposition: the two coordinates of the
    walk in the rotated frame (x+y, x-y) are independent simple +-1 walks, so
    q_{2n} = (C(2n, n) / 4^n)^2.
    """
    if n < 0:
        raise ValueError(f"step count must be >= 0, got {n}")
    if n % 2 == 1:
        return Fraction(0) if n <= _EXACT_MAX_STEPS else 0.0
    half = n // 2
    if n <= _EXACT_MAX_STEPS:
        return Fraction(math.comb(n, half), 2**n) ** 2
    # log-space to stay finite for large n
    log_q = 2.0 * (math.lgamma(n + 1) - 2.0 * math.lgamma(half + 1) - n * math.log(2.0))
    return math.exp(log_q)


def closed_walk_count(length: int) -> int:
    """Number of closed walks of the given (even) length from a fixed root."""
    if length % 2 != 0 or length < 0:
        raise ValueError(f"closed walks need even nonnegative length, got {length}")
    return math.comb(length, length // 2) ** 2


def walk_count(length: int, dx: int, dy: int) -> int:
    """Number of length-step walks with net displacement (dx, dy).

    Exact via the diagonal decomposition: with u = x+y and v = x-y the
    E/N/W/S steps become independent +-1 increments of u and v.
    """
    du, dv = dx + dy, dx - dy
    if (length + du) % 2 != 0 or abs(du) > length or abs(dv) > length:
        return 0
    return math.comb(length, (length + du) // 2) * math.comb(length, (length + dv) // 2)


@dataclass(frozen=True)
class LoopMassTable:
    """Per-site rooted loop intensities lambda_{2n} = q_{2n} / (2n) up to a cutoff.

    ``lengths[i]`` is the i-th even length, ``lam[i]`` the matching intensity
    as a float.  ``exact`` holds Fraction values for lengths <= 16.
    """

    max_len: int
    lengths: np.ndarray
    lam: np.ndarray
    exact: dict[int, Fraction]

    def __post_init__(self):
        if np.any(np.diff(self.lam) >= 0):
            raise AssertionError("rooted loop intensities must be strictly decreasing")

    @property
    def total_intensity(self) -> float:
        """Sum of lambda_{2n} over the table: expected rooted loops per site at c=1."""
        return float(self.lam.sum())


def build_mass_table(max_len: int) -> LoopMassTable:
    """Tabulate lambda_{2n} = q_{2n}/(2n) for every even 2n <= max_len."""
    if max_len < 2 or max_len % 2 != 0:
        raise ValueError(f"max_len must be a positive even integer, got {max_len}")
    from scipy.special import gammaln

    lengths = np.arange(2, max_len + 1, 2, dtype=np.int64)
    log_q = 2.0 * (
        gammaln(lengths + 1.0) - 2.0 * gammaln(lengths / 2.0 + 1.0) - lengths * math.log(2.0)
    )
    lam = np.exp(log_q) / lengths
    exact = {
        int(l): Fraction(return_probability(int(l))) / int(l)
        for l in lengths
        if l <= _EXACT_MAX_STEPS
    }
    return LoopMassTable(max_len=max_len, lengths=lengths, lam=lam, exact=exact)


_UV_TO_CODE = np.empty((2, 2), dtype=np.uint8)
_UV_TO_CODE[1, 1] = 0  # u+1, v+1 -> E
_UV_TO_CODE[1, 0] = 1  # u+1, v-1 -> N
_UV_TO_CODE[0, 0] = 2  # u-1, v-1 -> W
_UV_TO_CODE[0, 1] = 3  # u-1, v+1 -> S


def sample_bridge_steps(count: int, length: int, rng: np.random.Generator) -> np.ndarray:
    """Sample `count` uniform rooted closed walks of the given length.

    Returns an array of direction codes with shape (count, length).  In the
    rotated frame the u- and v-increments of a uniform closed walk are two
    independent uniform arrangements of length/2 ups and length/2 downs, so a
    row-wise shuffle of the +-1 multiset realizes the sequential
    displacement-count sampling rule exactly.
    """
    if length < 2 or length % 2 != 0:
        raise ValueError(f"bridge length must be even and >= 2, got {length}")
    if count <= 0:
        return np.empty((0, length), dtype=np.uint8)
    half = np.concatenate(
        [np.ones(length // 2, dtype=np.int8), np.zeros(length - length // 2, dtype=np.int8)]
    )
    u_up = rng.permuted(np.tile(half, (count, 1)), axis=1)
    v_up = rng.permuted(np.tile(half, (count, 1)), axis=1)
    return _UV_TO_CODE[u_up, v_up]


def steps_to_offsets(codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative (x, y) offsets visited by each walk, root excluded at the end.

    For codes of shape (count, length) returns two (count, length) arrays
    whose column j holds the offset after j+1 steps; the final column is
    (0, 0) for closed walks.
    """
    return np.cumsum(DX[codes], axis=1), np.cumsum(DY[codes], axis=1)
