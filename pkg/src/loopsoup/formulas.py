"""Closed forms tying soup intensity to the SLE parameter and fractal dimensions.

All functions are pure.  They accept floats or Fractions; with Fraction input
the endpoint values (c=0, c=1, kappa=4) come out exact because the
discriminant 25 + c^2 - 26c is a perfect square there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

KAPPA_MIN = Fraction(8, 3)
KAPPA_MAX = 4

# treat a barely-negative discriminant as the exact zero it is at c = 1
_DISC_CLAMP = 1e-15


@dataclass(frozen=True)
class Kappa:
    """SLE parameter restricted to (8/3, 4]."""

    value: float

    def __post_init__(self):
        if not KAPPA_MIN < self.value <= KAPPA_MAX:
            raise ValueError(f"kappa must lie in (8/3, 4], got {self.value}")


@dataclass(frozen=True)
class Intensity:
    """Soup intensity restricted to (0, 1], the range of the correspondence."""

    value: float

    def __post_init__(self):
        if not 0 < self.value <= 1:
            raise ValueError(f"intensity must lie in (0, 1], got {self.value}")


def _sqrt(x):
    """Square root that stays exact for perfect-square Fractions."""
    if isinstance(x, (Fraction, int)):
        frac = Fraction(x)
        num_root = math.isqrt(frac.numerator)
        den_root = math.isqrt(frac.denominator)
        if num_root * num_root == frac.numerator and den_root * den_root == frac.denominator:
            return Fraction(num_root, den_root)
        return math.sqrt(float(frac))
    return math.sqrt(x)


def _discriminant(c):
    disc = 25 + c * c - 26 * c
    if not isinstance(disc, Fraction) and -_DISC_CLAMP < disc < 0:
        disc = 0.0
    if disc < 0:
        raise ValueError(f"discriminant negative for c={c}")
    return disc


def c_of_kappa(kappa):
    """Intensity c = (3k - 8)(6 - k) / (2k), strictly increasing on (8/3, 4]."""
    if not KAPPA_MIN < kappa <= KAPPA_MAX:
        raise ValueError(f"kappa must lie in (8/3, 4], got {kappa}")
    return (3 * kappa - 8) * (6 - kappa) / (2 * kappa)


def kappa_of_c(c):
    """Unique kappa in (8/3, 4] with (3k - 8)(6 - k) = 2kc.

    Solves the quadratic 3k^2 - (26 - 2c)k + 48 = 0 and keeps the root in
    range: kappa = (13 - c - sqrt((1 - c)(25 - c))) / 3.
    """
    if not 0 < c <= 1:
        raise ValueError(f"c must lie in (0, 1], got {c}")
    return (13 - c - _sqrt(_discriminant(c))) / 3


def boundary_dimension(c):
    """Fractal dimension of a cluster's outer boundary at intensity c in [0, 1].

    Equals 1 + kappa(c)/8; extended to c = 0 by continuity, where it gives
    4/3, the dimension of the Brownian frontier.
    """
    if not 0 <= c <= 1:
        raise ValueError(f"c must lie in [0, 1], got {c}")
    return (37 - c - _sqrt(_discriminant(c))) / 24


def carpet_dimension(c):
    """Dimension of the set surrounded by no loop: (187 - 7c + sqrt(...)) / 96."""
    if not 0 <= c <= 1:
        raise ValueError(f"c must lie in [0, 1], got {c}")
    return (187 - 7 * c + _sqrt(_discriminant(c))) / 96


def formula_table(cs) -> list[dict]:
    """Rows of (c, kappa, boundary_dim, carpet_dim) for a grid of intensities."""
    rows = []
    for c in cs:
        rows.append(
            {
                "c": float(c),
                "kappa": float(kappa_of_c(c)) if 0 < c <= 1 else float("nan"),
                "boundary_dim": float(boundary_dimension(c)),
                "carpet_dim": float(carpet_dimension(c)),
            }
        )
    return rows
