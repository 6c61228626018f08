"""Mandelbrot fractal percolation and the loop-to-dyadic-square bridge."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .lattice import LatticeDomain
from .rngs import STREAM_FRACTAL, derive_rng
from .soup import Loop


@dataclass(frozen=True)
class FractalPercolation:
    """Retained-square quadtree: ``levels[k]`` is the (2^(k+1), 2^(k+1)) mask at depth k+1.

    A square is retained only if its own Bernoulli(p) came up 1 and all its
    ancestors are retained, so the masks are nested under coarsening.
    """

    p: float
    depth: int
    levels: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.levels) != self.depth:
            raise AssertionError("level count must equal depth")
        for k in range(1, self.depth):
            parent = np.repeat(np.repeat(self.levels[k - 1], 2, axis=0), 2, axis=1)
            if np.any(self.levels[k] & ~parent):
                raise AssertionError("retained square with pruned ancestor")

    @property
    def final_mask(self) -> np.ndarray:
        return self.levels[-1]

    def retained_count(self, level: int) -> int:
        return int(self.levels[level - 1].sum())


def sample_fractal(p: float, depth: int, seed: int) -> FractalPercolation:
    """Independent Bernoulli(p) per dyadic square, pruned below non-retained squares."""
    return sample_fractal_coupled([p], depth, seed)[0]


def sample_fractal_coupled(ps: list[float], depth: int, seed: int) -> list[FractalPercolation]:
    """Samples for several retention values driven by one shared uniform field.

    Retention is u <= p per square, so the retained sets are monotone in p,
    square by square.
    """
    for p in ps:
        if not 0 <= p <= 1:
            raise ValueError(f"retention must lie in [0, 1], got {p}")
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if depth > 13:
        raise ValueError("depths beyond 13 need more memory than a desk run should")
    rng = derive_rng(seed, STREAM_FRACTAL)
    uniforms = [rng.random((2**k, 2**k)) for k in range(1, depth + 1)]
    out = []
    for p in ps:
        levels = []
        mask = uniforms[0] <= p
        levels.append(mask)
        for k in range(1, depth):
            parent = np.repeat(np.repeat(levels[-1], 2, axis=0), 2, axis=1)
            levels.append(parent & (uniforms[k] <= p))
        out.append(FractalPercolation(p=p, depth=depth, levels=tuple(levels)))
    return out


def extinction_oracle(p: float) -> float:
    """Probability that the retained-square tree dies out, i.e. the limit set is empty.

    The generation sizes form a branching process with Binomial(4, p)
    offspring, so the answer is the smallest fixed point of
    f(q) = (1 - p + pq)^4 in [0, 1].  For 4p <= 1 the mean offspring count is
    at most one and the smallest fixed point is exactly 1 (the critical
    iteration converges too slowly to resolve that, so the exact value is
    returned directly); beyond that the iteration from 0 converges
    geometrically and is run to tolerance 1e-12.
    """
    if not 0 <= p <= 1:
        raise ValueError(f"retention must lie in [0, 1], got {p}")
    if 4 * p <= 1:
        return 1.0
    q = 0.0
    for _ in range(1_000_000):
        nxt = (1 - p + p * q) ** 4
        if abs(nxt - q) < 1e-12:
            return nxt
        q = nxt
    return q


def survival_frequency(p: float, depth: int, samples: int, seed: int) -> float:
    """Monte Carlo frequency of a non-empty retained set at the given depth.

    Simulates the retained-count branching process directly, one
    Binomial(4 * Z, p) draw per level, which has exactly the law of the
    quadtree's per-level counts.
    """
    if not 0 <= p <= 1:
        raise ValueError(f"retention must lie in [0, 1], got {p}")
    rng = derive_rng(seed, STREAM_FRACTAL, 1)
    z = np.ones(samples, dtype=np.int64)
    for _ in range(depth):
        z = rng.binomial(4 * z, p)
    return float((z > 0).mean())


def crossing_exists(fp: FractalPercolation) -> bool:
    """Whether the retained depth-d closed squares chain from left to right.

    Adjacency includes shared corners, matching the closed-square union.
    """
    grid = fp.final_mask
    if not grid.any():
        return False
    labels, _ = ndimage.label(grid, structure=np.ones((3, 3), dtype=np.int8))
    left = np.unique(labels[0, :])
    right = np.unique(labels[-1, :])
    return bool(np.intersect1d(left[left > 0], right[right > 0]).size > 0)


def bitmap_text(fp: FractalPercolation) -> str:
    """Depth-d retained mask as row-major '0'/'1' lines."""
    grid = fp.final_mask
    return "\n".join("".join("1" if v else "0" for v in row) for row in grid) + "\n"


@dataclass(frozen=True)
class DyadicSquare:
    """Closed square of side 2 * 2^-n with bottom-left corner (j, j2) * 2^-n."""

    n: int
    j: int
    j2: int

    def __post_init__(self):
        if self.n < 0 or self.j < 0 or self.j2 < 0:
            raise ValueError("dyadic square indices must be nonnegative")
        if (self.j + 2) > 2 ** (self.n + 1) or (self.j2 + 2) > 2 ** (self.n + 1):
            raise ValueError("dyadic square must fit in (0, 2)^2")

    @property
    def side(self) -> float:
        return 2.0 * 2.0**-self.n

    @property
    def corner(self) -> tuple[float, float]:
        return (self.j * 2.0**-self.n, self.j2 * 2.0**-self.n)

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        cx, cy = self.corner
        s = self.side
        return (x >= cx) & (x <= cx + s) & (y >= cy) & (y <= cy + s)


def l1_diameter(points: np.ndarray) -> float:
    """Maximal variation of the x- or of the y-coordinate."""
    pts = np.asarray(points, dtype=float)
    return float(max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1])))


def loop_to_square(points: np.ndarray) -> DyadicSquare:
    """Deterministic covering square for a loop given in unit-square coordinates.

    The scale n is the unique integer with diameter in [2^-n-1, 2^-n); the
    square of side 2 * 2^-n is anchored at the floors of the loop's minimal
    coordinates in units of 2^-n.  Scale- and translation-covariant by
    construction, and the loop is always contained in the result.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
        raise ValueError("points must be a non-empty (N, 2) array")
    if np.any(pts <= 0) or np.any(pts >= 1):
        raise ValueError("loop must lie strictly inside the unit square")
    d = l1_diameter(pts)
    if not 0 < d < 1:
        raise ValueError(f"L1 diameter must lie in (0, 1), got {d}")
    _, e = math.frexp(d)
    n = -e
    scale = 2**n
    j = int(math.floor(pts[:, 0].min() * scale))
    j2 = int(math.floor(pts[:, 1].min() * scale))
    square = DyadicSquare(n=n, j=j, j2=j2)
    if not bool(np.all(square.contains(pts[:, 0], pts[:, 1]))):
        raise AssertionError("covering square does not contain the loop")
    return square


def loop_unit_points(loop: Loop, domain: LatticeDomain) -> np.ndarray:
    """Loop sites mapped to cell centers in physical coordinates (mesh units)."""
    ox, oy = domain.offset
    pts = loop.sites().astype(float)
    pts[:, 0] = (pts[:, 0] - ox + 0.5) * domain.mesh
    pts[:, 1] = (pts[:, 1] - oy + 0.5) * domain.mesh
    return pts
