"""Rectangular lattice domains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LatticeDomain:
    """A W x H block of integer sites with a physical mesh size.

    Sites are the integer points (x, y) with offset_x <= x < offset_x + width
    and offset_y <= y < offset_y + height; ``mesh`` is the physical side of
    one lattice cell.
    """

    width: int
    height: int
    offset: tuple[int, int] = (0, 0)
    mesh: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"domain must be non-empty, got {self.width}x{self.height}")
        if not self.mesh > 0:
            raise ValueError(f"mesh must be positive, got {self.mesh}")

    @property
    def n_sites(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        ox, oy = self.offset
        return (ox + (self.width - 1) / 2.0, oy + (self.height - 1) / 2.0)

    def contains_points(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        ox, oy = self.offset
        return (x >= ox) & (x < ox + self.width) & (y >= oy) & (y < oy + self.height)

    def contains_domain(self, sub: "LatticeDomain") -> bool:
        ox, oy = self.offset
        sx, sy = sub.offset
        return (
            sx >= ox
            and sy >= oy
            and sx + sub.width <= ox + self.width
            and sy + sub.height <= oy + self.height
        )

    def site_indices(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Linear index (x-major) of sites given in absolute coordinates."""
        ox, oy = self.offset
        return (np.asarray(x) - ox) * self.height + (np.asarray(y) - oy)

    def site_coords(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ox, oy = self.offset
        idx = np.asarray(idx)
        return idx // self.height + ox, idx % self.height + oy

    def edge_distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Distance (in lattice units) from each site to the nearest frame edge."""
        ox, oy = self.offset
        return np.minimum.reduce(
            [
                np.asarray(x) - ox,
                np.asarray(y) - oy,
                ox + self.width - 1 - np.asarray(x),
                oy + self.height - 1 - np.asarray(y),
            ]
        )
