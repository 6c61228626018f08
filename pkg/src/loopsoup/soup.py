"""Random-walk loop soup sampling with exact restriction and superposition.

A soup at intensity c places, independently for every site x and even length
2n <= max_len, Poisson(c * lambda_{2n}) uniformly random rooted closed walks
at x, and keeps exactly those whose every visited site lies in the domain.
Restriction to a subdomain is implemented by the same discard rule, which
reproduces the restriction property of the loop measure exactly at the
discrete level.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .lattice import LatticeDomain
from .rngs import STREAM_SOUP, derive_rng
from .walks import DIR_CHARS, DX, DY, LoopMassTable, build_mass_table, sample_bridge_steps, steps_to_offsets

_CHAR_TO_CODE = {c: i for i, c in enumerate(DIR_CHARS)}


@dataclass(frozen=True)
class Loop:
    """A rooted closed nearest-neighbor walk: root site plus direction string."""

    root: tuple[int, int]
    steps: str

    def __post_init__(self):
        if len(self.steps) < 2 or len(self.steps) % 2 != 0:
            raise ValueError(f"loop length must be even and >= 2, got {len(self.steps)}")
        codes = self.codes()
        if DX[codes].sum() != 0 or DY[codes].sum() != 0:
            raise ValueError("loop steps must return to the root")

    @property
    def length(self) -> int:
        return len(self.steps)

    def codes(self) -> np.ndarray:
        return np.array([_CHAR_TO_CODE[ch] for ch in self.steps], dtype=np.uint8)

    def sites(self) -> np.ndarray:
        """All visited positions (length, 2), starting at the root; may repeat."""
        codes = self.codes()
        x = np.concatenate([[self.root[0]], self.root[0] + np.cumsum(DX[codes])[:-1]])
        y = np.concatenate([[self.root[1]], self.root[1] + np.cumsum(DY[codes])[:-1]])
        return np.stack([x, y], axis=1)

    def site_set(self) -> set[tuple[int, int]]:
        return {(int(x), int(y)) for x, y in self.sites()}


@dataclass(frozen=True)
class LoopSoup:
    """A sampled Poisson collection of loops, stored columnar.

    ``roots`` is (N, 2), ``lengths`` (N,), ``codes`` the concatenated step
    codes with ``offsets`` delimiting each loop's slice.  ``arrivals`` is
    present for layered (monotone-coupled) soups and is sorted ascending.
    """

    domain: LatticeDomain
    intensity_c: float
    max_len: int
    seed: int
    roots: np.ndarray
    lengths: np.ndarray
    codes: np.ndarray
    offsets: np.ndarray
    arrivals: np.ndarray | None = None

    def __post_init__(self):
        if len(self.lengths) and int(self.lengths.max()) > self.max_len:
            raise AssertionError("loop longer than max_len in soup")

    def __len__(self) -> int:
        return len(self.lengths)

    def loop(self, i: int) -> Loop:
        codes = self.codes[self.offsets[i] : self.offsets[i + 1]]
        return Loop(
            root=(int(self.roots[i, 0]), int(self.roots[i, 1])),
            steps="".join(DIR_CHARS[c] for c in codes),
        )

    def __iter__(self) -> Iterator[Loop]:
        return (self.loop(i) for i in range(len(self)))

    @property
    def loops(self) -> list[Loop]:
        return list(self)

    def at_intensity(self, c: float) -> "LoopSoup":
        """Prefix of a layered soup: exactly the loops with arrival time <= c."""
        if self.arrivals is None:
            raise ValueError("at_intensity requires a layered soup (use sample_layered_soup)")
        if not 0 <= c <= self.intensity_c:
            raise ValueError(f"c must lie in [0, {self.intensity_c}], got {c}")
        k = int(np.searchsorted(self.arrivals, c, side="right"))
        return LoopSoup(
            domain=self.domain,
            intensity_c=c,
            max_len=self.max_len,
            seed=self.seed,
            roots=self.roots[:k],
            lengths=self.lengths[:k],
            codes=self.codes[: self.offsets[k]],
            offsets=self.offsets[: k + 1],
            arrivals=self.arrivals[:k],
        )

    def visited_sites(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(loop_ids, x, y) for every visited position of every loop."""
        n = len(self)
        if n == 0:
            z = np.empty(0, dtype=np.int64)
            return z, z.copy(), z.copy()
        loop_ids = np.repeat(np.arange(n, dtype=np.int64), self.lengths)
        dx = DX[self.codes]
        dy = DY[self.codes]
        # per-loop prefix sums with the root in front and the closing step dropped
        starts = self.offsets[:-1]
        csx = np.cumsum(dx)
        csy = np.cumsum(dy)
        base_x = np.repeat(csx[starts] - dx[starts], self.lengths)
        base_y = np.repeat(csy[starts] - dy[starts], self.lengths)
        # shift within each segment: position j is the offset after j steps (j=0 -> root)
        shifted_x = np.empty_like(csx)
        shifted_y = np.empty_like(csy)
        shifted_x[1:] = csx[:-1]
        shifted_y[1:] = csy[:-1]
        shifted_x[0] = 0
        shifted_y[0] = 0
        # the first row of each segment must be the plain root
        shifted_x[starts] = csx[starts] - dx[starts]
        shifted_y[starts] = csy[starts] - dy[starts]
        x = np.repeat(self.roots[:, 0], self.lengths) + shifted_x - base_x
        y = np.repeat(self.roots[:, 1], self.lengths) + shifted_y - base_y
        return loop_ids, x, y


@functools.lru_cache(maxsize=64)
def _mass_table(max_len: int) -> LoopMassTable:
    return build_mass_table(max_len)


def _sample_arrays(domain: LatticeDomain, c: float, max_len: int, rng: np.random.Generator):
    """Draw kept loops.  Returns (roots, lengths, codes, offsets).

    Equivalent to independent Poisson(c * lambda_l) counts per (site, length):
    a single Poisson total is split over lengths by inverse-CDF sampling and
    over sites uniformly, so only lengths actually drawn cost a batch.
    """
    table = _mass_table(max_len)
    n_sites = domain.n_sites
    ox, oy = domain.offset
    total_rate = c * table.total_intensity * n_sites
    n_total = int(rng.poisson(total_rate)) if total_rate > 0 else 0
    roots_parts, len_parts, code_parts = [], [], []
    if n_total:
        cdf = np.cumsum(table.lam)
        cdf /= cdf[-1]
        drawn = table.lengths[np.searchsorted(cdf, rng.random(n_total), side="right")]
        drawn.sort()
        for length, count in zip(*np.unique(drawn, return_counts=True)):
            idx = rng.integers(0, n_sites, size=count)
            rx, ry = domain.site_coords(idx)
            codes = sample_bridge_steps(int(count), int(length), rng)
            offx, offy = steps_to_offsets(codes)
            assert not offx[:, -1].any() and not offy[:, -1].any(), "bridge does not close"
            keep = (
                (rx + offx.min(axis=1) >= ox)
                & (rx + offx.max(axis=1) < ox + domain.width)
                & (ry + offy.min(axis=1) >= oy)
                & (ry + offy.max(axis=1) < oy + domain.height)
            )
            if not keep.any():
                continue
            roots_parts.append(np.stack([rx[keep], ry[keep]], axis=1))
            code_parts.append(codes[keep].reshape(-1))
            len_parts.append(np.full(int(keep.sum()), length, dtype=np.int64))
    if roots_parts:
        roots = np.concatenate(roots_parts)
        lengths = np.concatenate(len_parts)
        codes = np.concatenate(code_parts)
    else:
        roots = np.empty((0, 2), dtype=np.int64)
        lengths = np.empty(0, dtype=np.int64)
        codes = np.empty(0, dtype=np.uint8)
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    return roots, lengths, codes, offsets


def sample_soup(domain: LatticeDomain, c: float, max_len: int, seed: int) -> LoopSoup:
    """Sample the loop soup at intensity c, restricted to the domain by discarding."""
    if c < 0:
        raise ValueError(f"intensity must be >= 0, got {c}")
    rng = derive_rng(seed, STREAM_SOUP)
    roots, lengths, codes, offsets = _sample_arrays(domain, c, max_len, rng)
    return LoopSoup(
        domain=domain,
        intensity_c=c,
        max_len=max_len,
        seed=seed,
        roots=roots,
        lengths=lengths,
        codes=codes,
        offsets=offsets,
    )


def sample_layered_soup(domain: LatticeDomain, c_max: float, max_len: int, seed: int) -> LoopSoup:
    """Sample at intensity c_max with uniform arrival marks in [0, c_max].

    The loop set at intensity c <= c_max is the prefix with arrival <= c, so
    soups are monotone in c exactly, replicate by replicate.
    """
    if c_max <= 0:
        raise ValueError(f"layered sampling needs c_max > 0, got {c_max}")
    rng = derive_rng(seed, STREAM_SOUP)
    roots, lengths, codes, offsets = _sample_arrays(domain, c_max, max_len, rng)
    arrivals = rng.uniform(0.0, c_max, size=len(lengths))
    order = np.argsort(arrivals, kind="stable")
    old_starts = offsets[order]
    lengths = lengths[order]
    new_offsets = np.concatenate([[0], np.cumsum(lengths)])
    src = (
        np.repeat(old_starts - new_offsets[:-1], lengths)
        + np.arange(new_offsets[-1], dtype=np.int64)
    )
    new_codes = codes[src]
    return LoopSoup(
        domain=domain,
        intensity_c=c_max,
        max_len=max_len,
        seed=seed,
        roots=roots[order],
        lengths=lengths,
        codes=new_codes,
        offsets=new_offsets,
        arrivals=arrivals[order],
    )


def restrict(soup: LoopSoup, sub: LatticeDomain) -> LoopSoup:
    """Keep exactly the loops whose every visited site lies in ``sub``."""
    if not soup.domain.contains_domain(sub):
        raise ValueError("restriction target must be a subdomain of the soup's domain")
    loop_ids, x, y = soup.visited_sites()
    inside = sub.contains_points(x, y)
    keep_mask = np.ones(len(soup), dtype=bool)
    bad = np.unique(loop_ids[~inside])
    keep_mask[bad] = False
    return _subset(soup, keep_mask, domain=sub, intensity_c=soup.intensity_c)


def superpose(a: LoopSoup, b: LoopSoup) -> LoopSoup:
    """Concatenate two independent soups on the same domain; intensities add."""
    if a.domain != b.domain:
        raise ValueError("superpose requires identical domains")
    if a.max_len != b.max_len:
        raise ValueError("superpose requires identical max_len")
    return LoopSoup(
        domain=a.domain,
        intensity_c=a.intensity_c + b.intensity_c,
        max_len=a.max_len,
        seed=a.seed,
        roots=np.concatenate([a.roots, b.roots]),
        lengths=np.concatenate([a.lengths, b.lengths]),
        codes=np.concatenate([a.codes, b.codes]),
        offsets=np.concatenate([[0], np.cumsum(np.concatenate([a.lengths, b.lengths]))]),
        arrivals=None,
    )


def _subset(soup: LoopSoup, keep: np.ndarray, domain: LatticeDomain, intensity_c: float) -> LoopSoup:
    idx = np.flatnonzero(keep)
    lengths = soup.lengths[idx]
    codes = np.concatenate(
        [soup.codes[soup.offsets[i] : soup.offsets[i + 1]] for i in idx]
    ) if len(idx) else np.empty(0, dtype=np.uint8)
    return LoopSoup(
        domain=domain,
        intensity_c=intensity_c,
        max_len=soup.max_len,
        seed=soup.seed,
        roots=soup.roots[idx],
        lengths=lengths,
        codes=codes,
        offsets=np.concatenate([[0], np.cumsum(lengths)]),
        arrivals=soup.arrivals[idx] if soup.arrivals is not None else None,
    )


def soup_to_text(soup: LoopSoup) -> str:
    """Line-oriented serialization: header plus one `x y DIRS` line per loop.

    Coordinates are written relative to the domain offset; loading yields a
    domain anchored at (0, 0).
    """
    d = soup.domain
    lines = [
        f"#soup c={float(soup.intensity_c)!r} W={d.width} H={d.height} "
        f"mesh={float(d.mesh)!r} maxlen={soup.max_len} seed={soup.seed}"
    ]
    ox, oy = d.offset
    for i in range(len(soup)):
        codes = soup.codes[soup.offsets[i] : soup.offsets[i + 1]]
        dirs = "".join(DIR_CHARS[c] for c in codes)
        lines.append(f"{soup.roots[i, 0] - ox} {soup.roots[i, 1] - oy} {dirs}")
    return "\n".join(lines) + "\n"


def soup_from_text(text: str) -> LoopSoup:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#soup "):
        raise ValueError("missing #soup header")
    fields = dict(part.split("=", 1) for part in lines[0][len("#soup ") :].split())
    domain = LatticeDomain(
        width=int(fields["W"]), height=int(fields["H"]), mesh=float(fields["mesh"])
    )
    roots, lengths, code_parts = [], [], []
    for ln in lines[1:]:
        xs, ys, dirs = ln.split()
        roots.append((int(xs), int(ys)))
        lengths.append(len(dirs))
        code_parts.append(np.array([_CHAR_TO_CODE[ch] for ch in dirs], dtype=np.uint8))
    lengths_arr = np.array(lengths, dtype=np.int64)
    return LoopSoup(
        domain=domain,
        intensity_c=float(fields["c"]),
        max_len=int(fields["maxlen"]),
        seed=int(fields["seed"]),
        roots=np.array(roots, dtype=np.int64).reshape(-1, 2),
        lengths=lengths_arr,
        codes=np.concatenate(code_parts) if code_parts else np.empty(0, dtype=np.uint8),
        offsets=np.concatenate([[0], np.cumsum(lengths_arr)]),
    )


def sample_bridge(root: tuple[int, int], length: int, rng: np.random.Generator) -> Loop:
    """One uniformly distributed rooted closed walk of the given length."""
    codes = sample_bridge_steps(1, length, rng)[0]
    return Loop(root=root, steps="".join(DIR_CHARS[c] for c in codes))
