"""Monte Carlo generalized half-plane capacity and the hyperbolic square tiling.

The capacity M_alpha(A) of a bounded closed set A in the upper half-plane is
estimated by launching Brownian walks from radius r0 with entry-angle density
sin(theta)/2, absorbing them on A or on the real axis, and averaging
(Im B at absorption)^alpha.  The overall normalization is a single constant
per (r0, step) pair, calibrated once against the analytic value for a unit
vertical slit and then frozen for every hull and every alpha.

Walk discretization: isotropic Gaussian steps of the configured standard
deviation with exact segment/box crossing detection while within a few steps
of the absorbing geometry.  Far from it, the walk advances by uniform
circle-exit jumps (exact in law by the strong Markov property and isotropy
of Brownian motion), which keeps expected path lengths finite; a pure
fixed-step walk has a heavy-tailed step count.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .rngs import STREAM_CAPACITY, derive_rng

# calibration: walks are normalized so m_alpha(unit slit, alpha=1) matches this
UNIT_SLIT_CAPACITY = 0.25
_CALIBRATION_SEED = 0x5EED_CA1
_CALIBRATION_WALKS = 400_000


def slit_capacity(height: float) -> float:
    """Capacity of a vertical slit [0, i*height] in this package's normalization."""
    return height * height / 4.0


@dataclass(frozen=True)
class Segment:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if min(self.y0, self.y1) < 0:
            raise ValueError("hull primitives must stay in the closed upper half-plane")

    @property
    def radius(self) -> float:
        return max(math.hypot(self.x0, self.y0), math.hypot(self.x1, self.y1))

    @property
    def max_height(self) -> float:
        return max(self.y0, self.y1)

    @property
    def min_height(self) -> float:
        return min(self.y0, self.y1)


@dataclass(frozen=True)
class Box:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError("box corners must be ordered")
        if self.y0 < 0:
            raise ValueError("hull primitives must stay in the closed upper half-plane")

    @property
    def radius(self) -> float:
        return max(
            math.hypot(x, y) for x in (self.x0, self.x1) for y in (self.y0, self.y1)
        )

    @property
    def max_height(self) -> float:
        return self.y1

    @property
    def min_height(self) -> float:
        return self.y0


Primitive = Segment | Box


@dataclass(frozen=True)
class Hull:
    """Finite union of closed segments and axis-aligned boxes in the upper half-plane."""

    primitives: tuple[Primitive, ...]

    @property
    def empty(self) -> bool:
        return len(self.primitives) == 0

    @property
    def radius(self) -> float:
        return max((p.radius for p in self.primitives), default=0.0)

    @property
    def max_height(self) -> float:
        return max((p.max_height for p in self.primitives), default=0.0)

    @property
    def min_height(self) -> float:
        return min((p.min_height for p in self.primitives), default=0.0)

    def touches_axis(self, tol: float = 1e-12) -> bool:
        return any(p.min_height <= tol for p in self.primitives)

    def scaled(self, a: float) -> "Hull":
        out = []
        for p in self.primitives:
            if isinstance(p, Segment):
                out.append(Segment(a * p.x0, a * p.y0, a * p.x1, a * p.y1))
            else:
                out.append(Box(a * p.x0, a * p.y0, a * p.x1, a * p.y1))
        return Hull(tuple(out))


def slit(x: float, height: float) -> Hull:
    return Hull((Segment(x, 0.0, x, height),))


def hull_from_text(text: str) -> Hull:
    """Parse the mini-format: lines `seg x0 y0 x1 y1` or `box x0 y0 x1 y1`."""
    prims: list[Primitive] = []
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        parts = ln.split()
        if len(parts) != 5 or parts[0] not in ("seg", "box"):
            raise ValueError(f"bad hull line: {ln!r}")
        vals = [float(v) for v in parts[1:]]
        if parts[0] == "seg":
            prims.append(Segment(*vals))
        else:
            x0, y0, x1, y1 = vals
            prims.append(Box(min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1)))
    return Hull(tuple(prims))


def hull_to_text(hull: Hull) -> str:
    lines = []
    for p in hull.primitives:
        kind = "seg" if isinstance(p, Segment) else "box"
        lines.append(f"{kind} {p.x0!r} {p.y0!r} {p.x1!r} {p.y1!r}")
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class HyperbolicSquare:
    """Tile [a*2^j, (a+1)*2^j] x [2^j, 2^(j+1)] of the hyperbolic square tiling."""

    a: int
    j: int

    @property
    def side(self) -> float:
        return 2.0**self.j

    @property
    def x_range(self) -> tuple[float, float]:
        return (self.a * self.side, (self.a + 1) * self.side)

    @property
    def y_range(self) -> tuple[float, float]:
        return (self.side, 2 * self.side)

    def as_box(self) -> Box:
        return Box(self.a * self.side, self.side, (self.a + 1) * self.side, 2 * self.side)

    def pedestal(self) -> Box:
        """R(S): the square together with everything below it, down to the axis."""
        return Box(self.a * self.side, 0.0, (self.a + 1) * self.side, 2 * self.side)


def _primitive_x_extent_in_band(p: Primitive, y_lo: float, y_hi: float) -> tuple[float, float] | None:
    """X-extent of a primitive within the height band [y_lo, y_hi), or None.

    Height bands are half-open upward so each point belongs to exactly one
    level; along x the square of a point is floor(x / side), so grid-line
    points belong to the square on their right.
    """
    if isinstance(p, Box):
        if p.y1 < y_lo or p.y0 >= y_hi:
            return None
        return (p.x0, p.x1)
    ys = sorted((p.y0, p.y1))
    if ys[1] < y_lo or ys[0] >= y_hi:
        return None
    if p.y0 == p.y1:
        return (min(p.x0, p.x1), max(p.x0, p.x1))
    ts = []
    for y_edge in (max(y_lo, ys[0]), min(y_hi, ys[1])):
        t = (y_edge - p.y0) / (p.y1 - p.y0)
        ts.append(min(1.0, max(0.0, t)))
    t0, t1 = min(ts), max(ts)
    xs = (p.x0 + t0 * (p.x1 - p.x0), p.x0 + t1 * (p.x1 - p.x0))
    return (min(xs), max(xs))


@dataclass(frozen=True)
class Tiling:
    squares: tuple[HyperbolicSquare, ...]
    truncated: bool  # True when the hull touches the axis and levels below j_min were dropped
    j_min: int

    def hat_hull(self) -> Hull:
        return Hull(tuple(s.as_box() for s in self.squares))


def tiling_of(hull: Hull, j_min: int = -12) -> Tiling:
    """All hyperbolic squares whose level band contains part of the hull.

    For hulls touching the real axis the level enumeration would be infinite;
    it is floored at ``j_min`` and the truncation is flagged.
    """
    if hull.empty:
        raise ValueError("tiling needs a non-empty hull")
    top = hull.max_height
    if top <= 0:
        raise ValueError("hull must reach positive height")
    j_max = math.floor(math.log2(top))
    bottom = hull.min_height
    touches = hull.touches_axis()
    j_lo = j_min if touches else max(math.floor(math.log2(bottom)), j_min)
    squares = []
    for j in range(j_lo, j_max + 1):
        side = 2.0**j
        seen = set()
        for p in hull.primitives:
            ext = _primitive_x_extent_in_band(p, side, 2 * side)
            if ext is None:
                continue
            a_lo = math.floor(ext[0] / side)
            a_hi = math.floor(ext[1] / side)
            seen.update(range(a_lo, a_hi + 1))
        for a in sorted(seen):
            squares.append(HyperbolicSquare(a=a, j=j))
    return Tiling(squares=tuple(squares), truncated=touches, j_min=j_min)


@dataclass(frozen=True)
class WalkParams:
    """Monte Carlo walk ensemble parameters."""

    walks: int = 200_000
    step: float = 0.02
    r0: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.walks < 0 or self.step <= 0 or self.r0 <= 0:
            raise ValueError("walks must be >= 0, step and r0 positive")


@dataclass(frozen=True)
class CapacityEstimate:
    estimate: float
    stderr: float
    walks: int
    step: float
    r0: float


class _TargetGeometry:
    """Primitive arrays of one absorbing hull, plus a bounding circle."""

    def __init__(self, hull: Hull):
        segs = [p for p in hull.primitives if isinstance(p, Segment)]
        boxes = [p for p in hull.primitives if isinstance(p, Box)]
        self.segs = np.array([[s.x0, s.y0, s.x1, s.y1] for s in segs], dtype=float).reshape(-1, 4)
        self.boxes = np.array([[b.x0, b.y0, b.x1, b.y1] for b in boxes], dtype=float).reshape(-1, 4)
        pts = []
        for s in segs:
            pts += [(s.x0, s.y0), (s.x1, s.y1)]
        for b in boxes:
            pts += [(b.x0, b.y0), (b.x1, b.y1), (b.x0, b.y1), (b.x1, b.y0)]
        arr = np.array(pts, dtype=float).reshape(-1, 2)
        self.center = arr.mean(axis=0)
        self.bound_radius = float(np.max(np.hypot(arr[:, 0] - self.center[0], arr[:, 1] - self.center[1])))

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        d = np.full(len(x), np.inf)
        if len(self.segs):
            sx0, sy0, sx1, sy1 = (self.segs[:, k] for k in range(4))
            dx = sx1 - sx0
            dy = sy1 - sy0
            den = dx * dx + dy * dy
            px = x[:, None] - sx0[None, :]
            py = y[:, None] - sy0[None, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.clip(np.where(den > 0, (px * dx + py * dy) / den, 0.0), 0.0, 1.0)
            d = np.minimum(d, np.min(np.hypot(px - t * dx, py - t * dy), axis=1))
        if len(self.boxes):
            bx0, by0, bx1, by1 = (self.boxes[:, k] for k in range(4))
            ddx = np.maximum(np.maximum(bx0[None, :] - x[:, None], x[:, None] - bx1[None, :]), 0.0)
            ddy = np.maximum(np.maximum(by0[None, :] - y[:, None], y[:, None] - by1[None, :]), 0.0)
            d = np.minimum(d, np.min(np.hypot(ddx, ddy), axis=1))
        return d

    def chord_crossing(self, px, py, qx, qy) -> tuple[np.ndarray, np.ndarray]:
        """Earliest crossing parameter t in [0, 1] of chords p->q, and Im there.

        Returns (t, y_at); t = inf where the chord misses every primitive.
        """
        n = len(px)
        best_t = np.full(n, np.inf)
        rx = qx - px
        ry = qy - py
        if len(self.segs):
            sx0, sy0, sx1, sy1 = (self.segs[:, k] for k in range(4))
            ex = (sx1 - sx0)[None, :]
            ey = (sy1 - sy0)[None, :]
            wx = sx0[None, :] - px[:, None]
            wy = sy0[None, :] - py[:, None]
            denom = rx[:, None] * ey - ry[:, None] * ex
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (wx * ey - wy * ex) / denom
                u = (wx * ry[:, None] - wy * rx[:, None]) / denom
            ok = (denom != 0) & (t >= 0.0) & (t <= 1.0) & (u >= 0.0) & (u <= 1.0)
            t = np.where(ok, t, np.inf)
            best_t = np.minimum(best_t, t.min(axis=1))
        if len(self.boxes):
            bx0, by0, bx1, by1 = (self.boxes[:, k] for k in range(4))
            with np.errstate(divide="ignore", invalid="ignore"):
                tx0 = (bx0[None, :] - px[:, None]) / rx[:, None]
                tx1 = (bx1[None, :] - px[:, None]) / rx[:, None]
                ty0 = (by0[None, :] - py[:, None]) / ry[:, None]
                ty1 = (by1[None, :] - py[:, None]) / ry[:, None]
            # rx == 0: slab test degenerates to inside-or-miss
            inside_x = (px[:, None] >= bx0[None, :]) & (px[:, None] <= bx1[None, :])
            inside_y = (py[:, None] >= by0[None, :]) & (py[:, None] <= by1[None, :])
            lo_x = np.where(rx[:, None] != 0, np.minimum(tx0, tx1), np.where(inside_x, -np.inf, np.inf))
            hi_x = np.where(rx[:, None] != 0, np.maximum(tx0, tx1), np.where(inside_x, np.inf, -np.inf))
            lo_y = np.where(ry[:, None] != 0, np.minimum(ty0, ty1), np.where(inside_y, -np.inf, np.inf))
            hi_y = np.where(ry[:, None] != 0, np.maximum(ty0, ty1), np.where(inside_y, np.inf, -np.inf))
            t_enter = np.maximum(lo_x, lo_y)
            t_exit = np.minimum(hi_x, hi_y)
            ok = (t_enter <= t_exit) & (t_exit >= 0.0) & (t_enter <= 1.0)
            t = np.where(ok, np.clip(t_enter, 0.0, 1.0), np.inf)
            best_t = np.minimum(best_t, t.min(axis=1))
        y_at = np.where(np.isfinite(best_t), py + best_t * ry, np.nan)
        return best_t, y_at


@dataclass
class HitRecord:
    """First-hit data of one common-walk ensemble against several targets.

    ``heights[w, t]`` is Im at the walk's first hit of target t's set
    (0 when the real axis came first); ``order`` is a lexicographic key
    (step index, within-step parameter) that makes earliest-hit comparisons
    across targets exact, so unions can be evaluated pathwise.
    """

    heights: np.ndarray
    order_step: np.ndarray
    order_t: np.ndarray
    params: WalkParams

    def union_heights(self, target_ids: list[int]) -> np.ndarray:
        ids = np.asarray(target_ids)
        # within-step parameter lies in [0, 1], so step*4 + t orders hits
        # lexicographically as a single float key
        key = self.order_step[:, ids].astype(np.float64) * 4.0 + self.order_t[:, ids]
        best = np.argmin(key, axis=1)
        rows = np.arange(len(self.heights))
        return self.heights[rows, ids[best]]


def first_hit_heights(targets: list[Hull], params: WalkParams) -> HitRecord:
    """Run one common ensemble of walks against all targets at once.

    Every target sees the same Brownian path; a walk ends when all targets
    are resolved (each by hitting its set or the real axis first).
    """
    n_targets = len(targets)
    for h in targets:
        if h.empty:
            raise ValueError("targets must be non-empty hulls")
        if h.radius >= params.r0:
            raise ValueError(f"start radius {params.r0} must exceed hull radius {h.radius}")
    geoms = [_TargetGeometry(h) for h in targets]
    n = params.walks
    rng = derive_rng(params.seed, STREAM_CAPACITY)
    theta = np.arccos(1.0 - 2.0 * rng.random(n))
    px = params.r0 * np.cos(theta)
    py = params.r0 * np.sin(theta)
    widx = np.arange(n)
    act = np.ones((n, n_targets), dtype=bool)
    heights = np.zeros((n, n_targets))
    order_step = np.full((n, n_targets), np.iinfo(np.int32).max, dtype=np.int32)
    order_t = np.full((n, n_targets), np.inf, dtype=np.float32)
    band = 4.0 * params.step
    sigma = params.step
    max_iter = 2_000_000
    for it in range(max_iter):
        if len(px) == 0:
            break
        # lower bound of distance to the active absorbing geometry
        rough = py.copy()
        for t_id, g in enumerate(geoms):
            lb = np.hypot(px - g.center[0], py - g.center[1]) - g.bound_radius
            rough = np.minimum(rough, np.where(act[:, t_id], lb, np.inf))
        near = rough <= band
        if np.any(~near):
            idx = np.flatnonzero(~near)
            rad = 0.95 * rough[idx]
            ang = rng.random(len(idx)) * (2 * np.pi)
            px[idx] += rad * np.cos(ang)
            py[idx] += rad * np.sin(ang)
        if np.any(near):
            idx = np.flatnonzero(near)
            nx, ny = px[idx], py[idx]
            d_exact = ny.copy()
            for t_id, g in enumerate(geoms):
                dt = g.distance(nx, ny)
                d_exact = np.minimum(d_exact, np.where(act[idx, t_id], dt, np.inf))
            sphere = d_exact > band
            if np.any(sphere):
                sidx = idx[sphere]
                rad = 0.95 * d_exact[sphere]
                ang = rng.random(len(sidx)) * (2 * np.pi)
                px[sidx] += rad * np.cos(ang)
                py[sidx] += rad * np.sin(ang)
            gmask = ~sphere
            if np.any(gmask):
                gidx = idx[gmask]
                gx, gy = px[gidx], py[gidx]
                qx = gx + sigma * rng.standard_normal(len(gidx))
                qy = gy + sigma * rng.standard_normal(len(gidx))
                with np.errstate(divide="ignore", invalid="ignore"):
                    t_real = np.where(qy <= 0, gy / (gy - qy), np.inf)
                for t_id, g in enumerate(geoms):
                    live = act[gidx, t_id]
                    if not np.any(live):
                        continue
                    t_cross, y_at = g.chord_crossing(gx, gy, qx, qy)
                    hit = live & (t_cross <= t_real) & np.isfinite(t_cross)
                    if np.any(hit):
                        rows = widx[gidx[hit]]
                        heights[rows, t_id] = np.maximum(y_at[hit], 0.0)
                        order_step[rows, t_id] = it
                        order_t[rows, t_id] = t_cross[hit]
                        act[gidx[hit], t_id] = False
                died = np.isfinite(t_real)
                if np.any(died):
                    didx = gidx[died]
                    for t_id in range(n_targets):
                        rem = act[didx, t_id]
                        if np.any(rem):
                            rows = widx[didx[rem]]
                            heights[rows, t_id] = 0.0
                            order_step[rows, t_id] = it
                            order_t[rows, t_id] = t_real[died][rem].astype(np.float32)
                            act[didx[rem], t_id] = False
                px[gidx] = qx
                py[gidx] = qy
        alive = act.any(axis=1)
        if not np.all(alive):
            px, py, widx, act = px[alive], py[alive], widx[alive], act[alive]
    else:
        raise AssertionError("walk ensemble failed to terminate")
    return HitRecord(heights=heights, order_step=order_step, order_t=order_t, params=params)


@functools.lru_cache(maxsize=16)
def calibration_constant(r0: float, step: float) -> float:
    """Normalization fixed once per (r0, step) against the unit-slit value."""
    params = WalkParams(walks=_CALIBRATION_WALKS, step=step, r0=r0, seed=_CALIBRATION_SEED)
    rec = first_hit_heights([slit(0.0, 1.0)], params)
    raw = float(rec.heights[:, 0].mean())
    return UNIT_SLIT_CAPACITY / raw


def estimate_from_heights(heights: np.ndarray, alpha: float, params: WalkParams, kcal: float) -> CapacityEstimate:
    vals = heights**alpha
    # heights are exactly zero for axis-first walks; 0**alpha is 0 for alpha > 0
    mean = float(vals.mean()) if len(vals) else 0.0
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return CapacityEstimate(
        estimate=kcal * mean, stderr=kcal * se, walks=len(vals), step=params.step, r0=params.r0
    )


def m_alpha(hull: Hull, alpha: float, params: WalkParams) -> CapacityEstimate:
    """Monte Carlo estimate of the generalized capacity M_alpha of a hull."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if hull.empty:
        return CapacityEstimate(0.0, 0.0, 0, params.step, params.r0)
    if hull.radius >= params.r0:
        raise ValueError(f"start radius {params.r0} must exceed the hull radius {hull.radius}")
    kcal = calibration_constant(params.r0, params.step)
    rec = first_hit_heights([hull], params)
    return estimate_from_heights(rec.heights[:, 0], alpha, params, kcal)


def _merge_cover(intervals: list[tuple[float, float]], eps: float = 1e-12) -> bool:
    """Whether the given subintervals of [0, 1] cover it."""
    if not intervals:
        return False
    intervals = sorted(intervals)
    reach = 0.0
    for lo, hi in intervals:
        if lo > reach + eps:
            return False
        reach = max(reach, hi)
        if reach >= 1.0 - eps:
            return True
    return reach >= 1.0 - eps


def _segment_cover_intervals(q: Segment, prims: tuple[Primitive, ...]) -> list[tuple[float, float]]:
    out = []
    dqx, dqy = q.x1 - q.x0, q.y1 - q.y0
    den = dqx * dqx + dqy * dqy
    for p in prims:
        if isinstance(p, Box):
            ts = []
            ok = True
            for d, o, lo, hi in ((dqx, q.x0, p.x0, p.x1), (dqy, q.y0, p.y0, p.y1)):
                if d == 0:
                    if not lo <= o <= hi:
                        ok = False
                        break
                    ts.append((0.0, 1.0))
                else:
                    t0, t1 = (lo - o) / d, (hi - o) / d
                    ts.append((min(t0, t1), max(t0, t1)))
            if not ok:
                continue
            t_lo = max(0.0, max(t[0] for t in ts))
            t_hi = min(1.0, min(t[1] for t in ts))
            if t_lo <= t_hi:
                out.append((t_lo, t_hi))
        else:
            dpx, dpy = p.x1 - p.x0, p.y1 - p.y0
            cross = dqx * dpy - dqy * dpx
            off_cross = dqx * (p.y0 - q.y0) - dqy * (p.x0 - q.x0)
            if abs(cross) > 1e-12 or abs(off_cross) > 1e-12 or den == 0:
                continue  # only collinear segments can cover a 1-d piece
            t0 = ((p.x0 - q.x0) * dqx + (p.y0 - q.y0) * dqy) / den
            t1 = ((p.x1 - q.x0) * dqx + (p.y1 - q.y0) * dqy) / den
            lo, hi = min(t0, t1), max(t0, t1)
            if hi >= 0 and lo <= 1:
                out.append((max(0.0, lo), min(1.0, hi)))
    return out


def _subtract_rect(rect: tuple[float, float, float, float], cut: Box) -> list[tuple[float, float, float, float]]:
    x0, y0, x1, y1 = rect
    cx0, cy0, cx1, cy1 = max(x0, cut.x0), max(y0, cut.y0), min(x1, cut.x1), min(y1, cut.y1)
    if cx0 >= cx1 or cy0 >= cy1:
        return [rect]
    pieces = []
    if x0 < cx0:
        pieces.append((x0, y0, cx0, y1))
    if cx1 < x1:
        pieces.append((cx1, y0, x1, y1))
    if y0 < cy0:
        pieces.append((cx0, y0, cx1, cy0))
    if cy1 < y1:
        pieces.append((cx0, cy1, cx1, y1))
    return pieces


def hull_contains(big: Hull, small: Hull) -> bool:
    """Exact set containment for unions of axis-aligned segments and boxes."""
    for q in small.primitives:
        if isinstance(q, Segment) or (isinstance(q, Box) and (q.x0 == q.x1 or q.y0 == q.y1)):
            seg = q if isinstance(q, Segment) else Segment(q.x0, q.y0, q.x1, q.y1)
            if seg.x0 == seg.x1 and seg.y0 == seg.y1:
                x, y = seg.x0, seg.y0
                if not any(
                    (isinstance(p, Box) and p.x0 <= x <= p.x1 and p.y0 <= y <= p.y1)
                    or (
                        isinstance(p, Segment)
                        and abs((p.x1 - p.x0) * (y - p.y0) - (p.y1 - p.y0) * (x - p.x0)) < 1e-12
                        and min(p.x0, p.x1) - 1e-12 <= x <= max(p.x0, p.x1) + 1e-12
                        and min(p.y0, p.y1) - 1e-12 <= y <= max(p.y0, p.y1) + 1e-12
                    )
                    for p in big.primitives
                ):
                    return False
                continue
            if not _merge_cover(_segment_cover_intervals(seg, big.primitives)):
                return False
        else:
            pieces = [(q.x0, q.y0, q.x1, q.y1)]
            for p in big.primitives:
                if not isinstance(p, Box):
                    continue
                pieces = [r for piece in pieces for r in _subtract_rect(piece, p)]
                if not pieces:
                    break
            if pieces:
                return False
    return True


def maybe_encloses_region(hull: Hull, resolution: int = 160) -> bool:
    """Advisory flag: the union may enclose a pocket of the upper half-plane.

    Coarse raster check; the capacity estimator accepts such inputs anyway,
    this only marks them as falling outside the simply-connected-complement
    hull class.
    """
    if hull.empty:
        return False
    r = hull.radius
    margin = max(0.05 * r, 1e-3)
    xs = np.array([min(p.x0, p.x1) for p in hull.primitives] + [max(p.x0, p.x1) for p in hull.primitives])
    x_lo, x_hi = xs.min() - margin, xs.max() + margin
    y_lo, y_hi = 0.0, hull.max_height + margin
    nx = ny = resolution
    dx = (x_hi - x_lo) / nx
    dy = (y_hi - y_lo) / ny
    blocked = np.zeros((nx, ny), dtype=bool)
    for p in hull.primitives:
        if isinstance(p, Box):
            bx0, by0, bx1, by1 = p.x0, p.y0, p.x1, p.y1
        else:
            bx0, bx1 = min(p.x0, p.x1), max(p.x0, p.x1)
            by0, by1 = min(p.y0, p.y1), max(p.y0, p.y1)
        i0 = max(0, int((bx0 - x_lo) / dx))
        i1 = min(nx - 1, int((bx1 - x_lo) / dx))
        j0 = max(0, int((by0 - y_lo) / dy))
        j1 = min(ny - 1, int((by1 - y_lo) / dy))
        if isinstance(p, Box) or p.x0 == p.x1 or p.y0 == p.y1:
            blocked[i0 : i1 + 1, j0 : j1 + 1] = True
        else:
            for i in range(i0, i1 + 1):
                for j in range(j0, j1 + 1):
                    cx0, cy0 = x_lo + i * dx, y_lo + j * dy
                    geom = _TargetGeometry(Hull((p,)))
                    if geom.distance(np.array([cx0 + dx / 2]), np.array([cy0 + dy / 2]))[0] < max(dx, dy):
                        blocked[i, j] = True
    from scipy import ndimage as _ndi

    free = ~blocked
    labels, _ = _ndi.label(free)
    border_labels = set(labels[0, :]) | set(labels[-1, :]) | set(labels[:, -1])
    border_labels.discard(0)
    pocket = free & ~np.isin(labels, sorted(border_labels))
    return bool(pocket.any())


@dataclass
class ScalingReport:
    factors: list[float]
    alphas: list[float]
    estimates: dict[float, list[CapacityEstimate]]
    exponents: dict[float, float]
    params: WalkParams


def scaling_check(base: Hull, alphas: list[float], factors: list[float], params: WalkParams) -> ScalingReport:
    """Fitted scaling exponent of M(aA) against a; the law gives alpha + 1."""
    targets = [base.scaled(a) for a in factors]
    kcal = calibration_constant(params.r0, params.step)
    rec = first_hit_heights(targets, params)
    estimates: dict[float, list[CapacityEstimate]] = {}
    exponents: dict[float, float] = {}
    for alpha in alphas:
        ests = [estimate_from_heights(rec.heights[:, i], alpha, params, kcal) for i in range(len(factors))]
        estimates[alpha] = ests
        slope = np.polyfit(np.log(factors), np.log([e.estimate for e in ests]), 1)[0]
        exponents[alpha] = float(slope)
    return ScalingReport(factors=factors, alphas=alphas, estimates=estimates, exponents=exponents, params=params)


@dataclass
class SandwichReport:
    m_hull: CapacityEstimate
    m_hat: CapacityEstimate
    m_square_sum: CapacityEstimate
    n_squares: int
    truncated: bool
    hat_ratio: float
    sum_ratio: float
    upper_bounds_ok: bool


def sandwich_check(hull: Hull, alpha: float, params: WalkParams, j_min: int = -12) -> SandwichReport:
    """Estimate M(A), M(hat A), sum over tiles of M(S) on common walks.

    Asserts the two upper bounds within three standard errors of the paired
    differences; the reverse inequalities involve non-constructive universal
    constants and are reported as ratios only.
    """
    tiling = tiling_of(hull, j_min=j_min)
    squares = [Hull((s.as_box(),)) for s in tiling.squares]
    kcal = calibration_constant(params.r0, params.step)
    rec = first_hit_heights([hull] + squares, params)
    n = params.walks
    vals_hull = rec.heights[:, 0] ** alpha
    vals_sq = rec.heights[:, 1:] ** alpha
    vals_hat = rec.union_heights(list(range(1, len(squares) + 1))) ** alpha
    vals_sum = vals_sq.sum(axis=1)
    m_hull = estimate_from_heights(rec.heights[:, 0], alpha, params, kcal)
    m_hat = CapacityEstimate(kcal * float(vals_hat.mean()), kcal * float(vals_hat.std(ddof=1)) / math.sqrt(n), n, params.step, params.r0)
    m_sum = CapacityEstimate(kcal * float(vals_sum.mean()), kcal * float(vals_sum.std(ddof=1)) / math.sqrt(n), n, params.step, params.r0)
    diff_hat = vals_hat - vals_hull
    diff_sum = vals_sum - vals_hull
    ok_hat = float(diff_hat.mean()) >= -3.0 * float(diff_hat.std(ddof=1)) / math.sqrt(n)
    ok_sum = float(diff_sum.mean()) >= -3.0 * float(diff_sum.std(ddof=1)) / math.sqrt(n)
    return SandwichReport(
        m_hull=m_hull,
        m_hat=m_hat,
        m_square_sum=m_sum,
        n_squares=len(squares),
        truncated=tiling.truncated,
        hat_ratio=m_hull.estimate / m_hat.estimate if m_hat.estimate else float("nan"),
        sum_ratio=m_hull.estimate / m_sum.estimate if m_sum.estimate else float("nan"),
        upper_bounds_ok=bool(ok_hat and ok_sum),
    )


@dataclass
class MonoSubReport:
    m_a: CapacityEstimate
    m_b: CapacityEstimate
    m_union: CapacityEstimate
    a_subset_of_b: bool
    monotone_ok: bool | None
    pathwise_subadditive: bool
    subadditive_ok: bool
    equal_hulls: bool


def monotonicity_subadditivity_check(a: Hull, b: Hull, alpha: float, params: WalkParams) -> MonoSubReport:
    """Check M(A) <= M(B) for nested hulls and M(A u B) <= M(A) + M(B).

    Common random numbers: one walk ensemble is evaluated against A, B, and
    their union (the union's first hit is the pathwise earlier of the two),
    so the subadditivity inequality holds walk by walk, exactly.
    """
    kcal = calibration_constant(params.r0, params.step)
    rec = first_hit_heights([a, b], params)
    n = params.walks
    vals_a = rec.heights[:, 0] ** alpha
    vals_b = rec.heights[:, 1] ** alpha
    vals_u = rec.union_heights([0, 1]) ** alpha
    m_a = estimate_from_heights(rec.heights[:, 0], alpha, params, kcal)
    m_b = estimate_from_heights(rec.heights[:, 1], alpha, params, kcal)
    m_u = CapacityEstimate(kcal * float(vals_u.mean()), kcal * float(vals_u.std(ddof=1)) / math.sqrt(n), n, params.step, params.r0)
    subset = hull_contains(b, a)
    if subset:
        diff = vals_b - vals_a
        monotone_ok = bool(float(diff.mean()) >= -3.0 * float(diff.std(ddof=1)) / math.sqrt(n))
    else:
        monotone_ok = None
    pathwise = bool(np.all(vals_u <= vals_a + vals_b))
    diff_sub = vals_a + vals_b - vals_u
    sub_ok = bool(float(diff_sub.mean()) >= -3.0 * float(diff_sub.std(ddof=1)) / math.sqrt(n))
    return MonoSubReport(
        m_a=m_a,
        m_b=m_b,
        m_union=m_u,
        a_subset_of_b=subset,
        monotone_ok=monotone_ok,
        pathwise_subadditive=pathwise,
        subadditive_ok=sub_ok,
        equal_hulls=hull_contains(a, b) and subset,
    )


@dataclass
class PedestalReport:
    levels: list[int]
    ratios: dict[int, float]
    max_rel_spread: float


def pedestal_ratio_check(levels: list[int], alpha: float, params: WalkParams, a: int = 0) -> PedestalReport:
    """M(R(S)) / M(S) across tiling levels; scale invariance makes it constant."""
    targets = []
    for j in levels:
        s = HyperbolicSquare(a=a, j=j)
        targets.append(Hull((s.as_box(),)))
        targets.append(Hull((s.pedestal(),)))
    rec = first_hit_heights(targets, params)
    ratios = {}
    for i, j in enumerate(levels):
        ms = float(np.mean(rec.heights[:, 2 * i] ** alpha))
        mr = float(np.mean(rec.heights[:, 2 * i + 1] ** alpha))
        ratios[j] = mr / ms if ms > 0 else float("nan")
    vals = np.array(list(ratios.values()))
    spread = float((vals.max() - vals.min()) / vals.mean()) if np.all(np.isfinite(vals)) else float("nan")
    return PedestalReport(levels=levels, ratios=ratios, max_rel_spread=spread)
