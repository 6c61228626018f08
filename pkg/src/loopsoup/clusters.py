"""Loop clusters, fillings, outermost clusters, and traced outer boundaries.

Two loops are adjacent iff their visited-site sets intersect (they occupy a
common lattice vertex); clusters are the connected components of that
relation.  The filling of a cluster is everything not reachable from outside
the frame by a 4-connected flood over unoccupied sites.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import csgraph

from .lattice import LatticeDomain
from .soup import LoopSoup


class UnionFind:
    """Union-find with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.n_components = n

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.n_components -= 1


def adjacency_pairs(soup: LoopSoup) -> tuple[np.ndarray, np.ndarray]:
    """Pairs (lo, hi) of loop indices sharing a visited site, lo < hi.

    Consecutive claimants of each site are paired, so when loops are ordered
    by arrival the pair becomes active exactly when loop ``hi`` arrives; the
    pair set restricted to ``hi < k`` yields the adjacency of the first k
    loops.
    """
    ids, x, y = soup.visited_sites()
    if len(ids) == 0:
        z = np.empty(0, dtype=np.int64)
        return z, z.copy()
    d = soup.domain
    codes = soup.domain.site_indices(x, y)
    order = np.lexsort((ids, codes))
    codes_s = codes[order]
    ids_s = ids[order]
    same = codes_s[1:] == codes_s[:-1]
    lo = ids_s[:-1][same]
    hi = ids_s[1:][same]
    distinct = lo != hi
    return lo[distinct], hi[distinct]


def component_labels(n_loops: int, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Connected-component label per loop from adjacency pairs."""
    if n_loops == 0:
        return np.empty(0, dtype=np.int64)
    graph = sparse.csr_matrix(
        (np.ones(len(lo), dtype=np.int8), (lo, hi)), shape=(n_loops, n_loops)
    )
    _, labels = csgraph.connected_components(graph, directed=False)
    return labels


@dataclass(frozen=True)
class Cluster:
    """One intersection cluster: loop indices, distinct visited sites, bbox."""

    cluster_id: int
    loop_ids: np.ndarray
    sites: np.ndarray  # (K, 2) unique
    bbox: tuple[int, int, int, int]  # xmin, ymin, xmax, ymax

    @property
    def site_count(self) -> int:
        return len(self.sites)

    def site_set(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in self.sites}


@dataclass(frozen=True)
class ClusterSet:
    assignments: np.ndarray  # loop index -> cluster id
    clusters: dict[int, Cluster]

    def __len__(self) -> int:
        return len(self.clusters)


def build_clusters(soup: LoopSoup) -> ClusterSet:
    """Partition the soup's loops into clusters of pairwise-intersecting loops.

    Union-find keyed on a site -> first-claiming-loop hash map; every later
    claimant of an occupied site is unioned with the first one.
    """
    n = len(soup)
    uf = UnionFind(n)
    ids, x, y = soup.visited_sites()
    site_codes = soup.domain.site_indices(x, y)
    first_loop: dict[int, int] = {}
    for code, loop_id in zip(site_codes.tolist(), ids.tolist()):
        owner = first_loop.setdefault(code, loop_id)
        if owner != loop_id:
            uf.union(owner, loop_id)
    roots = np.fromiter((uf.find(i) for i in range(n)), dtype=np.int64, count=n)
    # canonical ids: 0..k-1 in order of each cluster's smallest loop index
    _, first_idx, assignments = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first_idx))
    assignments = rank[assignments]
    clusters: dict[int, Cluster] = {}
    site_labels = assignments[ids] if n else np.empty(0, dtype=np.int64)
    for cid in range(len(first_idx)):
        loop_ids = np.flatnonzero(assignments == cid)
        mask = site_labels == cid
        pts = np.unique(np.stack([x[mask], y[mask]], axis=1), axis=0)
        bbox = (int(pts[:, 0].min()), int(pts[:, 1].min()), int(pts[:, 0].max()), int(pts[:, 1].max()))
        clusters[cid] = Cluster(cluster_id=cid, loop_ids=loop_ids, sites=pts, bbox=bbox)
    cs = ClusterSet(assignments=assignments, clusters=clusters)
    _assert_partition(cs, n, site_codes, site_labels)
    return cs


def _assert_partition(cs: ClusterSet, n_loops: int, site_codes: np.ndarray, site_labels: np.ndarray):
    counted = sum(len(c.loop_ids) for c in cs.clusters.values())
    if counted != n_loops:
        raise AssertionError("cluster partition does not cover every loop exactly once")
    if len(site_codes):
        order = np.argsort(site_codes, kind="stable")
        codes_s = site_codes[order]
        labels_s = site_labels[order]
        same = codes_s[1:] == codes_s[:-1]
        if np.any(labels_s[1:][same] != labels_s[:-1][same]):
            raise AssertionError("a shared site spans two clusters")


@dataclass(frozen=True)
class FilledCluster:
    """A cluster's filling as a boolean mask anchored at ``origin``."""

    cluster_id: int
    origin: tuple[int, int]
    mask: np.ndarray
    touches_boundary: bool
    outermost: bool | None = None

    @property
    def fill_count(self) -> int:
        return int(self.mask.sum())

    def site_set(self) -> set[tuple[int, int]]:
        xs, ys = np.nonzero(self.mask)
        return {(int(a) + self.origin[0], int(b) + self.origin[1]) for a, b in zip(xs, ys)}

    def contains_sites(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        lx = np.asarray(x) - self.origin[0]
        ly = np.asarray(y) - self.origin[1]
        ok = (lx >= 0) & (lx < self.mask.shape[0]) & (ly >= 0) & (ly < self.mask.shape[1])
        out = np.zeros(ok.shape, dtype=bool)
        out[ok] = self.mask[lx[ok], ly[ok]]
        return out


def fill(cluster: Cluster, frame: LatticeDomain) -> FilledCluster:
    """Flood-fill from outside the frame; the filling is whatever is not reached."""
    x, y = cluster.sites[:, 0], cluster.sites[:, 1]
    if not np.all(frame.contains_points(x, y)):
        raise ValueError("cluster must lie inside the frame")
    x0, y0, x1, y1 = cluster.bbox
    occ = np.zeros((x1 - x0 + 1, y1 - y0 + 1), dtype=bool)
    occ[x - x0, y - y0] = True
    filled = ndimage.binary_fill_holes(occ)
    touches = bool(frame.edge_distance(x, y).min() <= 1)
    return FilledCluster(
        cluster_id=cluster.cluster_id, origin=(x0, y0), mask=filled, touches_boundary=touches
    )


def outermost(cs: ClusterSet, frame: LatticeDomain) -> list[FilledCluster]:
    """Fill every cluster and mark the ones contained in no other cluster's fill.

    A cluster lies inside another's fill iff any one of its sites does (fills
    are walled by the owning cluster's sites), so a representative-site test
    with bounding-box prefiltering decides containment.
    """
    fills = {cid: fill(c, frame) for cid, c in cs.clusters.items()}
    out: list[FilledCluster] = []
    for cid, cluster in cs.clusters.items():
        rep = cluster.sites[0]
        inside_other = False
        for other_id, other in cs.clusters.items():
            if other_id == cid:
                continue
            ob = other.bbox
            cb = cluster.bbox
            if not (ob[0] <= cb[0] and ob[1] <= cb[1] and cb[2] <= ob[2] and cb[3] <= ob[3]):
                continue
            if fills[other_id].contains_sites(rep[:1], rep[1:])[0]:
                inside_other = True
                break
        out.append(replace(fills[cid], outermost=not inside_other))
    return out


# Moore neighborhood in counter-clockwise order (x right, y up).
_MOORE = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]


def trace_outer_boundary(fc: FilledCluster) -> list[tuple[int, int]]:
    """Moore-neighbor trace of the fill's outer contour, counter-clockwise.

    Starts at the lexicographically minimal fill site and returns exactly the
    fill sites that have an exterior 4-neighbor.  Pinch sites visited twice
    by the raw traversal are kept at their first visit only, so the returned
    cyclic sequence never repeats a point.
    """
    if fc.fill_count == 0:
        raise ValueError("cannot trace an empty fill")
    mask = fc.mask
    w, h = mask.shape

    def filled(p):
        return 0 <= p[0] < w and 0 <= p[1] < h and mask[p[0], p[1]]

    xs, ys = np.nonzero(mask)
    order = np.lexsort((ys, xs))
    start = (int(xs[order[0]]), int(ys[order[0]]))
    # west neighbor of the leftmost-lowest fill site is empty
    backtrack_dir = 4
    current = start
    path = [start]
    seen = {start}
    seen_states = {(start, backtrack_dir)}
    max_steps = 8 * int(mask.sum()) + 16
    for _ in range(max_steps):
        found = None
        for k in range(1, 9):
            d = (backtrack_dir + k) % 8
            cand = (current[0] + _MOORE[d][0], current[1] + _MOORE[d][1])
            if filled(cand):
                found = (cand, d)
                break
        if found is None:
            break  # isolated single site
        nxt, d = found
        prev_empty_dir = (d - 1) % 8
        prev_empty = (
            current[0] + _MOORE[prev_empty_dir][0],
            current[1] + _MOORE[prev_empty_dir][1],
        )
        # direction from the new pixel back to that empty cell
        dx, dy = prev_empty[0] - nxt[0], prev_empty[1] - nxt[1]
        backtrack_dir = _MOORE.index((dx, dy))
        current = nxt
        # deterministic transitions: the first repeated (pixel, backtrack)
        # state closes the traversal cycle
        if (current, backtrack_dir) in seen_states:
            break
        seen_states.add((current, backtrack_dir))
        if current not in seen:
            path.append(current)
            seen.add(current)
    else:
        raise AssertionError("contour trace failed to terminate")
    ox, oy = fc.origin
    return [(px + ox, py + oy) for px, py in path]


@dataclass(frozen=True)
class BoxCountFit:
    estimate: float
    r_squared: float
    counts: dict[int, int]


def box_counting_dimension(points: np.ndarray, scales: list[int]) -> BoxCountFit:
    """Least-squares slope of log N(eps) against log(1/eps) over the given box sizes."""
    if len(scales) < 3:
        raise ValueError("need at least 3 scales")
    if any(s < 2 for s in scales):
        raise ValueError("box sizes must be >= 2 lattice units")
    pts = np.asarray(points)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
        raise ValueError("points must be a non-empty (N, 2) array")
    mins = pts.min(axis=0)
    counts = {}
    for s in scales:
        boxes = (pts - mins) // s
        counts[int(s)] = len(np.unique(boxes, axis=0))
    log_inv_eps = np.log(1.0 / np.array(sorted(counts)))
    log_n = np.log([counts[s] for s in sorted(counts)])
    slope, intercept = np.polyfit(log_inv_eps, log_n, 1)
    pred = slope * log_inv_eps + intercept
    ss_res = float(np.sum((log_n - pred) ** 2))
    ss_tot = float(np.sum((log_n - log_n.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return BoxCountFit(estimate=float(slope), r_squared=r2, counts=counts)


def cluster_summary(cs: ClusterSet, frame: LatticeDomain) -> list[dict]:
    """One record per cluster for the delimited-text cluster report."""
    filled = {fc.cluster_id: fc for fc in outermost(cs, frame)}
    records = []
    for cid in sorted(cs.clusters):
        c = cs.clusters[cid]
        fc = filled[cid]
        records.append(
            {
                "id": cid,
                "loop_count": int(len(c.loop_ids)),
                "site_count": int(c.site_count),
                "fill_count": fc.fill_count,
                "outermost": bool(fc.outermost),
                "touches_boundary": fc.touches_boundary,
                "bbox": c.bbox,
            }
        )
    return records
