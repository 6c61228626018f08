"""Percolation experiments: phase-transition scans, annulus tails, law checks.

Scans are monotone-coupled: each replicate samples one layered soup at the
top intensity and evaluates every c on prefixes of it, so all reported
indicators are nondecreasing in c replicate by replicate, exactly.

Statistic conventions (lattice analogs of the continuum events):
  * a cluster "touches" the frame edge when it has a site within one lattice
    unit of it;
  * boundary_touch: some cluster touches both the central half-size box (the
    bulk) and the frame edge, i.e. a macroscopic bulk-to-boundary connection.
    The naive reading "any cluster within one unit of the edge" is degenerate
    at any c > 0 (stray two-step loops sit on edge sites almost surely), so
    the bulk qualifier carries the subcritical/supercritical dichotomy;
  * crossing: some cluster touches both the left and the right frame side;
  * single_cluster: the soup has exactly one cluster.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .clusters import adjacency_pairs, component_labels
from .lattice import LatticeDomain
from .rngs import STREAM_EXPERIMENT, derive_seedseq
from .soup import LoopSoup, restrict, sample_layered_soup, sample_soup, superpose

Z_95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class ScanConfig:
    cs: tuple[float, ...]
    size: int
    mesh: float = 1.0
    max_len: int = 512
    replicates: int = 100
    seed: int = 0
    threads: int = 1
    aspect: float = 1.0

    def __post_init__(self):
        if not self.cs or any(c < 0 for c in self.cs):
            raise ValueError("intensities must be nonnegative and nonempty")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if self.aspect <= 0:
            raise ValueError("aspect must be positive")
        if self.size < 4:
            raise ValueError("lattice size must be at least 4")

    @property
    def domain(self) -> LatticeDomain:
        return LatticeDomain(
            width=max(4, round(self.size * self.aspect)), height=self.size, mesh=self.mesh
        )


@dataclass(frozen=True)
class StatRow:
    c: float
    stat: str
    value: float
    ci_lo: float
    ci_hi: float
    n: int
    successes: int


@dataclass
class ExperimentResult:
    kind: str
    config: dict
    rows: list[StatRow]
    replicate_seeds: list[int]
    runtime_s: float = 0.0

    def row(self, c: float, stat: str) -> StatRow:
        for r in self.rows:
            if r.stat == stat and r.c == c:
                return r
        raise KeyError((c, stat))

    def series(self, stat: str) -> list[float]:
        return [r.value for r in self.rows if r.stat == stat]


def wilson_ci(successes: int, n: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson score interval; always contains the point estimate."""
    if n == 0:
        return (0.0, 1.0)
    phat = successes / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return (min(phat, max(0.0, center - half)), max(phat, min(1.0, center + half)))


def replicate_seed(master_seed: int, *path: int) -> int:
    """A 64-bit stream seed derived stably from the master seed and a path."""
    return int(derive_seedseq(master_seed, STREAM_EXPERIMENT, *path).generate_state(2, np.uint64)[0])


def _reduceat_flags(soup: LoopSoup):
    """Per-loop flags: edge band, central bulk box, left/right sides, radii from center."""
    d = soup.domain
    _, x, y = soup.visited_sites()
    starts = soup.offsets[:-1]
    cx, cy = d.center
    edge = d.edge_distance(x, y)
    r2 = (x - cx) ** 2 + (y - cy) ** 2
    ox, _ = d.offset
    in_bulk = (np.abs(x - cx) <= d.width / 4) & (np.abs(y - cy) <= d.height / 4)
    near_edge = np.minimum.reduceat(edge, starts) <= 1
    near_bulk = np.maximum.reduceat(in_bulk.astype(np.int8), starts) > 0
    near_left = np.minimum.reduceat(x, starts) <= ox + 1
    near_right = np.maximum.reduceat(x, starts) >= ox + d.width - 2
    min_r = np.sqrt(np.minimum.reduceat(r2, starts))
    max_r = np.sqrt(np.maximum.reduceat(r2, starts))
    return near_edge, near_bulk, near_left, near_right, min_r, max_r


def _labels_connect(labels: np.ndarray, a_flags: np.ndarray, b_flags: np.ndarray) -> bool:
    """Whether some component contains both an a-flagged and a b-flagged loop."""
    la = np.unique(labels[a_flags])
    lb = np.unique(labels[b_flags])
    return bool(np.intersect1d(la, lb, assume_unique=True).size > 0)


def _scan_replicate(payload: dict, rep: int) -> dict[str, list[int]]:
    cfg = ScanConfig(**payload)
    domain = cfg.domain
    cs = sorted(cfg.cs)
    c_max = max(cs)
    out = {"boundary_touch": [], "crossing": [], "single_cluster": []}
    if c_max == 0:
        for c in cfg.cs:
            out["boundary_touch"].append(0)
            out["crossing"].append(0)
            out["single_cluster"].append(0)
        return out
    soup = sample_layered_soup(
        domain, c_max, cfg.max_len, seed=replicate_seed(cfg.seed, rep)
    )
    lo, hi = adjacency_pairs(soup)
    near_edge, near_bulk, near_left, near_right, _, _ = _reduceat_flags(soup)
    per_c: dict[float, tuple[int, int, int]] = {}
    for c in cs:
        k = int(np.searchsorted(soup.arrivals, c, side="right"))
        if k == 0:
            per_c[c] = (0, 0, 0)
            continue
        keep = hi < k
        labels = component_labels(k, lo[keep], hi[keep])
        touch = _labels_connect(labels, near_bulk[:k], near_edge[:k])
        cross = _labels_connect(labels, near_left[:k], near_right[:k])
        single = int(labels.max()) == 0 if k else False
        per_c[c] = (int(touch), int(cross), int(single))
    for c in cfg.cs:
        t, x, s = per_c[c]
        out["boundary_touch"].append(t)
        out["crossing"].append(x)
        out["single_cluster"].append(s)
    return out


def _run_parallel(worker, payload: dict, replicates: int, threads: int) -> list:
    if threads <= 1:
        return [worker(payload, rep) for rep in range(replicates)]
    results = [None] * replicates
    with ProcessPoolExecutor(max_workers=threads) as pool:
        chunk = max(1, replicates // (threads * 8))
        for rep, res in enumerate(
            pool.map(_PayloadWorker(worker, payload), range(replicates), chunksize=chunk)
        ):
            results[rep] = res
    return results


class _PayloadWorker:
    """Picklable payload-binding wrapper for pool workers."""

    def __init__(self, fn, payload):
        self.fn = fn
        self.payload = payload

    def __call__(self, rep):
        return self.fn(self.payload, rep)


def percolation_scan(cfg: ScanConfig) -> ExperimentResult:
    """Coupled frequencies of boundary_touch, crossing, single_cluster per c."""
    start = time.perf_counter()
    payload = asdict(cfg)
    per_rep = _run_parallel(_scan_replicate, payload, cfg.replicates, cfg.threads)
    rows = []
    for stat in ("boundary_touch", "crossing", "single_cluster"):
        sums = np.sum([r[stat] for r in per_rep], axis=0)
        for c, s in zip(cfg.cs, sums):
            lo_ci, hi_ci = wilson_ci(int(s), cfg.replicates)
            rows.append(
                StatRow(
                    c=float(c),
                    stat=stat,
                    value=int(s) / cfg.replicates,
                    ci_lo=lo_ci,
                    ci_hi=hi_ci,
                    n=cfg.replicates,
                    successes=int(s),
                )
            )
    return ExperimentResult(
        kind="scan",
        config=asdict(cfg),
        rows=rows,
        replicate_seeds=[replicate_seed(cfg.seed, rep) for rep in range(cfg.replicates)],
        runtime_s=time.perf_counter() - start,
    )


def boundary_touch_scan(cfg: ScanConfig) -> ExperimentResult:
    return percolation_scan(cfg)


def crossing_scan(cfg: ScanConfig, aspect: float | None = None) -> ExperimentResult:
    if aspect is not None:
        cfg = ScanConfig(**{**asdict(cfg), "aspect": aspect})
    return percolation_scan(cfg)


@dataclass
class AnnulusResult:
    config: dict
    c: float
    r_inner: float
    r_outer: float
    rows: list[StatRow]  # stat = "tail_ge_{k}"
    counts: list[int]  # crossing-cluster count per replicate
    slope: float
    r_squared: float
    fitted_ks: list[int]
    replicate_seeds: list[int]
    runtime_s: float = 0.0


def _annulus_replicate(payload: dict, rep: int) -> int:
    cfg = ScanConfig(**payload["cfg"])
    c = payload["c"]
    domain = cfg.domain
    soup = sample_soup(domain, c, cfg.max_len, seed=replicate_seed(cfg.seed, 7, rep))
    if len(soup) == 0:
        return 0
    lo, hi = adjacency_pairs(soup)
    labels = component_labels(len(soup), lo, hi)
    _, _, _, _, min_r, max_r = _reduceat_flags(soup)
    inner = min_r <= payload["r_inner"]
    outer = max_r >= payload["r_outer"]
    n_labels = int(labels.max()) + 1
    has_inner = np.zeros(n_labels, dtype=bool)
    has_outer = np.zeros(n_labels, dtype=bool)
    has_inner[labels[inner]] = True
    has_outer[labels[outer]] = True
    return int(np.count_nonzero(has_inner & has_outer))


def annulus_chain_tail(c: float, r_inner: float, r_outer: float, cfg: ScanConfig) -> AnnulusResult:
    """Tail frequencies of the number of distinct clusters crossing an annulus.

    A cluster crosses when it holds a site within r_inner of the frame center
    and a site at distance >= r_outer.  The log-frequency of {>= k crossings}
    is fitted by least squares over the k values with at least 20 hits.
    """
    if not 0 < r_inner < r_outer:
        raise ValueError("need 0 < r_inner < r_outer")
    d = cfg.domain
    if r_outer > (min(d.width, d.height) - 1) / 2:
        raise ValueError("annulus must fit inside the frame")
    start = time.perf_counter()
    payload = {"cfg": asdict(cfg), "c": c, "r_inner": r_inner, "r_outer": r_outer}
    counts = _run_parallel(_annulus_replicate, payload, cfg.replicates, cfg.threads)
    counts = [int(v) for v in counts]
    kmax = max(counts) if counts else 0
    rows = []
    hits_by_k = {}
    for k in range(1, kmax + 1):
        hits = sum(1 for v in counts if v >= k)
        hits_by_k[k] = hits
        lo_ci, hi_ci = wilson_ci(hits, cfg.replicates)
        rows.append(
            StatRow(
                c=float(c),
                stat=f"tail_ge_{k}",
                value=hits / cfg.replicates,
                ci_lo=lo_ci,
                ci_hi=hi_ci,
                n=cfg.replicates,
                successes=hits,
            )
        )
    fitted = [k for k, h in hits_by_k.items() if h >= 20]
    if len(fitted) >= 2:
        xs = np.array(fitted, dtype=float)
        ys = np.log([hits_by_k[k] / cfg.replicates for k in fitted])
        slope, intercept = np.polyfit(xs, ys, 1)
        pred = slope * xs + intercept
        ss_res = float(np.sum((ys - pred) ** 2))
        ss_tot = float(np.sum((ys - ys.mean()) ** 2))
        r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    else:
        slope, r2 = float("nan"), float("nan")
    return AnnulusResult(
        config=asdict(cfg),
        c=c,
        r_inner=r_inner,
        r_outer=r_outer,
        rows=rows,
        counts=counts,
        slope=float(slope),
        r_squared=float(r2),
        fitted_ks=fitted,
        replicate_seeds=[replicate_seed(cfg.seed, 7, rep) for rep in range(cfg.replicates)],
        runtime_s=time.perf_counter() - start,
    )


@dataclass(frozen=True)
class TestEntry:
    name: str
    statistic: float
    p_value: float


@dataclass
class CheckReport:
    kind: str
    config: dict
    entries: list[TestEntry]
    runtime_s: float = 0.0

    def passed(self, alpha: float = 0.01) -> bool:
        return all(e.p_value > alpha for e in self.entries)


def _soup_summary(soup: LoopSoup, lengths: np.ndarray) -> dict:
    """Sufficient statistics of one soup draw for the two-sample law checks."""
    length_counts = np.array([(soup.lengths == l).sum() for l in lengths], dtype=np.int64)
    root_idx = soup.domain.site_indices(soup.roots[:, 0], soup.roots[:, 1])
    if len(soup):
        lo, hi = adjacency_pairs(soup)
        labels = component_labels(len(soup), lo, hi)
        n_clusters = int(labels.max()) + 1
        ids, x, y = soup.visited_sites()
        site_codes = soup.domain.site_indices(x, y) * (int(labels.max()) + 1) + labels[ids]
        # distinct sites per cluster
        uniq = np.unique(site_codes)
        per_cluster = np.bincount(uniq % (int(labels.max()) + 1), minlength=n_clusters)
        largest = int(per_cluster.max())
    else:
        n_clusters = 0
        largest = 0
    return {
        "length_counts": length_counts,
        "root_sites": np.bincount(root_idx, minlength=soup.domain.n_sites),
        "total": len(soup),
        "n_clusters": n_clusters,
        "largest": largest,
    }


def _binned_chisquare(sample_a: np.ndarray, sample_b: np.ndarray, min_expected: float = 5.0) -> TestEntry | None:
    """Two-sample chi-square on integer samples, greedily pooling sparse bins."""
    vmax = int(max(sample_a.max(initial=0), sample_b.max(initial=0)))
    counts_a = np.bincount(sample_a, minlength=vmax + 1).astype(float)
    counts_b = np.bincount(sample_b, minlength=vmax + 1).astype(float)
    total = counts_a + counts_b
    bins_a, bins_b = [], []
    acc_a = acc_b = acc_t = 0.0
    for a, b, t in zip(counts_a, counts_b, total):
        acc_a += a
        acc_b += b
        acc_t += t
        if acc_t >= 2 * min_expected:
            bins_a.append(acc_a)
            bins_b.append(acc_b)
            acc_a = acc_b = acc_t = 0.0
    if acc_t > 0 and bins_a:
        bins_a[-1] += acc_a
        bins_b[-1] += acc_b
    if len(bins_a) < 2:
        return None
    table = np.array([bins_a, bins_b])
    chi2, p, _, _ = stats.chi2_contingency(table)
    return TestEntry(name="", statistic=float(chi2), p_value=float(p))


def _contingency(name: str, counts_a: np.ndarray, counts_b: np.ndarray, min_expected: float = 5.0) -> TestEntry | None:
    keep = (counts_a + counts_b) >= 2 * min_expected
    if keep.sum() < 2:
        return None
    table = np.array([counts_a[keep], counts_b[keep]], dtype=float)
    chi2, p, _, _ = stats.chi2_contingency(table)
    return TestEntry(name=name, statistic=float(chi2), p_value=float(p))


def _law_comparison(kind: str, cfg: ScanConfig, draw_a, draw_b, lengths: np.ndarray) -> CheckReport:
    start = time.perf_counter()
    agg = {}
    for tag, draw in (("a", draw_a), ("b", draw_b)):
        length_tot = np.zeros(len(lengths), dtype=np.int64)
        site_tot = None
        totals, clusters, largests = [], [], []
        for rep in range(cfg.replicates):
            s = _soup_summary(draw(rep), lengths)
            length_tot += s["length_counts"]
            site_tot = s["root_sites"] if site_tot is None else site_tot + s["root_sites"]
            totals.append(s["total"])
            clusters.append(s["n_clusters"])
            largests.append(s["largest"])
        agg[tag] = {
            "length_tot": length_tot,
            "site_tot": site_tot,
            "totals": np.array(totals),
            "clusters": np.array(clusters),
            "largests": np.array(largests),
        }
    entries = []
    e = _contingency("per_length_totals", agg["a"]["length_tot"], agg["b"]["length_tot"])
    if e:
        entries.append(e)
    e = _contingency("per_site_totals", agg["a"]["site_tot"], agg["b"]["site_tot"])
    if e:
        entries.append(e)
    for name in ("totals", "clusters", "largests"):
        e = _binned_chisquare(agg["a"][name], agg["b"][name])
        if e:
            entries.append(TestEntry(name=f"{name}_distribution", statistic=e.statistic, p_value=e.p_value))
    return CheckReport(
        kind=kind,
        config=asdict(cfg),
        entries=entries,
        runtime_s=time.perf_counter() - start,
    )


def additivity_check(c1: float, c2: float, cfg: ScanConfig) -> CheckReport:
    """Compare superpose(sample(c1), sample(c2)) with sample(c1 + c2), law by law."""
    if c1 < 0 or c2 < 0:
        raise ValueError("intensities must be nonnegative")
    domain = cfg.domain
    lengths = np.arange(2, cfg.max_len + 1, 2)

    def draw_sup(rep: int) -> LoopSoup:
        s1 = sample_soup(domain, c1, cfg.max_len, seed=replicate_seed(cfg.seed, 11, rep))
        s2 = sample_soup(domain, c2, cfg.max_len, seed=replicate_seed(cfg.seed, 12, rep))
        return superpose(s1, s2)

    def draw_direct(rep: int) -> LoopSoup:
        return sample_soup(domain, c1 + c2, cfg.max_len, seed=replicate_seed(cfg.seed, 13, rep))

    return _law_comparison("additivity", cfg, draw_sup, draw_direct, lengths)


def restriction_check(c: float, sub_size: int, cfg: ScanConfig) -> CheckReport:
    """Compare restrict(sample(frame), sub) with a direct sample on the centered sub-square."""
    domain = cfg.domain
    if sub_size > min(domain.width, domain.height):
        raise ValueError("sub-rectangle must fit inside the frame")
    off = ((domain.width - sub_size) // 2, (domain.height - sub_size) // 2)
    sub = LatticeDomain(sub_size, sub_size, offset=off, mesh=domain.mesh)
    lengths = np.arange(2, cfg.max_len + 1, 2)

    def draw_restricted(rep: int) -> LoopSoup:
        full = sample_soup(domain, c, cfg.max_len, seed=replicate_seed(cfg.seed, 21, rep))
        return restrict(full, sub)

    def draw_direct(rep: int) -> LoopSoup:
        return sample_soup(sub, c, cfg.max_len, seed=replicate_seed(cfg.seed, 22, rep))

    return _law_comparison("restriction", cfg, draw_restricted, draw_direct, lengths)


def merge_results(results: list[ExperimentResult]) -> ExperimentResult:
    """Count-weighted pooling of scans that share a config up to seed."""
    if not results:
        raise ValueError("nothing to merge")
    def stripped(cfg: dict) -> dict:
        return {k: v for k, v in cfg.items() if k not in ("seed", "threads")}

    base = stripped(results[0].config)
    for r in results[1:]:
        if stripped(r.config) != base:
            raise ValueError("cannot merge results with differing configs")
    pooled: dict[tuple[float, str], list[int]] = {}
    order: list[tuple[float, str]] = []
    for r in results:
        for row in r.rows:
            key = (row.c, row.stat)
            if key not in pooled:
                pooled[key] = [0, 0]
                order.append(key)
            pooled[key][0] += row.successes
            pooled[key][1] += row.n
    rows = []
    for c, stat in sorted(order):
        s, n = pooled[(c, stat)]
        lo_ci, hi_ci = wilson_ci(s, n)
        rows.append(StatRow(c=c, stat=stat, value=s / n, ci_lo=lo_ci, ci_hi=hi_ci, n=n, successes=s))
    return ExperimentResult(
        kind=results[0].kind,
        config=results[0].config,
        rows=rows,
        replicate_seeds=[s for r in results for s in r.replicate_seeds],
        runtime_s=sum(r.runtime_s for r in results),
    )
