"""Critical faces: the Čech predicate, Rips per-edge link multiplicities, F_k(λ) curves."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numba
import numpy as np
from scipy.spatial import cKDTree

from .complex import _extend, _forward_csr, build, lens_points, neighbor_pairs
from .density import PointCloud, from_points
from .geometry import INTERIOR_EPS, circumspheres, pair_distance
from .persistence import reduce


def _points(cloud) -> np.ndarray:
    return cloud.points if isinstance(cloud, PointCloud) else from_points(cloud).points


@dataclass
class CriticalFaceReport:
    flavor: str
    k: int
    faces: np.ndarray  # (m, k+1) vertex ids; for Rips the edges
    radii: np.ndarray
    multiplicity: np.ndarray
    plus: np.ndarray | None = None
    minus: np.ndarray | None = None
    degenerate: int = 0
    curve: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return int(self.multiplicity.sum())


def cliques(points: np.ndarray, size: int, radius: float) -> np.ndarray:
    """All vertex sets of ``size`` points with pairwise distances <= radius."""
    n = len(points)
    if size == 1:
        return np.arange(n, dtype=np.int64)[:, None]
    pairs = neighbor_pairs(points, radius)
    if len(pairs):
        pairs = pairs[pair_distance(points[pairs[:, 0]], points[pairs[:, 1]]) <= radius]
    rows = pairs
    indptr, nbrs = _forward_csr(pairs, n)
    for _ in range(size - 2):
        if len(rows) == 0:
            return np.zeros((0, size), dtype=np.int64)
        rows = _extend(rows, indptr, nbrs)
    return rows.reshape(-1, size)


def cech_critical_faces(cloud, k: int, r_max: float, chunk: int = 200_000) -> CriticalFaceReport:
    if k < 1:
        raise ValueError("k must be >= 1")
    pts = _points(cloud)
    if pts.shape[1] < k:
        raise ValueError("need d >= k")
    cand = cliques(pts, k + 1, 2.0 * r_max)
    tree = cKDTree(pts) if len(pts) else None
    faces, radii, degenerate = [], [], 0
    for start in range(0, len(cand), chunk):
        rows = cand[start:start + chunk]
        centers, rad, bary, degen = circumspheres(pts[rows])
        degenerate += int(degen.sum())
        ok = ~degen & (rad <= r_max) & np.all(bary > INTERIOR_EPS, axis=1)
        rows, centers, rad = rows[ok], centers[ok], rad[ok]
        if len(rows):
            inside = tree.query_ball_point(centers, rad * (1 - 1e-12), return_length=True)
            empty = inside == 0
            faces.append(rows[empty])
            radii.append(rad[empty])
    faces = np.concatenate(faces) if faces else np.zeros((0, k + 1), dtype=np.int64)
    radii = np.concatenate(radii) if radii else np.zeros(0)
    return CriticalFaceReport("cech", k, faces, radii, np.ones(len(radii), dtype=np.int64), degenerate=degenerate)


# ---- Rips links ---------------------------------------------------------


def _gf2_rank(columns: list[int]) -> int:
    basis: dict[int, int] = {}
    for col in columns:
        while col:
            top = col.bit_length() - 1
            if top not in basis:
                basis[top] = col
                break
            col ^= basis[top]
    return len(basis)


def clique_simplices(adj: np.ndarray, top: int) -> list[list[tuple]]:
    """Simplices of the flag complex of ``adj`` in dimensions 0..top."""
    m = len(adj)
    layers = [[(v,) for v in range(m)]]
    for _ in range(top):
        nxt = []
        for s in layers[-1]:
            for w in range(s[-1] + 1, m):
                if all(adj[v, w] for v in s):
                    nxt.append(s + (w,))
        layers.append(nxt)
        if not nxt:
            break
    while len(layers) < top + 1:
        layers.append([])
    return layers


def reduced_betti(adj: np.ndarray, q: int) -> int:
    """Reduced Betti number β̃_q of the flag complex of ``adj`` (the empty complex has β̃_{-1} = 1)."""
    m = len(adj)
    if q == -1:
        return int(m == 0)
    if m == 0:
        return 0
    layers = clique_simplices(adj, q + 1)

    def rank(p):  # rank of the boundary map out of dimension p
        if p == 0:
            return 1
        if p > len(layers) - 1 or not layers[p]:
            return 0
        index = {s: i for i, s in enumerate(layers[p - 1])}
        cols = []
        for s in layers[p]:
            bits = 0
            for drop in range(len(s)):
                bits |= 1 << index[s[:drop] + s[drop + 1:]]
            cols.append(bits)
        return _gf2_rank(cols)

    return len(layers[q]) - rank(q) - rank(q + 1)


def link_adjacency(pts: np.ndarray, i: int, j: int, rho: float | None = None):
    if rho is None:
        rho = float(pair_distance(pts[i], pts[j]))
    ids = lens_points(pts, i, j, rho)
    sub = pts[ids]
    adj = pair_distance(sub[:, None, :], sub[None, :, :]) <= rho
    np.fill_diagonal(adj, False)
    return ids, adj


def rips_edge_multiplicity(cloud, edge, k: int) -> int:
    """F_k(e) = β̃_{k-2} of the edge's link; for k = 1 this is 1 iff the link is empty."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pts = _points(cloud)
    _, adj = link_adjacency(pts, int(edge[0]), int(edge[1]))
    return reduced_betti(adj, k - 2)


@numba.njit(cache=True)
def _dist(points, a, b, box):
    s = 0.0
    for c in range(points.shape[1]):
        delta = abs(points[a, c] - points[b, c])
        if box > 0.0 and delta > box / 2:
            delta = box - delta
        s += delta * delta
    return np.sqrt(s)


@numba.njit(cache=True)
def _empty_lens(points, pairs, indptr, nbrs, box):
    out = np.zeros(len(pairs), dtype=np.bool_)
    lengths = np.empty(len(pairs))
    for e in range(len(pairs)):
        i, j = pairs[e, 0], pairs[e, 1]
        rho = _dist(points, i, j, box)
        lengths[e] = rho
        empty = True
        for t in range(indptr[i], indptr[i + 1]):
            z = nbrs[t]
            if z != j and _dist(points, i, z, box) <= rho and _dist(points, j, z, box) <= rho:
                empty = False
                break
        out[e] = empty
    return out, lengths


def isolated_edges(points, r_max: float, box: float | None = None):
    """Edges of length <= r_max whose closed lens holds no other point (F_1(e) = 1).

    ``box`` switches to the flat torus [0, box)^d.
    """
    pts = np.ascontiguousarray(points, dtype=float)
    n = len(pts)
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0)
    tree = cKDTree(pts, boxsize=box) if box else cKDTree(pts)
    pairs = tree.query_pairs(r_max, output_type="ndarray").astype(np.int64)
    both = np.concatenate([pairs, pairs[:, ::-1]])
    both = both[np.lexsort((both[:, 1], both[:, 0]))]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, both[:, 0] + 1, 1)
    indptr = np.cumsum(indptr)
    empty, lengths = _empty_lens(pts, pairs, indptr, both[:, 1].copy(), float(box or 0.0))
    return pairs[empty], lengths[empty]


def rips_multiplicities(cloud, k: int, r_max: float) -> CriticalFaceReport:
    pts = _points(cloud)
    if k == 1:
        edges, lengths = isolated_edges(pts, r_max)
        return CriticalFaceReport("rips", 1, edges, lengths, np.ones(len(edges), dtype=np.int64))
    edges = cliques(pts, 2, r_max)
    lengths = pair_distance(pts[edges[:, 0]], pts[edges[:, 1]]) if len(edges) else np.zeros(0)
    mult = np.array([reduced_betti(link_adjacency(pts, i, j, r)[1], k - 2)
                     for (i, j), r in zip(edges, lengths)], dtype=np.int64)
    keep = mult > 0
    return CriticalFaceReport("rips", k, edges[keep], lengths[keep], mult[keep])


def critical_faces(cloud, flavor: str, k: int, r_max: float) -> CriticalFaceReport:
    if flavor == "cech":
        return cech_critical_faces(cloud, k, r_max)
    if flavor == "rips":
        return rips_multiplicities(cloud, k, r_max)
    raise ValueError(f"unknown flavor {flavor!r}")


# ---- signs from the reduction -------------------------------------------


def _longest_edge(pts, simplex) -> tuple:
    best, edge = -1.0, None
    for a, b in combinations(simplex, 2):
        r = float(pair_distance(pts[a], pts[b]))
        if r > best:
            best, edge = r, (a, b)
    return edge


def block_changes(cloud, k: int, r_max: float) -> tuple[dict, dict]:
    """Per-edge Rips homology changes: (new k-classes, killed (k-1)-classes) of each edge's block."""
    pts = _points(cloud)
    fc = build(pts, "rips", r_max, k + 1)
    dgm, _ = reduce(fc)
    plus, minus = {}, {}
    births = dgm.in_dim(k)
    for bi in births.birth_idx:
        e = _longest_edge(pts, fc.simplex(int(bi)))
        plus[e] = plus.get(e, 0) + 1
    deaths = dgm.in_dim(k - 1)
    for di in deaths.death_idx[deaths.death_idx >= 0]:
        e = _longest_edge(pts, fc.simplex(int(di)))
        minus[e] = minus.get(e, 0) + 1
    return plus, minus


def sign_split(cloud, flavor: str, k: int, r_max: float) -> CriticalFaceReport:
    """Critical faces with the split into positive (F_k^+) and negative (F_k^-) parts."""
    rep = critical_faces(cloud, flavor, k, r_max)
    pts = _points(cloud)
    if flavor == "cech":
        fc = build(pts, "cech", r_max, max(k, 1))
        _, table = reduce(fc)
        pos = np.array([table.positive[fc.index[tuple(int(v) for v in f)]] for f in rep.faces], dtype=bool)
        rep.plus = pos.astype(np.int64)
        rep.minus = (~pos).astype(np.int64)
    else:
        plus, minus = block_changes(pts, k, r_max)
        keys = [tuple(int(v) for v in e) for e in rep.faces]
        rep.plus = np.array([plus.get(e, 0) for e in keys], dtype=np.int64)
        rep.minus = np.array([minus.get(e, 0) for e in keys], dtype=np.int64)
    return rep


def fk_curve(cloud, flavor: str, k: int, lam_grid, nu: float, r_max: float | None = None,
             split: bool = False) -> CriticalFaceReport:
    """Cumulative counts of critical k-faces with ν·ρ^d <= λ along ``lam_grid``."""
    lam_grid = np.asarray(lam_grid, dtype=float)
    if np.any(np.diff(lam_grid) <= 0):
        raise ValueError("λ grid must be increasing")
    pts = _points(cloud)
    d = pts.shape[1]
    if r_max is None:
        r_max = float((lam_grid[-1] / nu) ** (1.0 / d))
    rep = sign_split(pts, flavor, k, r_max) if split else critical_faces(pts, flavor, k, r_max)
    lam = nu * rep.radii**d
    order = np.argsort(lam)
    lam_sorted = lam[order]

    def cumulative(weights):
        csum = np.concatenate([[0], np.cumsum(weights[order])])
        return csum[np.searchsorted(lam_sorted, lam_grid, side="right")]

    rep.curve = {"lambda": lam_grid, "F_k": cumulative(rep.multiplicity)}
    if split:
        rep.curve["F_k_plus"] = cumulative(rep.plus)
        rep.curve["F_k_minus"] = cumulative(rep.minus)
    return rep


def curve_csv(rep: CriticalFaceReport) -> str:
    from .persistence import format_float

    c = rep.curve
    lines = ["lambda,F_k,F_k_plus,F_k_minus"]
    for i, lam in enumerate(c["lambda"]):
        plus = str(int(c["F_k_plus"][i])) if "F_k_plus" in c else ""
        minus = str(int(c["F_k_minus"][i])) if "F_k_minus" in c else ""
        lines.append(f"{format_float(lam)},{int(c['F_k'][i])},{plus},{minus}")
    return "\n".join(lines) + "\n"


# ---- exact identities ---------------------------------------------------


@dataclass(frozen=True)
class EulerReport:
    k: int
    pi_total: int
    face_counts: tuple  # F_0, F_1, ..., F_k
    alternating_sum: int

    @property
    def holds(self) -> bool:
        return self.pi_total == self.alternating_sum


def euler_identity_check(cloud, flavor: str, k: int) -> EulerReport:
    """Π_k(ℝ) on the full filtration against Σ_j (-1)^(k-j) F_j with F_0 = |X| - 1."""
    pts = _points(cloud)
    n = len(pts)
    if n == 0:
        return EulerReport(k, 0, (0,) * (k + 1), 0)
    fc = build(pts, flavor, np.inf, k + 1)
    dgm, _ = reduce(fc)
    sub = dgm.in_dim(k)
    pi_total = int(np.sum(np.isfinite(sub.deaths)))
    counts = [n - 1] + [critical_faces(pts, flavor, j, np.inf).total for j in range(1, k + 1)]
    alt = sum((-1) ** (k - j) * f for j, f in enumerate(counts))
    return EulerReport(k, pi_total, tuple(counts), alt)


def reduction_change_simplices(cloud, flavor: str, k: int, r_max: float = np.inf) -> set:
    """k-simplices that change homology: k-births and (k-1)-deaths with birth < death."""
    pts = _points(cloud)
    fc = build(pts, flavor, r_max, k + 1)
    dgm, _ = reduce(fc)
    births = dgm.in_dim(k).birth_idx
    deaths = dgm.in_dim(k - 1).death_idx
    idx = np.concatenate([births, deaths[deaths >= 0]])
    return {fc.simplex(int(i)) for i in idx}


def forbidden_occupied(pts: np.ndarray, i: int, j: int) -> bool:
    mid = (pts[i] + pts[j]) / 2.0
    rho = float(pair_distance(pts[i], pts[j]))
    dist = pair_distance(pts, mid)
    dist[[i, j]] = np.inf
    return bool(np.any(dist <= (1 - np.sqrt(3) / 2) * rho))
