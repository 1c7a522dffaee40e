"""Čech and Vietoris–Rips filtrations truncated at r_max and max_dim, in total order."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import numba
import numpy as np
from scipy.spatial import cKDTree

from .density import PointCloud, from_points
from .geometry import meb_radii, pair_distance

FLAVORS = ("cech", "rips")
SNAP_RTOL = 1e-11  # relative; ill-conditioned support sets round to ~1e-12


@dataclass(frozen=True, eq=False)
class FilteredComplex:
    """Simplices in total order (value, dim, lexicographic vertices).

    ``verts`` is padded with -1 beyond each simplex's dimension.
    """

    points: np.ndarray
    flavor: str
    r_max: float
    max_dim: int
    verts: np.ndarray
    dims: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def simplex(self, i: int) -> tuple:
        return tuple(int(v) for v in self.verts[i, : self.dims[i] + 1])

    def simplices(self) -> list[tuple]:
        return [self.simplex(i) for i in range(len(self))]

    @cached_property
    def index(self) -> dict:
        return {s: i for i, s in enumerate(self.simplices())}

    def count(self, dim: int) -> int:
        return int(np.sum(self.dims == dim))

    @cached_property
    def boundary(self):
        """Facet positions of every simplex as CSR ``(indptr, indices)``, rows sorted."""
        n = max(len(self.points), 1)
        dims, verts = self.dims, self.verts
        indptr = np.zeros(len(self) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum(np.where(dims > 0, dims + 1, 0))
        indices = np.empty(indptr[-1], dtype=np.int64)
        prev_keys = prev_pos = None
        for p in range(self.max_dim + 1):
            pos = np.flatnonzero(dims == p)
            rows = verts[pos, : p + 1]
            if p > 0:
                facet_pos = np.empty((len(pos), p + 1), dtype=np.int64)
                for drop in range(p + 1):
                    keep = [c for c in range(p + 1) if c != drop]
                    loc = np.searchsorted(prev_keys, _encode(rows[:, keep], n))
                    facet_pos[:, drop] = prev_pos[loc]
                facet_pos.sort(axis=1)
                starts = indptr[pos]
                for c in range(p + 1):
                    indices[starts + c] = facet_pos[:, c]
            keys = _encode(rows, n)
            order = np.argsort(keys)
            prev_keys, prev_pos = keys[order], pos[order]
        return indptr, indices

    def truncate(self, r: float) -> "FilteredComplex":
        keep = self.values <= r
        return FilteredComplex(self.points, self.flavor, r, self.max_dim,
                               self.verts[keep], self.dims[keep], self.values[keep])

    def dump(self) -> str:
        lines = []
        for i in range(len(self)):
            vs = " ".join(str(v) for v in self.simplex(i))
            lines.append(f"{float(self.values[i])!r} {int(self.dims[i])} {vs}")
        return "\n".join(lines) + ("\n" if lines else "")


def _encode(rows: np.ndarray, n: int) -> np.ndarray:
    if rows.shape[1] and float(n) ** rows.shape[1] >= 2.0**62:
        raise OverflowError("too many vertices to key simplices in 64 bits")
    key = np.zeros(len(rows), dtype=np.int64)
    for c in range(rows.shape[1]):
        key = key * n + rows[:, c]
    return key


def assemble(points, flavor, r_max, max_dim, by_dim, values_by_dim) -> FilteredComplex:
    """Sort per-dimension simplex arrays into one totally ordered complex."""
    width = max_dim + 1
    blocks, dims, vals = [], [], []
    for p, rows in enumerate(by_dim):
        padded = np.full((len(rows), width), -1, dtype=np.int64)
        padded[:, : p + 1] = rows
        blocks.append(padded)
        dims.append(np.full(len(rows), p, dtype=np.int64))
        vals.append(np.asarray(values_by_dim[p], dtype=float))
    verts = np.concatenate(blocks) if blocks else np.zeros((0, width), np.int64)
    dims = np.concatenate(dims) if dims else np.zeros(0, np.int64)
    vals = np.concatenate(vals) if vals else np.zeros(0)
    keys = [verts[:, c] for c in reversed(range(width))] + [dims, vals]
    order = np.lexsort(keys)
    return FilteredComplex(np.asarray(points, float), flavor, float(r_max), max_dim,
                           verts[order], dims[order], vals[order])


@numba.njit(cache=True)
def _extend(rows, indptr, nbrs):
    """All (p+1)-cliques whose first p+1 vertices form a row of ``rows``."""
    m, width = rows.shape
    counts = np.zeros(m, dtype=np.int64)
    for pass_ in range(2):
        if pass_ == 1:
            out = np.empty((counts.sum(), width + 1), dtype=np.int64)
            fill = 0
        for s in range(m):
            last = rows[s, width - 1]
            for t in range(indptr[last], indptr[last + 1]):
                w = nbrs[t]
                ok = True
                for c in range(width - 1):
                    v = rows[s, c]
                    lo, hi = indptr[v], indptr[v + 1]
                    j = np.searchsorted(nbrs[lo:hi], w)
                    if j >= hi - lo or nbrs[lo + j] != w:
                        ok = False
                        break
                if ok:
                    if pass_ == 0:
                        counts[s] += 1
                    else:
                        for c in range(width):
                            out[fill, c] = rows[s, c]
                        out[fill, width] = w
                        fill += 1
    return out


def neighbor_pairs(points: np.ndarray, radius: float) -> np.ndarray:
    n = len(points)
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    if not np.isfinite(radius):
        return np.array(list(combinations(range(n), 2)), dtype=np.int64)
    pairs = cKDTree(points).query_pairs(radius * (1 + 1e-9), output_type="ndarray").astype(np.int64)
    pairs.sort(axis=1)
    return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]


def _forward_csr(pairs: np.ndarray, n: int):
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, pairs[:, 0] + 1, 1)
    return np.cumsum(indptr), pairs[:, 1].copy()


def rips_values(points: np.ndarray, rows: np.ndarray) -> np.ndarray:
    width = rows.shape[1]
    if width == 1:
        return np.zeros(len(rows))
    out = np.zeros(len(rows))
    for a, b in combinations(range(width), 2):
        out = np.maximum(out, pair_distance(points[rows[:, a]], points[rows[:, b]]))
    return out


def cech_values(points: np.ndarray, rows: np.ndarray, chunk: int = 200_000) -> np.ndarray:
    width = rows.shape[1]
    if width == 1:
        return np.zeros(len(rows))
    if width == 2:
        return pair_distance(points[rows[:, 0]], points[rows[:, 1]]) / 2.0
    if width == 3:
        return _triangle_meb(points, rows)
    out = np.empty(len(rows))
    for start in range(0, len(rows), chunk):
        sl = slice(start, start + chunk)
        out[sl] = meb_radii(points[rows[sl]])
    return out


def _triangle_meb(points, rows):
    """Closed form: half the longest side if not acute, else the circumradius."""
    a = pair_distance(points[rows[:, 1]], points[rows[:, 2]])
    b = pair_distance(points[rows[:, 0]], points[rows[:, 2]])
    c = pair_distance(points[rows[:, 0]], points[rows[:, 1]])
    sides = np.sort(np.stack([a, b, c], axis=1), axis=1)
    s0, s1, s2 = sides[:, 0], sides[:, 1], sides[:, 2]
    acute = s2 * s2 < s0 * s0 + s1 * s1
    prod = (s0 + s1 + s2) * (-s0 + s1 + s2) * (s0 - s1 + s2) * (s0 + s1 - s2)
    with np.errstate(divide="ignore", invalid="ignore"):
        circ = s0 * s1 * s2 / np.sqrt(prod)
    return np.where(acute & (prod > 0), np.maximum(circ, s2 / 2.0), s2 / 2.0)


def _facet_max(rows, facet_rows, facet_vals, n):
    """Largest stored value among the facets of each row; inf when a facet was cut off."""
    keys = _encode(facet_rows, n)
    order = np.argsort(keys)
    keys, sorted_vals = keys[order], facet_vals[order]
    out = np.zeros(len(rows))
    for drop in range(rows.shape[1]):
        probe = _encode(np.delete(rows, drop, axis=1), n)
        loc = np.minimum(np.searchsorted(keys, probe), max(len(keys) - 1, 0))
        found = keys[loc] == probe if len(keys) else np.zeros(len(rows), dtype=bool)
        out = np.maximum(out, np.where(found, sorted_vals[loc] if len(keys) else 0.0, np.inf))
    return out


def _build(cloud, r_max, max_dim, flavor):
    if max_dim < 1:
        raise ValueError("max_dim must be >= 1")
    points = cloud.points if isinstance(cloud, PointCloud) else from_points(cloud).points
    n = len(points)
    value_fn = rips_values if flavor == "rips" else cech_values
    pairs = neighbor_pairs(points, r_max if flavor == "rips" else 2.0 * r_max)
    edge_vals = value_fn(points, pairs)
    keep = edge_vals <= r_max
    pairs, edge_vals = pairs[keep], edge_vals[keep]
    by_dim = [np.arange(n, dtype=np.int64)[:, None], pairs]
    values = [np.zeros(n), edge_vals]
    indptr, nbrs = _forward_csr(pairs, n)
    for _p in range(2, max_dim + 1):
        if len(by_dim[-1]) == 0:
            by_dim.append(np.zeros((0, _p + 1), dtype=np.int64))
            values.append(np.zeros(0))
            continue
        rows = _extend(by_dim[-1], indptr, nbrs)
        vals = value_fn(points, rows)
        if flavor == "cech":
            if rows.shape[1] > 3:
                # a ball supported by a proper face has exactly that face's radius; the support-set
                # search only reproduces it up to rounding, so snap onto the stored facet values
                facet_max = _facet_max(rows, by_dim[-1], values[-1], n)
                vals = np.where(vals <= facet_max * (1 + SNAP_RTOL), facet_max, vals)
            keep = vals <= r_max
            rows, vals = rows[keep], vals[keep]
        by_dim.append(rows)
        values.append(vals)
    return assemble(points, flavor, r_max, max_dim, by_dim, values)


def build_rips(cloud, r_max: float, max_dim: int) -> FilteredComplex:
    return _build(cloud, r_max, max_dim, "rips")


def build_cech(cloud, r_max: float, max_dim: int) -> FilteredComplex:
    return _build(cloud, r_max, max_dim, "cech")


def build(cloud, flavor: str, r_max: float, max_dim: int) -> FilteredComplex:
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}")
    return _build(cloud, r_max, max_dim, flavor)


def lens_points(points: np.ndarray, i: int, j: int, rho: float | None = None) -> np.ndarray:
    """Indices of points in the closed lens B_rho(x_i) ∩ B_rho(x_j), endpoints excluded."""
    if rho is None:
        rho = float(pair_distance(points[i], points[j]))
    di = pair_distance(points, points[i])
    dj = pair_distance(points, points[j])
    mask = (di <= rho) & (dj <= rho)
    mask[[i, j]] = False
    return np.flatnonzero(mask)


def link_of_edge(fc: FilteredComplex, edge, at_value: float | None = None) -> FilteredComplex:
    """Rips complex at radius rho on the lens points of ``edge`` (vertex ids are cloud ids)."""
    i, j = edge
    rho = float(pair_distance(fc.points[i], fc.points[j])) if at_value is None else at_value
    ids = lens_points(fc.points, i, j, rho)
    return rips_on_subset(fc.points, ids, rho, fc.max_dim)


def rips_on_subset(points, ids, rho, max_dim) -> FilteredComplex:
    """Rips complex at radius rho on the subset ``ids``, labelled by original indices."""
    ids = np.asarray(ids, dtype=np.int64)
    sub = build_rips(points[ids], rho, max(max_dim, 1))
    verts = np.where(sub.verts >= 0, ids[np.maximum(sub.verts, 0)], -1)
    return FilteredComplex(sub.points, "rips", rho, sub.max_dim, verts, sub.dims, sub.values)


def combinatorial_link(fc: FilteredComplex, edge, at_value: float) -> set:
    """Link of ``edge`` in the sub-complex of values <= at_value, via stars."""
    e = set(edge)
    link = set()
    for i in range(len(fc)):
        if fc.values[i] > at_value:
            continue
        s = fc.simplex(i)
        if e.issubset(s) and len(s) > 2:
            link.add(tuple(v for v in s if v not in e))
    return link
