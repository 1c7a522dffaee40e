"""Mutual-or k-nearest-neighbour graphs, cone covers and degree locality."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .density import PointCloud, from_points, make_rng

CONE_COS = math.sqrt(3) / 2  # half-angle π/6


class CoverFailure(RuntimeError):
    pass


class Unbounded(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class KnnGraph:
    k_param: int
    n: int
    edges: np.ndarray  # (m, 2), i < j, lexicographically sorted

    @property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def edge_set(self) -> set:
        return {(int(a), int(b)) for a, b in self.edges}


@dataclass(frozen=True)
class ConeCover:
    d: int
    axes: np.ndarray
    half_angle: float = math.pi / 6

    @property
    def n_cones(self) -> int:
        return len(self.axes)


def _points(cloud) -> np.ndarray:
    return cloud.points if isinstance(cloud, PointCloud) else from_points(cloud).points


def nearest(points: np.ndarray, k: int, tree: cKDTree | None = None) -> np.ndarray:
    """Indices of the k nearest other points of each point, distance ties broken by index."""
    n = len(points)
    tree = tree or cKDTree(points)
    dist, _ = tree.query(points, k=k + 1)
    reach = dist[:, -1] * (1 + 1e-12) + 1e-300
    out = np.empty((n, k), dtype=np.int64)
    for i, cand in enumerate(tree.query_ball_point(points, reach)):
        cand = np.asarray([c for c in cand if c != i], dtype=np.int64)
        dc = np.sqrt(np.sum((points[cand] - points[i]) ** 2, axis=1))
        out[i] = cand[np.lexsort((cand, dc))[:k]]
    return out


def build_knn(cloud, k_param: int) -> KnnGraph:
    pts = _points(cloud)
    n = len(pts)
    if n <= k_param:
        raise ValueError("need more points than k_param")
    nbr = nearest(pts, k_param)
    src = np.repeat(np.arange(n), k_param)
    pairs = np.sort(np.stack([src, nbr.ravel()], axis=1), axis=1)
    pairs = np.unique(pairs, axis=0)
    return KnnGraph(k_param, n, pairs)


def _covered(axes: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    return np.max(dirs @ axes.T, axis=1) >= CONE_COS - 1e-12


def cone_cover(d: int, check_samples: int = 200_000, seed: int = 0) -> ConeCover:
    """d = 2: six axes 60° apart; d >= 3: greedy cover of a dense direction sample."""
    rng = make_rng(seed, d)
    if d == 1:
        axes = np.array([[1.0], [-1.0]])
    elif d == 2:
        ang = 2 * math.pi * np.arange(6) / 6
        axes = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        pool = rng.standard_normal((20 * check_samples, d))
        pool /= np.linalg.norm(pool, axis=1, keepdims=True)
        # greedy: cover with a slightly smaller cap so sampling gaps are absorbed
        chosen, open_ = [], np.ones(len(pool), dtype=bool)
        inner = math.cos(math.pi / 6 * 0.9)
        while open_.any():
            axis = pool[np.flatnonzero(open_)[0]]
            chosen.append(axis)
            open_ &= pool @ axis < inner
        axes = np.array(chosen)
    dirs = rng.standard_normal((check_samples, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    if not _covered(axes, dirs).all():
        raise CoverFailure("sampled direction outside every cone")
    return ConeCover(d, axes)


def cone_members(points: np.ndarray, x_index: int, cover: ConeCover) -> np.ndarray:
    """Boolean (n, N) table: point j lies in cone i at apex x (apex excluded)."""
    diff = points - points[x_index]
    norm = np.sqrt(np.sum(diff**2, axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        cosines = (diff @ cover.axes.T) / norm[:, None]
    member = cosines >= CONE_COS
    member[x_index] = False
    return member


def locality_radius(cloud, x_index: int, cover: ConeCover, k_param: int) -> float:
    """Twice the smallest radius at which every cone at x holds k_param + 1 points."""
    pts = _points(cloud)
    member = cone_members(pts, x_index, cover)
    dist = np.sqrt(np.sum((pts - pts[x_index]) ** 2, axis=1))
    need = []
    for i in range(cover.n_cones):
        r = np.sort(dist[member[:, i]])
        if len(r) < k_param + 1:
            raise Unbounded(f"cone {i} at vertex {x_index} holds only {len(r)} points")
        need.append(r[k_param])
    return 2.0 * float(max(need))


def local_degree(points: np.ndarray, x_index: int, k_param: int, radius: float) -> int:
    """Degree of x in the k-NN graph of the points inside the closed ball B_radius(x)."""
    dist = np.sqrt(np.sum((points - points[x_index]) ** 2, axis=1))
    ids = np.flatnonzero(dist <= radius * (1 + 1e-12))
    sub = points[ids]
    if len(sub) <= k_param:
        return len(sub) - 1
    local = int(np.flatnonzero(ids == x_index)[0])
    nbr = nearest(sub, k_param)
    adjacent = set(nbr[local].tolist()) | set(np.flatnonzero(np.any(nbr == local, axis=1)).tolist())
    return len(adjacent)


def degree_distribution(g: KnnGraph, n_cones: int | None = None) -> np.ndarray:
    """p̂_ℓ for ℓ = k .. k·N (index 0 is ℓ = k)."""
    top = g.k_param * (n_cones or 6)
    counts = np.bincount(g.degrees, minlength=top + 1)
    if len(counts) > top + 1:
        raise ValueError("degree exceeds the cone bound")
    return counts[g.k_param:] / g.n


def degree_csv(g: KnnGraph, n_cones: int | None = None) -> str:
    p = degree_distribution(g, n_cones)
    counts = np.bincount(g.degrees, minlength=g.k_param + len(p))[g.k_param:]
    lines = ["ell,count,fraction"]
    for i, frac in enumerate(p):
        lines.append(f"{g.k_param + i},{int(counts[i])},{float(frac)!r}")
    return "\n".join(lines) + "\n"


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    size = max(len(p), len(q))
    p = np.pad(p, (0, size - len(p)))
    q = np.pad(q, (0, size - len(q)))
    return 0.5 * float(np.abs(p - q).sum())
