"""Euclidean primitives: circumspheres, minimal enclosing balls, lenses, volumes.

Single-input functions take an ``(m, d)`` array of points. The batched
variants take an ``(N, m, d)`` stack and are what the complex builders use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import integrate, special

DEGENERACY_RTOL = 1e-9
CONTAIN_RTOL = 1e-12  # relative only, so enclosing-ball tests are scale free
INTERIOR_EPS = 1e-12
FORBIDDEN_FRACTION = 1.0 - math.sqrt(3.0) / 2.0


class Degenerate(ValueError):
    """Points are affinely dependent beyond tolerance."""


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float


@dataclass(frozen=True)
class LensSpec:
    x1: np.ndarray
    x2: np.ndarray

    @property
    def rho(self) -> float:
        return float(np.sqrt(np.sum((self.x1 - self.x2) ** 2)))

    @property
    def forbidden_radius(self) -> float:
        return FORBIDDEN_FRACTION * self.rho

    @property
    def midpoint(self) -> np.ndarray:
        return (self.x1 + self.x2) / 2.0


def pair_distance(p, q):
    """Euclidean distance along the last axis; the one formula every module uses."""
    return np.sqrt(np.sum((np.asarray(p) - np.asarray(q)) ** 2, axis=-1))


def circumspheres(stack):
    """Batched circumspheres of point sets in their affine hulls.

    Returns ``(centers, radii, bary, degenerate)`` where ``bary`` holds the
    barycentric coordinates of each center with respect to its points.
    """
    stack = np.asarray(stack, dtype=float)
    n_sets, m, d = stack.shape
    if m == 1:
        return stack[:, 0, :].copy(), np.zeros(n_sets), np.ones((n_sets, 1)), np.zeros(n_sets, bool)
    if m - 1 > d:  # too many points to be affinely independent
        bary = np.zeros((n_sets, m))
        bary[:, 0] = 1.0
        return stack[:, 0, :].copy(), np.zeros(n_sets), bary, np.ones(n_sets, bool)
    # base at the vertex whose farthest neighbour is nearest (opposite the longest edge for triangles)
    spread = np.max(np.linalg.norm(stack[:, :, None, :] - stack[:, None, :, :], axis=-1), axis=2)
    perm = (np.arange(m)[None, :] + np.argmin(spread, axis=1)[:, None]) % m
    stack = np.take_along_axis(stack, perm[..., None], axis=1)
    base = stack[:, 0, :]
    edges = stack[:, 1:, :] - base[:, None, :]
    scale = np.max(np.sqrt(np.sum(edges**2, axis=-1)), axis=1)
    sv = np.linalg.svd(edges, compute_uv=False)
    degenerate = (sv[:, -1] <= DEGENERACY_RTOL * np.where(scale > 0, scale, 1.0))
    # min-norm solve of edges @ offset = |edges|^2 / 2 via QR of edges^T; keeps cond(E), the Gram form squares it
    safe = np.where(degenerate[:, None, None], np.eye(m - 1, d), edges)
    q, r = np.linalg.qr(np.swapaxes(safe, 1, 2))
    y = np.linalg.solve(np.swapaxes(r, 1, 2), 0.5 * np.sum(safe**2, axis=-1)[..., None])
    offset = (q @ y)[..., 0]
    lam = np.linalg.solve(r, y)[..., 0]
    offset[degenerate] = 0.0
    lam[degenerate] = 0.0
    centers = base + offset
    radii = pair_distance(centers, base)
    if m == 2:
        radii = pair_distance(stack[:, 0], stack[:, 1]) / 2.0
    bary = np.empty((n_sets, m))
    np.put_along_axis(bary, perm, np.concatenate([1.0 - lam.sum(axis=1, keepdims=True), lam], axis=1), axis=1)
    return centers, radii, bary, degenerate


def circumsphere(pts) -> Sphere:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    centers, radii, _, degenerate = circumspheres(pts[None])
    if degenerate[0]:
        raise Degenerate(f"{len(pts)} points are affinely dependent")
    return Sphere(centers[0], float(radii[0]))


def barycentric(point, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    edges = pts[1:] - pts[0]
    lam, *_ = np.linalg.lstsq(edges.T, np.asarray(point, dtype=float) - pts[0], rcond=None)
    return np.concatenate([[1.0 - lam.sum()], lam])


def center_in_open_simplex(sphere: Sphere, pts) -> bool:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if len(pts) == 1:
        return True
    _, _, _, degenerate = circumspheres(pts[None])
    if degenerate[0]:
        raise Degenerate(f"{len(pts)} points are affinely dependent")
    return bool(np.all(barycentric(sphere.center, pts) > INTERIOR_EPS))


def meb_radii(stack):
    """Batched minimal-enclosing-ball radii by exhaustive search over support subsets."""
    stack = np.asarray(stack, dtype=float)
    n_sets, m, _ = stack.shape
    best = np.zeros(n_sets) if m == 1 else np.full(n_sets, np.inf)
    for size in range(2, m + 1):
        for subset in combinations(range(m), size):
            centers, radii, _, degenerate = circumspheres(stack[:, subset, :])
            others = [i for i in range(m) if i not in subset]
            ok = ~degenerate
            if others:
                dist = pair_distance(stack[:, others, :], centers[:, None, :])
                ok &= np.all(dist <= radii[:, None] * (1 + CONTAIN_RTOL), axis=1)
            best = np.where(ok & (radii < best), radii, best)
    return best


def min_enclosing_ball(pts) -> Sphere:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    m = len(pts)
    if m == 1:
        return Sphere(pts[0].copy(), 0.0)
    best = None
    for size in range(2, m + 1):
        for subset in combinations(range(m), size):
            centers, radii, _, degenerate = circumspheres(pts[None, subset, :])
            if degenerate[0]:
                continue
            r = float(radii[0])
            if np.all(pair_distance(pts, centers[0]) <= r * (1 + CONTAIN_RTOL)):
                if best is None or r < best.radius:
                    best = Sphere(centers[0], r)
    return best


def in_forbidden_region(y, lens: LensSpec) -> bool:
    return bool(pair_distance(y, lens.midpoint) <= lens.forbidden_radius)


def ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def sphere_area(j: int) -> float:
    """Surface measure of the unit sphere S^j in R^(j+1); S^0 has counting measure 2."""
    return 2 * math.pi ** ((j + 1) / 2) / math.gamma((j + 1) / 2)


def lens_volume(d: int) -> float:
    """Volume of B_1(0) ∩ B_1(e_1)."""
    if d == 1:
        return 1.0
    if d == 2:
        return 2 * math.pi / 3 - math.sqrt(3) / 2
    if d == 3:
        return 5 * math.pi / 12
    # two caps of height 1/2, each sliced into (d-1)-balls
    section = ball_volume(d - 1)
    cap, _ = integrate.quad(lambda x: section * (1 - x * x) ** ((d - 1) / 2), 0.5, 1.0, epsrel=1e-8)
    return 2 * cap


def incomplete_gamma_lower(k: int, x):
    """Non-regularized lower incomplete gamma γ(k, x)."""
    return special.gamma(k) * special.gammainc(k, x)
