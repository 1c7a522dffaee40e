"""Limit constants and curves: V_{d,k}, Γ_{d,k}, F_k^◇, F_k^*, β*, Π_k^*(ℝ).

The Grassmannian volume uses the normalization under which the
Blaschke–Petkantschin change of variables, with Jacobian factor
``ρ^{dk-1} (k! V_simp(θ))^{d-k+1}`` and the surface measure on S^{k-1},
preserves Lebesgue measure. For k = 1, d = 2 this gives Γ = π: writing
x_{1,2} = c ∓ ρu, |dx| = 4ρ dρ dφ dc while the sign patterns of θ
double-cover the half-circle of directions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.sparse.csgraph import connected_components

from .density import DensityModel, make_rng, radial_profile
from .geometry import ball_volume, circumspheres, incomplete_gamma_lower, lens_volume, pair_distance, sphere_area


class IntegrationFailure(RuntimeError):
    pass


class TruncationWarning(UserWarning):
    pass


def grassmannian_volume(d: int, k: int) -> float:
    """Γ_{d,k} = Π_{i<k} |S^{d-1-i}| / |S^{k-1-i}|."""
    if not 1 <= k <= d:
        raise ValueError("need 1 <= k <= d")
    out = 1.0
    for i in range(k):
        out *= sphere_area(d - 1 - i) / sphere_area(k - 1 - i)
    return out


def simplex_volume(vertices: np.ndarray) -> np.ndarray:
    """Batched k-volume of simplices given as (N, k+1, k) stacks."""
    edges = vertices[:, 1:, :] - vertices[:, :1, :]
    k = edges.shape[1]
    return np.abs(np.linalg.det(edges)) / math.factorial(k)


def _sphere_points(rng, shape, k):
    if k == 1:
        return rng.choice(np.array([-1.0, 1.0]), size=shape + (1,))
    v = rng.standard_normal(shape + (k,))
    return v / np.sqrt(np.sum(v**2, axis=-1, keepdims=True))


def vdk_integrand(theta: np.ndarray, d: int) -> np.ndarray:
    """h(θ)·V_simp(θ)^{d-k+1} for stacks θ of shape (N, k+1, k)."""
    k = theta.shape[-1]
    if k == 1:
        t = theta[:, :, 0]
        h = np.sign(t[:, 0]) != np.sign(t[:, 1])
        vol = np.abs(t[:, 0] - t[:, 1])
    else:
        _, _, bary, degen = circumspheres(theta)
        h = ~degen & np.all(bary > 0, axis=1)
        vol = simplex_volume(theta)
    return np.where(h, vol ** (d - k + 1), 0.0)


def vdk_exact_k1(d: int) -> float:
    """V_{d,1} by enumerating the four sign patterns on S^0."""
    total = 0.0
    for a in (-1.0, 1.0):
        for b in (-1.0, 1.0):
            total += float(vdk_integrand(np.array([[[a], [b]]]), d)[0])
    return total


def vdk_estimate(d: int, k: int, samples: int = 10**6, seed: int = 0, batches: int = 20):
    """Monte Carlo V_{d,k} with a batch-means standard error."""
    if samples < 10**4:
        raise ValueError("use at least 10^4 samples")
    rng = make_rng(seed, d, k)
    measure = sphere_area(k - 1) ** (k + 1)
    per = samples // batches
    means = np.array([
        vdk_integrand(_sphere_points(rng, (per, k + 1), k), d).mean() * measure for _ in range(batches)
    ])
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(batches))


@dataclass
class LimitConstants:
    d: int
    k: int
    flavor: str
    omega_d: float
    kappa_d: float
    gamma_dk: float = 0.0
    v_dk: float = 0.0
    v_dk_stderr: float = 0.0
    f_star: float = 0.0
    f_star_stderr: float = 0.0
    beta_star_table: dict = field(default_factory=dict)  # m -> (mean, stderr)

    def to_dict(self) -> dict:
        out = {key: getattr(self, key) for key in
               ("d", "k", "flavor", "omega_d", "kappa_d", "gamma_dk", "v_dk", "v_dk_stderr", "f_star", "f_star_stderr")}
        out["beta_star_table"] = {str(m): list(v) for m, v in sorted(self.beta_star_table.items())}
        return out


def _cech_prefactor(c: LimitConstants) -> float:
    d, k = c.d, c.k
    return c.v_dk * c.gamma_dk * math.factorial(k) ** (d - k + 1) / (d * c.omega_d**k)


def cech_constants(d: int, k: int, samples: int = 10**6, seed: int = 0) -> LimitConstants:
    c = LimitConstants(d, k, "cech", ball_volume(d), lens_volume(d), grassmannian_volume(d, k))
    if k == 1 and samples == 0:
        c.v_dk, c.v_dk_stderr = vdk_exact_k1(d), 0.0
    else:
        c.v_dk, c.v_dk_stderr = vdk_estimate(d, k, samples, seed)
    c.f_star = cech_limit_const(d, k, c)
    c.f_star_stderr = c.f_star * c.v_dk_stderr / c.v_dk
    return c


def cech_limit_const(d: int, k: int, consts: LimitConstants) -> float:
    return _cech_prefactor(consts) / (k * (k + 1))


def density_integral(model: DensityModel, g, rtol: float = 1e-6) -> float:
    """∫ f(c) g(f(c)) dc, closed form for piecewise-constant models, radial quadrature otherwise."""
    if model.kind == "uniform_cube":
        return float(g(1.0))
    if model.kind == "piecewise_constant":
        w = np.asarray(model.params["weights"], dtype=float)
        cells = model.params["grid"] ** model.d
        return float(sum(wi * g(wi * cells) for wi in w if wi > 0))
    area = sphere_area(model.d - 1)

    def integrand(r):
        f = float(radial_profile(model, r))
        return area * r ** (model.d - 1) * f * g(f) if f > 0 else 0.0

    if model.kind == "annulus_beta":
        lo, hi = model.params["inner"], model.params["outer"]
        pieces = [(lo, hi)]
    else:
        pieces = [(0.0, 1.0), (1.0, 10.0), (10.0, np.inf)]
    total, err = 0.0, 0.0
    for a, b in pieces:
        val, e = integrate.quad(integrand, a, b, epsrel=rtol, limit=200)
        total, err = total + val, err + e
    if not np.isfinite(total) or err > max(1e-8, 10 * rtol * abs(total)):
        raise IntegrationFailure(f"quadrature error {err:.3g} for {model.kind} (value {total:.6g})")
    return total


def cech_limit_curve(lam: float, model: DensityModel, d: int, k: int, consts: LimitConstants) -> float:
    """F_k^◇(λ; f) for the Čech filtration."""
    pre = _cech_prefactor(consts) / math.factorial(k + 1)
    omega = consts.omega_d
    return pre * density_integral(model, lambda f: float(incomplete_gamma_lower(k, omega * f * lam)))


def rips_limit_curve_k1(lam: float, model: DensityModel, d: int) -> float:
    """F_1^◇(λ; f) for the Rips filtration."""
    omega, kappa = ball_volume(d), lens_volume(d)
    return omega / (2 * kappa) * density_integral(model, lambda f: 1.0 - math.exp(-lam * f * kappa))


def sample_lens(rng, m: int, d: int) -> np.ndarray:
    """m uniform points in I_0 = B_1(0) ∩ B_1(e_1) by rejection from its bounding box."""
    half = math.sqrt(3) / 2
    out = np.empty((0, d))
    lo = np.array([0.0] + [-half] * (d - 1))
    hi = np.array([1.0] + [half] * (d - 1))
    e1 = np.zeros(d)
    e1[0] = 1.0
    while len(out) < m:
        cand = lo + (hi - lo) * rng.random((2 * m + 8, d))
        ok = (np.sum(cand**2, axis=1) <= 1) & (np.sum((cand - e1) ** 2, axis=1) <= 1)
        out = np.vstack([out, cand[ok]])
    return out[:m]


def _reduced_betti_unit_rips(pts: np.ndarray, q: int) -> int:
    adj = pair_distance(pts[:, None, :], pts[None, :, :]) <= 1.0
    np.fill_diagonal(adj, False)
    if q == 0:
        return connected_components(adj, directed=False)[0] - 1
    from .critical import reduced_betti

    return reduced_betti(adj, q)


def beta_star(m: int, d: int, k: int, samples: int = 2000, seed: int = 0):
    """Monte Carlo β*_{k-2}(m): expected reduced Betti number of Rips at radius 1 on m lens points."""
    if m < 2 * (k - 1):
        raise ValueError("need m >= 2(k-1)")
    rng = make_rng(seed, m, d, k)
    q = k - 2
    vals = np.array([_reduced_betti_unit_rips(sample_lens(rng, m, d), q) for _ in range(samples)], dtype=float)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0


def rips_limit_const(d: int, k: int, consts: LimitConstants | None = None, m_max: int = 64,
                     samples: int = 2000, seed: int = 0):
    """F_k^* for Rips; for k >= 2 the truncated series and a tail estimate."""
    omega, kappa = ball_volume(d), lens_volume(d)
    scale = omega / (2 * kappa)
    if k == 1:
        return scale, 0.0
    table = consts.beta_star_table if consts is not None else {}
    for m in range(2 * (k - 1), m_max + 1):
        if m not in table:
            table[m] = beta_star(m, d, k, samples, seed)
    terms = np.array([table[m][0] for m in range(2 * (k - 1), m_max + 1)])
    errs = np.array([table[m][1] for m in range(2 * (k - 1), m_max + 1)])
    partial = float(terms.sum())
    tail = _geometric_tail(terms)
    if tail > 0.01 * partial:
        warnings.warn(f"series tail {tail:.3g} exceeds 1% of partial sum {partial:.3g}", TruncationWarning)
    return scale * partial, scale * float(np.sqrt(np.sum(errs**2)))


def _geometric_tail(terms: np.ndarray, fit: int = 8) -> float:
    last = terms[-fit:]
    if len(last) < 2 or np.any(last <= 0):
        return 0.0 if np.all(last == 0) else float(last[-1])
    ratio = math.exp(np.polyfit(np.arange(len(last)), np.log(last), 1)[0])
    return float(last[-1] * ratio / (1 - ratio)) if ratio < 1 else float("inf")


def rips_constants(d: int, k: int, m_max: int = 64, samples: int = 2000, seed: int = 0) -> LimitConstants:
    c = LimitConstants(d, k, "rips", ball_volume(d), lens_volume(d))
    c.f_star, c.f_star_stderr = rips_limit_const(d, k, c, m_max, samples, seed)
    return c


def total_pi_mass(d: int, k: int, flavor: str, f_stars: dict | None = None) -> float:
    """Π_k^*(ℝ) = Σ_{j=0}^{k} (-1)^{k-j} F_j^*, with F_0^* = 1."""
    f_stars = dict(f_stars or {})
    f_stars.setdefault(0, 1.0)
    for j in range(1, k + 1):
        if j not in f_stars:
            if flavor == "rips":
                f_stars[j] = rips_limit_const(d, j)[0]
            else:
                f_stars[j] = cech_constants(d, j, samples=0 if j == 1 else 10**6).f_star
    return sum((-1) ** (k - j) * f_stars[j] for j in range(k + 1))
