"""Density models, seeded samplers and the r_max policies."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .geometry import sphere_area

KINDS = ("uniform_cube", "piecewise_constant", "annulus_beta", "gaussian", "radial_exp", "power_law")
PARAMS = {
    "uniform_cube": set(),
    "piecewise_constant": {"grid", "weights"},
    "annulus_beta": {"inner", "outer", "shape"},
    "gaussian": {"covariance"},
    "radial_exp": {"alpha"},
    "power_law": {"alpha"},
}


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class DensityModel:
    kind: str
    d: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown density kind {self.kind!r}")
        if self.d < 1:
            raise ModelError("dimension must be >= 1")
        p = self.params
        unknown = set(p) - PARAMS[self.kind] - {"label"}
        if unknown:
            raise ModelError(f"unknown parameters {sorted(unknown)} for {self.kind}")
        if self.kind == "piecewise_constant":
            w = np.asarray(p["weights"], dtype=float)
            if w.size != p["grid"] ** self.d or np.any(w < 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-9):
                raise ModelError("piecewise_constant needs grid**d nonnegative weights summing to 1")
        if self.kind == "annulus_beta" and not 0 <= p["inner"] < p["outer"]:
            raise ModelError("annulus_beta needs 0 <= inner < outer")
        if self.kind == "power_law" and p["alpha"] <= self.d:
            raise ModelError("power_law needs alpha > d")
        if self.kind == "radial_exp" and p["alpha"] <= 0:
            raise ModelError("radial_exp needs alpha > 0")

    @property
    def type_tag(self) -> str:
        if self.kind in ("uniform_cube", "piecewise_constant"):
            return "I"
        if self.kind == "annulus_beta":
            return "I" if self.params["shape"] == 1 else "II"
        return "III"

    @property
    def name(self) -> str:
        return self.params.get("label", self.kind)

    @property
    def radial(self) -> bool:
        return self.kind in ("annulus_beta", "radial_exp", "power_law") or (
            self.kind == "gaussian" and self.params.get("covariance") is None
        )

    def to_dict(self) -> dict:
        return {"kind": self.kind, "d": self.d, **self.params}

    @classmethod
    def from_dict(cls, spec: dict) -> "DensityModel":
        spec = dict(spec)
        try:
            kind, d = spec.pop("kind"), int(spec.pop("d"))
        except KeyError as exc:
            raise ModelError(f"density spec missing {exc}") from None
        return make_density(kind, d, **spec)


def make_density(kind: str, d: int, **params) -> DensityModel:
    defaults = {
        "annulus_beta": {"inner": 0.5, "outer": 1.0, "shape": 2.0},
        "radial_exp": {"alpha": 1.0},
        "power_law": {"alpha": d + 2.0},
        "piecewise_constant": {"grid": 2},
    }
    merged = {**defaults.get(kind, {}), **params}
    if kind == "piecewise_constant" and "weights" not in merged:
        cells = merged["grid"] ** d
        merged["weights"] = [1.0 / cells] * cells
    return DensityModel(kind, d, merged)


def _gaussian_factor(model: DensityModel) -> np.ndarray:
    cov = model.params.get("covariance")
    if cov is None:
        return np.eye(model.d)
    return np.linalg.cholesky(np.asarray(cov, dtype=float))


def radial_profile(model: DensityModel, r):
    """f as a function of |x| (or of |L^-1 x| for a correlated gaussian)."""
    r = np.asarray(r, dtype=float)
    d, p = model.d, model.params
    if model.kind == "gaussian":
        det = np.prod(np.diag(_gaussian_factor(model)))
        return np.exp(-0.5 * r**2) / ((2 * math.pi) ** (d / 2) * det)
    if model.kind == "radial_exp":
        a = p["alpha"]
        norm = sphere_area(d - 1) * math.gamma(d / a) / a
        return np.exp(-(r**a)) / norm
    if model.kind == "power_law":
        a = p["alpha"]
        norm = sphere_area(d - 1) * (math.pi / a) / math.sin(math.pi * d / a)
        return 1.0 / ((1.0 + r**a) * norm)
    if model.kind == "annulus_beta":
        lo, hi, s = p["inner"], p["outer"], p["shape"]
        t = (r - lo) / (hi - lo)
        inside = (t > 0) & (t < 1)
        tt = np.clip(t, 1e-300, 1 - 1e-16)
        radial_pdf = np.exp((s - 1) * (np.log(tt) + np.log1p(-tt)) - special.betaln(s, s)) / (hi - lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = radial_pdf / (sphere_area(d - 1) * r ** (d - 1))
        return np.where(inside, out, 0.0)
    raise ModelError(f"{model.kind} is not radial")


def eval_density(model: DensityModel, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.d:
        raise ModelError("point dimension does not match the model")
    if model.kind == "uniform_cube":
        out = np.all((x >= 0) & (x <= 1), axis=1).astype(float)
    elif model.kind == "piecewise_constant":
        m = model.params["grid"]
        w = np.asarray(model.params["weights"], dtype=float)
        inside = np.all((x >= 0) & (x <= 1), axis=1)
        cell = np.clip((x * m).astype(int), 0, m - 1)
        flat = np.ravel_multi_index(cell.T, (m,) * model.d)
        out = np.where(inside, w[flat] * m**model.d, 0.0)
    elif model.kind == "gaussian":
        u = np.linalg.solve(_gaussian_factor(model), x.T).T
        out = radial_profile(model, np.sqrt(np.sum(u**2, axis=1)))
    else:
        out = radial_profile(model, np.sqrt(np.sum(x**2, axis=1)))
    return float(out[0]) if single else out


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by (seed, *stream)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def _directions(rng, n, d):
    v = rng.standard_normal((n, d))
    return v / np.sqrt(np.sum(v**2, axis=1, keepdims=True))


def draw_points(model: DensityModel, n: int, rng: np.random.Generator) -> np.ndarray:
    d, p = model.d, model.params
    if n == 0:
        return np.zeros((0, d))
    if model.kind == "uniform_cube":
        return rng.random((n, d))
    if model.kind == "piecewise_constant":
        m = p["grid"]
        w = np.asarray(p["weights"], dtype=float)
        cells = rng.choice(w.size, size=n, p=w / w.sum())
        corner = np.stack(np.unravel_index(cells, (m,) * d), axis=1)
        return (corner + rng.random((n, d))) / m
    if model.kind == "gaussian":
        return rng.standard_normal((n, d)) @ _gaussian_factor(model).T
    dirs = _directions(rng, n, d)
    if model.kind == "annulus_beta":
        r = p["inner"] + (p["outer"] - p["inner"]) * rng.beta(p["shape"], p["shape"], n)
    elif model.kind == "radial_exp":
        r = rng.gamma(d / p["alpha"], 1.0, n) ** (1 / p["alpha"])
    else:  # power_law: |x|^alpha is beta-prime(d/alpha, 1 - d/alpha)
        ratio = rng.gamma(d / p["alpha"], 1.0, n) / rng.gamma(1 - d / p["alpha"], 1.0, n)
        r = ratio ** (1 / p["alpha"])
    return dirs * r[:, None]


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    seed: int
    model: DensityModel | None = None
    process: str = "binomial"
    intensity: float = 0.0

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)


def from_points(points, seed: int = 0) -> PointCloud:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return PointCloud(pts, seed, None, "fixed", float(len(pts)))


def sample_binomial(model: DensityModel, n: int, seed: int, trial: int = 0) -> PointCloud:
    if n < 0:
        raise ModelError("n must be nonnegative")
    return PointCloud(draw_points(model, n, make_rng(seed, trial)), seed, model, "binomial", float(n))


def sample_poisson(model: DensityModel, nu: float, seed: int, trial: int = 0) -> PointCloud:
    if not nu > 0:
        raise ModelError("nu must be positive")
    rng = make_rng(seed, trial)
    n = int(rng.poisson(nu))
    return PointCloud(draw_points(model, n, rng), seed, model, "poisson", float(nu))


def rmax_policy(process: str, n: float, d: int, k: int, type_tag: str) -> float:
    """Truncation radius r_max = (Λ_max / n)^(1/d), or 1/ln n for Type III."""
    if n <= 1 or d < 1 or k < 1:
        raise ModelError("rmax_policy needs n > 1, d >= 1, k >= 1")
    if type_tag == "III":
        return 1.0 / math.log(n)
    if process == "binomial":
        lam_max = n ** (1.0 / (4 * (k + 2)))
    elif process == "poisson":
        lam_max = n ** (1.0 / (d * k + 2))
    else:
        raise ModelError(f"unknown process {process!r}")
    return (lam_max / n) ** (1.0 / d)
