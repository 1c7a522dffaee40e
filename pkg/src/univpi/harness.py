"""Experiment orchestration: universality runs, convergence studies, framework probes."""
from __future__ import annotations

import json
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .complex import build
from .density import DensityModel, ModelError, PointCloud, make_density, rmax_policy, sample_binomial, sample_poisson
from .persistence import format_float, pi_count_alpha, pi_measure, reduce


class ConfigError(ValueError):
    pass


class EmptySample(ValueError):
    pass


@dataclass
class ExperimentConfig:
    d: int = 2
    k: int = 1
    flavor: str = "cech"
    process: str = "binomial"
    n: float = 1000
    densities: list = field(default_factory=lambda: [make_density("uniform_cube", 2)])
    seeds: list = field(default_factory=lambda: [0])
    r_max: float | None = None
    r_max_policy: str = "auto"  # auto: the process's own policy; or "binomial" / "poisson"
    alpha_grid: list = field(default_factory=lambda: [1.0, 1.5, 2.0, 3.0])
    outputs: str = "out"
    threads: int = 1

    def __post_init__(self):
        self.densities = [m if isinstance(m, DensityModel) else DensityModel.from_dict(m) for m in self.densities]
        self.validate()

    def validate(self):
        if self.d < 1 or self.k < 1:
            raise ConfigError("d and k must be >= 1")
        if self.flavor not in ("cech", "rips"):
            raise ConfigError(f"unknown flavor {self.flavor!r}")
        if self.process not in ("binomial", "poisson"):
            raise ConfigError(f"unknown process {self.process!r}")
        if not self.n > 0:
            raise ConfigError("n must be positive")
        if not self.densities:
            raise ConfigError("need at least one density")
        if any(m.d != self.d for m in self.densities):
            raise ConfigError("density dimension differs from d")
        if len(set(self.seeds)) != len(self.seeds) or not self.seeds:
            raise ConfigError("seeds must be distinct and nonempty")
        if self.r_max is not None and not self.r_max > 0:
            raise ConfigError("r_max must be positive")
        if self.r_max_policy not in ("auto", "binomial", "poisson"):
            raise ConfigError(f"unknown r_max policy {self.r_max_policy!r}")
        if any(a < 1 for a in self.alpha_grid):
            raise ConfigError("alpha values must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**raw)
        except (ModelError, KeyError, TypeError) as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["densities"] = [m.to_dict() for m in self.densities]
        return out

    def resolve_r_max(self, model: DensityModel, n: float | None = None) -> float:
        if self.r_max is not None:
            return float(self.r_max)
        process = self.process if self.r_max_policy == "auto" else self.r_max_policy
        return rmax_policy(process, n or self.n, self.d, self.k, model.type_tag)


def stream_id(model: DensityModel) -> int:
    """Stable stream index per density so trials do not depend on list order."""
    return zlib.crc32(json.dumps(model.to_dict(), sort_keys=True).encode())


def draw(cfg: ExperimentConfig, model: DensityModel, seed: int, n: float | None = None) -> PointCloud:
    n = cfg.n if n is None else n
    if cfg.process == "binomial":
        return sample_binomial(model, int(n), seed, stream_id(model))
    return sample_poisson(model, float(n), seed, stream_id(model))


def pi_values_of(points, flavor: str, k: int, r_max: float) -> np.ndarray:
    fc = build(points, flavor, r_max, k + 1)
    dgm, _ = reduce(fc)
    return pi_measure(dgm, k, r_max).pi_values


def _trial(args):
    cfg_dict, dens_index, seed, n = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    model = cfg.densities[dens_index]
    try:
        cloud = draw(cfg, model, seed, n)
        r = cfg.resolve_r_max(model, n)
        return dens_index, seed, pi_values_of(cloud.points, cfg.flavor, cfg.k, r), None
    except Exception as exc:  # reported per trial, others continue
        return dens_index, seed, None, f"{type(exc).__name__}: {exc}"


def _run_trials(cfg: ExperimentConfig, n: float | None = None, seeds=None) -> dict:
    seeds = cfg.seeds if seeds is None else seeds
    jobs = [(cfg.to_dict(), i, s, n or cfg.n) for i in range(len(cfg.densities)) for s in seeds]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(_trial, jobs))
    else:
        results = [_trial(j) for j in jobs]
    return {(i, s): (vals, err) for i, s, vals, err in results}


def ks_two_sample(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise EmptySample("both samples must be nonempty")
    return float(stats.ks_2samp(a, b, method="asymp").statistic)


def ks_critical(n1: int, n2: int, alpha: float = 1e-3) -> float:
    return math.sqrt(-0.5 * math.log(alpha / 2)) * math.sqrt((n1 + n2) / (n1 * n2))


@dataclass
class UniversalityReport:
    names: list
    pools: dict  # name -> pooled π values
    totals: dict  # name -> per-seed Π_k(ℝ)
    mass_per_point: dict  # name -> mean Π_k(ℝ)/n
    comparisons: list
    errors: list

    @property
    def partial(self) -> bool:
        return bool(self.errors)

    @property
    def passes(self) -> bool:
        return not self.partial and all(c["passes"] for c in self.comparisons)

    def to_dict(self) -> dict:
        return {
            "densities": self.names,
            "sample_sizes": {k: int(len(v)) for k, v in self.pools.items()},
            "per_seed_totals": self.totals,
            "mass_per_point": self.mass_per_point,
            "comparisons": self.comparisons,
            "errors": self.errors,
            "partial": self.partial,
            "passes": self.passes,
        }


def run_universality(cfg: ExperimentConfig, write: bool = True) -> UniversalityReport:
    results = _run_trials(cfg)
    names = [m.name for m in cfg.densities]
    if len(set(names)) != len(names):
        names = [f"{name}_{i}" for i, name in enumerate(names)]
    pools, totals, mass, errors = {}, {}, {}, []
    for i, name in enumerate(names):
        vals, counts = [], []
        for s in cfg.seeds:
            v, err = results[(i, s)]
            if err:
                errors.append({"density": name, "seed": s, "error": err})
                continue
            vals.append(v)
            counts.append(len(v))
        pools[name] = np.concatenate(vals) if vals else np.zeros(0)
        totals[name] = counts
        mass[name] = float(np.mean(counts) / cfg.n) if counts else float("nan")
    comparisons = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = pools[names[i]], pools[names[j]]
            if len(a) == 0 or len(b) == 0:
                continue
            stat, crit = ks_two_sample(a, b), ks_critical(len(a), len(b))
            comparisons.append({"a": names[i], "b": names[j], "statistic": stat, "n_a": len(a),
                                "n_b": len(b), "critical": crit, "passes": stat <= crit})
    report = UniversalityReport(names, pools, totals, mass, comparisons, errors)
    if write:
        write_universality(cfg, report)
    return report


def write_universality(cfg: ExperimentConfig, report: UniversalityReport) -> None:
    out = Path(cfg.outputs)
    out.mkdir(parents=True, exist_ok=True)
    for name, vals in report.pools.items():
        body = "dim,pi\n" + "".join(f"{cfg.k},{format_float(p)}\n" for p in vals)
        (out / f"pi_values_{name}.csv").write_text(body)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    figure_tails(report, out / "figure1.svg")


def figure_tails(report: UniversalityReport, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "univpi"
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, vals in report.pools.items():
        if len(vals) == 0:
            continue
        x = np.sort(vals)
        tail = 1.0 - np.arange(len(x)) / len(x)
        ax.loglog(x, tail, label=name)
    ax.set_xlabel("π = death/birth")
    ax.set_ylabel("fraction with π ≥ x")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


@dataclass
class ConvergenceRow:
    n: float
    mean: float
    sd: float
    values: list


@dataclass
class ConvergenceTable:
    rows: list
    target: float | None

    @property
    def distances(self) -> list:
        return [abs(r.mean - self.target) for r in self.rows] if self.target is not None else []

    @property
    def monotone(self) -> bool:
        dist = self.distances
        return all(b <= a for a, b in zip(dist, dist[1:]))

    def to_dict(self) -> dict:
        return {"target": self.target, "rows": [asdict(r) for r in self.rows], "distances": self.distances,
                "monotone": self.monotone}


def convergence_study(cfg: ExperimentConfig, n_list, target: float | None = None) -> ConvergenceTable:
    """Π_k(ℝ)/n per n for the first density, averaged over seeds."""
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError("n_list must be increasing")
    single = ExperimentConfig.from_dict({**cfg.to_dict(), "densities": [cfg.densities[0].to_dict()]})
    if target is None:
        from .theory import total_pi_mass

        target = total_pi_mass(cfg.d, cfg.k, cfg.flavor) if cfg.k == 1 else None
    rows = []
    for n in n_list:
        res = _run_trials(single, n)
        vals = []
        for s in cfg.seeds:
            v, err = res[(0, s)]
            if err:
                raise RuntimeError(err)
            vals.append(len(v) / n)
        rows.append(ConvergenceRow(n, float(np.mean(vals)), float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
                                   vals))
    return ConvergenceTable(rows, target)


def _pi_of(points, cfg, r):
    return pi_values_of(points, cfg.flavor, cfg.k, r)


def same_multiset(a: np.ndarray, b: np.ndarray, rtol: float = 1e-9) -> bool:
    return len(a) == len(b) and bool(np.allclose(np.sort(a), np.sort(b), rtol=rtol, atol=0))


def framework_condition_probe(cfg: ExperimentConfig, shift=None, scale: float = 10.0,
                              nus=(1000, 4000), grid: int = 2) -> dict:
    """Translation/scale invariance and the additivity defect of Π_k(α) on the uniform cube."""
    base = cfg.densities[0]
    if base.kind != "uniform_cube":
        raise ConfigError("framework probe needs the uniform cube as base density")
    shift = np.array(shift if shift is not None else [17.0, -3.0] + [5.0] * (cfg.d - 2))[: cfg.d]
    alpha = cfg.alpha_grid[0]
    invariance = []
    for s in cfg.seeds:
        cloud = draw(cfg, base, s)
        r = cfg.resolve_r_max(base)
        ref = _pi_of(cloud.points, cfg, r)
        moved = _pi_of(cloud.points + shift, cfg, r)
        scaled = _pi_of(cloud.points * scale, cfg, r * scale)
        invariance.append({"seed": s, "total": len(ref), "translation": same_multiset(ref, moved),
                           "scaling": same_multiset(ref, scaled)})
    defects = {}
    for nu in nus:
        per_seed = []
        for s in cfg.seeds:
            pts = sample_poisson(base, nu, s, stream_id(base)).points
            r = cfg.resolve_r_max(base, nu)
            whole = pi_count_alpha(_measure(pts, cfg, r), alpha)
            cell = np.minimum((pts * grid).astype(int), grid - 1)
            flat = np.ravel_multi_index(cell.T, (grid,) * cfg.d) if len(pts) else np.zeros(0, int)
            parts = sum(pi_count_alpha(_measure(pts[flat == c], cfg, r), alpha) for c in range(grid**cfg.d))
            per_seed.append(abs(whole - parts) / nu)
        defects[str(nu)] = float(np.mean(per_seed))
    vals = [defects[str(nu)] for nu in nus]
    return {"alpha": alpha, "invariance": invariance, "additivity_defect": defects,
            "defect_decreasing": all(b < a for a, b in zip(vals, vals[1:]))}


def _measure(points, cfg, r):
    fc = build(points, cfg.flavor, r, cfg.k + 1)
    dgm, _ = reduce(fc)
    return pi_measure(dgm, cfg.k, r)
