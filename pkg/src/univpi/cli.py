"""Command-line front end; every run writes ``manifest.json`` next to its outputs."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .density import DensityModel, ModelError, from_points, sample_binomial, sample_poisson
from .harness import ConfigError, ExperimentConfig, framework_condition_probe, run_universality
from .persistence import diagram_csv, format_float, pi_csv, pi_measure, reduce

FIXTURES = {
    "triangle": [[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]],
    "square": [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
    "path": [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
}
COMMANDS = ("sample", "complex", "pdgm", "pivalues", "critical", "constants", "universality", "knn", "probe")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if isinstance(raw, dict) and "command" in raw and "config" in raw:
        raw = raw["config"]  # a manifest from an earlier run
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return raw


def _number(cfg, key, default, positive=False, integer=False):
    val = cfg.get(key, default)
    if val is None:
        return None
    if val == "inf":
        val = math.inf
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise ConfigError(f"{key} must be a number")
    if positive and not val > 0:
        raise ConfigError(f"{key} must be positive")
    if integer and (val != int(val) or val < 0):
        raise ConfigError(f"{key} must be a nonnegative integer")
    return int(val) if integer else float(val)


def resolve_points(cfg: dict, seed: int) -> np.ndarray:
    if "fixture" in cfg:
        if cfg["fixture"] not in FIXTURES:
            raise ConfigError(f"unknown fixture {cfg['fixture']!r}")
        return np.array(FIXTURES[cfg["fixture"]])
    if "points" in cfg:
        pts = np.asarray(cfg["points"], dtype=float)
        if pts.ndim != 2 or not np.all(np.isfinite(pts)):
            raise ConfigError("points must be a finite 2-D array")
        return pts
    if "density" in cfg:
        try:
            model = DensityModel.from_dict(cfg["density"])
        except (ModelError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        process = cfg.get("process", "binomial")
        if process == "binomial":
            n = _number(cfg, "n", None, integer=True)
            if n is None:
                raise ConfigError("binomial sampling needs n")
            return sample_binomial(model, n, seed).points
        if process == "poisson":
            return sample_poisson(model, _number(cfg, "nu", None, positive=True), seed).points
        raise ConfigError(f"unknown process {process!r}")
    raise ConfigError("config needs one of fixture, points, density")


def _validate_common(cfg: dict, command: str) -> dict:
    out = dict(cfg)
    if command in ("complex", "pdgm", "pivalues", "critical"):
        if out.setdefault("flavor", "cech") not in ("cech", "rips"):
            raise ConfigError(f"unknown flavor {out['flavor']!r}")
        k = _number(out, "k", 1, integer=True)
        if k < 1:
            raise ConfigError("k must be >= 1")
        out["k"] = k
        r = _number(out, "r_max", math.inf, positive=True)
        out["r_max"] = "inf" if math.isinf(r) else r
        md = _number(out, "max_dim", k + 1, integer=True)
        if md < 1:
            raise ConfigError("max_dim must be >= 1")
        out["max_dim"] = md
    if command == "critical":
        grid = out.setdefault("lambda_grid", [0.5, 1.0, 2.0, 4.0])
        if any(b <= a for a, b in zip(grid, grid[1:])) or not grid:
            raise ConfigError("lambda_grid must be increasing")
        _number(out, "nu", 1.0, positive=True)
    if command == "knn":
        kp = _number(out, "k_param", 2, integer=True)
        if kp < 1:
            raise ConfigError("k_param must be >= 1")
        out["k_param"] = kp
    if command == "constants":
        for key in ("d", "k"):
            if _number(out, key, 2 if key == "d" else 1, integer=True) < 1:
                raise ConfigError(f"{key} must be >= 1")
        out.setdefault("flavor", "cech")
        out.setdefault("samples", 10**6)
    return out


def _write(out: Path, name: str, text: str):
    (out / name).write_text(text)


def run(command: str, cfg: dict, seed: int, out: Path, threads: int) -> None:
    if command in ("universality", "probe"):
        exp = ExperimentConfig.from_dict({**cfg, "outputs": str(out), "threads": threads,
                                          **({"seeds": [seed]} if "seeds" not in cfg else {})})
        out.mkdir(parents=True, exist_ok=True)
        if command == "universality":
            run_universality(exp)
        else:
            _write(out, "probe.json", json.dumps(framework_condition_probe(exp), indent=2, sort_keys=True) + "\n")
        return
    if command == "constants":
        _run_constants(cfg, seed, out)
        return
    pts = resolve_points(cfg, seed)
    out.mkdir(parents=True, exist_ok=True)
    if command == "sample":
        header = ",".join(f"x{i}" for i in range(pts.shape[1] if pts.size else 0))
        _write(out, "points.csv", header + "\n" + "".join(",".join(format_float(v) for v in p) + "\n" for p in pts))
        return
    if command == "knn":
        from .knn import build_knn, cone_cover, degree_csv

        cover = cone_cover(pts.shape[1])
        _write(out, "degrees.csv", degree_csv(build_knn(pts, cfg["k_param"]), cover.n_cones))
        return
    from .complex import build

    r = math.inf if cfg["r_max"] == "inf" else cfg["r_max"]
    if command == "critical":
        from .critical import curve_csv, fk_curve

        rep = fk_curve(pts, cfg["flavor"], cfg["k"], cfg["lambda_grid"], cfg.get("nu", 1.0),
                       None if math.isinf(r) else r, split=True)
        _write(out, "curve.csv", curve_csv(rep))
        return
    fc = build(from_points(pts, seed), cfg["flavor"], r, cfg["max_dim"])
    if command == "complex":
        _write(out, "complex.txt", fc.dump())
        return
    dgm, _ = reduce(fc)
    if command == "pdgm":
        _write(out, "diagram.csv", diagram_csv(dgm))
    else:
        dims = cfg.get("dims", [cfg["k"]])
        _write(out, "pi.csv", pi_csv([pi_measure(dgm, k, r) for k in dims]))


def _run_constants(cfg: dict, seed: int, out: Path) -> None:
    from .theory import cech_constants, rips_constants

    d, k = int(cfg.get("d", 2)), int(cfg.get("k", 1))
    if cfg["flavor"] == "cech":
        consts = cech_constants(d, k, samples=int(cfg["samples"]), seed=seed)
    else:
        consts = rips_constants(d, k, m_max=int(cfg.get("m_max", 64)), samples=int(cfg.get("beta_samples", 2000)),
                                seed=seed)
    out.mkdir(parents=True, exist_ok=True)
    _write(out, "constants.json", json.dumps(consts.to_dict(), indent=2, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="univpi", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config or an earlier manifest.json")
        p.add_argument("--seed", type=int, help="seed override (u64)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker cap for harness runs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be a u64")
        if args.threads < 1:
            raise ConfigError("threads must be >= 1")
        cfg = _validate_common({**cfg, "seed": seed}, args.command)
        if args.command not in ("universality", "probe", "constants"):
            resolve_points(cfg, seed)  # fail validation before any output exists
        elif args.command != "constants":
            ExperimentConfig.from_dict({k: v for k, v in cfg.items() if k != "seed"} | {"seeds": cfg.get("seeds", [seed])})
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    try:
        body = {k: v for k, v in cfg.items() if not (args.command in ("universality", "probe") and k == "seed")}
        run(args.command, body, seed, out, args.threads)
        manifest = {"command": args.command, "seed": seed, "version": __version__, "config": cfg}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
