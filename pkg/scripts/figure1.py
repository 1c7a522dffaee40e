"""π-value distributions for three densities at desk scale, with pairwise KS tests.

    python scripts/figure1.py --n 5000 --seeds 5 --out results/figure1
"""
import argparse
import json

from univpi.density import make_density
from univpi.harness import ExperimentConfig, run_universality


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=5000)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--flavor", choices=["cech", "rips"], default="cech")
    parser.add_argument("--k", type=int, default=1)
    parser.add_argument("--policy", choices=["auto", "binomial", "poisson"], default="poisson")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", default="results/figure1")
    args = parser.parse_args()
    cfg = ExperimentConfig(
        d=2, k=args.k, flavor=args.flavor, n=args.n, r_max_policy=args.policy,
        densities=[make_density(kind, 2) for kind in ("uniform_cube", "annulus_beta", "gaussian")],
        seeds=list(range(args.seeds)), outputs=args.out, threads=args.threads,
    )
    report = run_universality(cfg)
    print(json.dumps({"comparisons": report.comparisons, "mass_per_point": report.mass_per_point}, indent=2))


if __name__ == "__main__":
    main()
