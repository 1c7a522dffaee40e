"""Π_{k,n}(ℝ)/n against the limiting total mass as n grows.

    python scripts/convergence.py --flavor rips --n 500 1000 2000 4000 --seeds 10
"""
import argparse
import json

from univpi.density import make_density
from univpi.harness import ExperimentConfig, convergence_study


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--flavor", choices=["cech", "rips"], default="rips")
    parser.add_argument("--density", default="uniform_cube")
    parser.add_argument("--n", type=int, nargs="+", default=[500, 1000, 2000, 4000])
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--process", choices=["binomial", "poisson"], default="binomial")
    args = parser.parse_args()
    cfg = ExperimentConfig(d=2, k=1, flavor=args.flavor, process=args.process, n=args.n[0],
                           densities=[make_density(args.density, 2)], seeds=list(range(args.seeds)),
                           r_max_policy="poisson")
    table = convergence_study(cfg, args.n)
    for row, dist in zip(table.rows, table.distances):
        print(f"n={row.n:>6}  mean={row.mean:.5f}  sd={row.sd:.5f}  |mean-target|={dist:.5f}")
    print(json.dumps({"target": table.target, "monotone": table.monotone}))


if __name__ == "__main__":
    main()
