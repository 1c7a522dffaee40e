"""k-NN degree distributions under three densities and their total-variation distances.

    python scripts/knn_degrees.py --n 5000 --seeds 10 --k 2
"""
import argparse
from itertools import combinations

import numpy as np

from univpi.density import make_density, sample_binomial
from univpi.knn import build_knn, degree_distribution, total_variation

KINDS = ("uniform_cube", "annulus_beta", "gaussian")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=5000)
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--k", type=int, default=2)
    args = parser.parse_args()
    dists = {}
    for kind in KINDS:
        model = make_density(kind, 2)
        dists[kind] = np.mean([degree_distribution(build_knn(sample_binomial(model, args.n, s, 10), args.k))
                               for s in range(args.seeds)], axis=0)
        print(kind, " ".join(f"{p:.4f}" for p in dists[kind]))
    for a, b in combinations(KINDS, 2):
        print(f"TV {a}/{b}: {total_variation(dists[a], dists[b]):.4f}")


if __name__ == "__main__":
    main()
