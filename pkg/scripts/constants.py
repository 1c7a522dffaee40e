"""Limit constants F_k^* and total masses for small (d, k).

    python scripts/constants.py --samples 1000000
"""
import argparse
import json

from univpi.theory import cech_constants, rips_constants, total_pi_mass


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=10**6)
    parser.add_argument("--beta-samples", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    rows = []
    for d in (2, 3):
        f_cech = {}
        for k in range(1, d + 1):
            c = cech_constants(d, k, samples=0 if k == 1 else args.samples, seed=args.seed)
            f_cech[k] = c.f_star
            rows.append({"flavor": "cech", "d": d, "k": k, "f_star": c.f_star, "stderr": c.f_star_stderr,
                         "v_dk": c.v_dk, "gamma_dk": c.gamma_dk})
        for k in range(1, d + 1):
            rows.append({"flavor": "cech", "d": d, "k": k, "total_mass": total_pi_mass(d, k, "cech", f_cech)})
        r1 = rips_constants(d, 1)
        r2 = rips_constants(d, 2, samples=args.beta_samples, seed=args.seed)
        rows.append({"flavor": "rips", "d": d, "k": 1, "f_star": r1.f_star})
        rows.append({"flavor": "rips", "d": d, "k": 2, "f_star": r2.f_star, "stderr": r2.f_star_stderr})
        rows.append({"flavor": "rips", "d": d, "k": 1, "total_mass": total_pi_mass(d, 1, "rips")})
    print(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
