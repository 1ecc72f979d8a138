"""Symmetry-breaking threshold of the decay-rate problem on the unit disc at
several mesh levels, next to the constant-thickness estimate P / (k Lambda)."""
import argparse
from pathlib import Path

from insulopt.analysis import threshold_m0
from insulopt.mesh import generate_disc


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--levels", type=int, nargs="+", default=[3, 4, 5])
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--bracket", type=float, nargs=2, default=[0.25, 8.0])
    p.add_argument("--tol", type=float, default=2e-3)
    p.add_argument("--out", type=Path, default=Path("results/threshold"))
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    print("level,m0,bracket_lo,bracket_hi,Lambda,perimeter_over_k_Lambda")
    for level in args.levels:
        mesh = generate_disc(1.0, level)
        res = threshold_m0(mesh, args.k, tuple(args.bracket), tol=args.tol, level=level)
        res.to_csv(args.out / f"threshold_level{level}.csv")
        est = mesh.perimeter() / (args.k * res.Lambda)
        print(f"{level},{res.m0:.6f},{res.bracket[0]:.6f},{res.bracket[1]:.6f},"
              f"{res.Lambda:.6f},{est:.6f}")


if __name__ == "__main__":
    main()
