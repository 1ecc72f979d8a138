"""lambda_m (or the optimal energy) over a geometric mass grid on the disc
and the square; writes one CSV per domain."""
import argparse
from pathlib import Path

import numpy as np

from insulopt.analysis import sweep
from insulopt.mesh import generate_disc, generate_square


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--mode", choices=["eigen", "energy"], default="eigen")
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--m-min", type=float, default=0.05)
    p.add_argument("--m-max", type=float, default=20.0)
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--out", type=Path, default=Path("results/sweep"))
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    grid = np.geomspace(args.m_min, args.m_max, args.points)
    for name, mesh in (("disc", generate_disc(1.0, 4)), ("square", generate_square(16))):
        table = sweep(mesh, args.k, grid, restarts=args.restarts, mode=args.mode)
        table.to_csv(args.out / f"{name}_{args.mode}.csv")
        print(f"{name}: monotone={table.is_monotone()} values={np.round(table.values(), 5).tolist()}")


if __name__ == "__main__":
    main()
