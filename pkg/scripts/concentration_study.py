"""Small-mass behaviour of the energy problem: share of insulator near the
Dirichlet-flux minimisers on the square, and the two-disc split."""
import argparse
from pathlib import Path

import numpy as np

from insulopt.analysis import concentration_profile, two_component_concentration
from insulopt.mesh import generate_square


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--masses", type=float, nargs="+", default=[1.0, 0.3, 0.1, 0.03, 0.01])
    p.add_argument("--out", type=Path, default=Path("results/concentration"))
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    mesh = generate_square(args.n)
    masses = sorted(args.masses, reverse=True)
    profiles, targets = concentration_profile(mesh, 1.0, 1.0, masses)
    print("targets:", np.round(targets, 4).tolist())
    with open(args.out / "square_profiles.csv", "w") as fh:
        xy = mesh.vertices[mesh.boundary.vertices]
        fh.write("x,y," + ",".join(f"m={m:g}" for m in masses) + "\n")
        for i, (x, y) in enumerate(xy):
            fh.write(f"{x:.17g},{y:.17g}," + ",".join(f"{pr.profile[i]:.17g}" for pr in profiles) + "\n")
    for pr in profiles:
        print(f"m={pr.m:g} near_fraction={pr.near_fraction:.4f}")

    for R2 in (0.5, 0.8, 0.95):
        res = two_component_concentration(1.0, R2, 0.5, 1.0, 1.0, 4)
        print(f"R2={R2}: fractions={np.round(res.fractions, 6).tolist()}")


if __name__ == "__main__":
    main()
