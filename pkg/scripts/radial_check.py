"""Energy problem on the unit disc: convergence of the optimal temperature
to the radial formula under mesh refinement."""
import argparse
import time

import numpy as np

from insulopt.energy import minimize_reduced, radial_reference
from insulopt.fem import weighted_cv
from insulopt.mesh import generate_disc


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--levels", type=int, nargs="+", default=[3, 4, 5, 6])
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--m", type=float, default=1.0)
    args = p.parse_args()

    print("level,triangles,max_err_rel,h_cv,iterations,seconds")
    for level in args.levels:
        t0 = time.perf_counter()
        mesh = generate_disc(1.0, level)
        rep = minimize_reduced(mesh, args.k, args.m, 1.0)
        r = np.minimum(np.hypot(*mesh.vertices.T), 1.0)
        ref = radial_reference(1.0, 2, args.k, args.m, r)
        err = np.max(np.abs(rep.u - ref)) / ref.max()
        print(f"{level},{mesh.n_triangles},{err:.3e},{weighted_cv(rep.h.weights, rep.h.h):.3e},"
              f"{rep.iterations},{time.perf_counter() - t0:.2f}")


if __name__ == "__main__":
    main()
