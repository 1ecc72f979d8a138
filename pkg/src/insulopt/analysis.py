"""Studies built on the solvers: symmetry metrics, the symmetry-breaking
threshold, parameter sweeps, two-component concentration and the small-mass
concentration of the optimal thickness."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .eigen import minimize_auxiliary, neumann_lambda, neumann_lambda_1d, solve_1d_auxiliary
from .energy import EnergyReport, Operators, minimize_reduced
from .fem import ThicknessField, weighted_cv
from .mesh import Mesh2D, generate_two_discs
from .sparse import ConvergenceError


def symmetry_metric(mesh: Mesh2D, u) -> float:
    """Lumped-weighted coefficient of variation of ``|u|`` on the boundary.

    Zero for a radial trace on a disc.  Returns ``inf`` (the degeneracy
    sentinel) when the boundary mean is below 1e-14.
    """
    if mesh.n_components != 1:
        raise ValueError("symmetry_metric needs a single boundary component; "
                         "use component_symmetry_metrics")
    u = np.asarray(u, float)
    return weighted_cv(mesh.boundary.weights, np.abs(u[mesh.boundary.vertices]))


def component_symmetry_metrics(mesh: Mesh2D, u) -> list[float]:
    u = np.asarray(u, float)
    bv, w = mesh.boundary.vertices, mesh.boundary.weights
    comp = mesh.component_of_vertex[bv]
    return [weighted_cv(w[comp == c], np.abs(u[bv[comp == c]])) for c in range(mesh.n_components)]


# ---------------------------------------------------------------------------
# threshold

class InvalidBracketError(ValueError):
    def __init__(self, message, lam_lo=math.nan, lam_hi=math.nan, Lambda=math.nan):
        super().__init__(f"{message} (lam(m_lo)={lam_lo:.6g}, lam(m_hi)={lam_hi:.6g}, "
                         f"Lambda={Lambda:.6g})")
        self.lam_lo, self.lam_hi, self.Lambda = lam_lo, lam_hi, Lambda


@dataclass
class ThresholdResult:
    m0: float
    bracket: tuple[float, float]
    Lambda: float
    samples: list = field(default_factory=list)   # (m, lam_m, lam_m - Lambda)
    level: int | None = None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["m", "lambda_m", "lambda_m_minus_Lambda"])
            for m, lam, g in self.samples:
                wr.writerow([f"{m:.17g}", f"{lam:.17g}", f"{g:.17g}"])


def bisect_threshold(lam_of_m: Callable[[float], float], Lambda: float,
                     bracket: tuple[float, float], tol: float) -> ThresholdResult:
    """Bisection on ``g(m) = lam_m - Lambda``.

    Requires ``lam(m_lo) > Lambda > lam(m_hi)``; raises
    :class:`InvalidBracketError` with the measured values otherwise.
    """
    lo, hi = map(float, bracket)
    if not (0 < lo < hi):
        raise ValueError("bracket must satisfy 0 < m_lo < m_hi")
    if not tol > 0:
        raise ValueError("tol must be positive")
    lam_lo, lam_hi = lam_of_m(lo), lam_of_m(hi)
    samples = [(lo, lam_lo, lam_lo - Lambda), (hi, lam_hi, lam_hi - Lambda)]
    if not (lam_lo > Lambda > lam_hi):
        raise InvalidBracketError("lam_m does not cross Lambda on the bracket", lam_lo, lam_hi, Lambda)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lam = lam_of_m(mid)
        samples.append((mid, lam, lam - Lambda))
        if lam > Lambda:
            lo = mid
        else:
            hi = mid
    return ThresholdResult(0.5 * (lo + hi), (lo, hi), Lambda, samples)


def threshold_m0(mesh: Mesh2D, k: float, bracket: tuple[float, float], tol: float = 1e-2,
                 restarts: int = 2, level: int | None = None, inner_tol: float = 1e-8,
                 max_iter: int = 400, **kw) -> ThresholdResult:
    """Locate the mass ``m0`` where ``lam_m`` crosses the first nonzero
    Neumann eigenvalue of the mesh.

    Probes only need the sign of ``lam_m - Lambda``: runs stop as soon as
    they fall below ``Lambda``, and the radial start (always converged) bounds
    ``lam_m`` from above, so looser inner tolerances are safe here.
    """
    ops = Operators(mesh)
    Lambda = neumann_lambda(mesh, ops=ops)

    def lam_of_m(m):
        try:
            return minimize_auxiliary(mesh, k, m, restarts=restarts, stop_below=Lambda,
                                      tol=inner_tol, max_iter=max_iter, ops=ops, **kw).lam
        except ConvergenceError as exc:
            raise ConvergenceError(f"solver failed at probe m={m:.6g}: {exc}",
                                   exc.residual, exc.history) from exc

    res = bisect_threshold(lam_of_m, Lambda, bracket, tol)
    res.level = level
    return res


def threshold_m0_1d(k: float, bracket: tuple[float, float], L: float = 1.0, n: int = 1000,
                    tol: float = 1e-2) -> ThresholdResult:
    """Interval analogue; on (0, L) ``lam_m`` never reaches Lambda, so this
    always ends in :class:`InvalidBracketError`."""
    Lambda = neumann_lambda_1d(L, n)
    return bisect_threshold(lambda m: solve_1d_auxiliary(k, m, L, n)[0], Lambda, bracket, tol)


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class SweepRow:
    m: float
    value: float            # lambda_m (eigen) or the optimal energy (energy)
    symmetry: float
    iterations: int
    best_restart: int
    valid: bool = True
    error: str = ""


@dataclass
class SweepTable:
    mode: str
    rows: list = field(default_factory=list)

    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.rows])

    def is_monotone(self, tol: float = 1e-9) -> bool:
        v = [r.value for r in self.rows if r.valid]
        return all(b <= a + tol for a, b in zip(v, v[1:]))

    def to_csv(self, path) -> None:
        col = "lambda_m" if self.mode == "eigen" else "energy"
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["m", col, "symmetry", "iterations", "best_restart", "valid"])
            for r in self.rows:
                wr.writerow([f"{r.m:.17g}", f"{r.value:.17g}", f"{r.symmetry:.17g}",
                             r.iterations, r.best_restart, int(r.valid)])


def sweep(mesh: Mesh2D, k: float, m_grid, restarts: int = 4, mode: str = "eigen",
          f=1.0, tol: float = 1e-10, seed: int = 0) -> SweepTable:
    """One optimisation per mass in the (strictly increasing) grid.

    In eigen mode each row also starts from the previous row's minimiser,
    which makes the ``lambda_m`` column nonincreasing by construction.
    """
    m_grid = [float(m) for m in m_grid]
    if any(m <= 0 for m in m_grid) or any(b <= a for a, b in zip(m_grid, m_grid[1:])):
        raise ValueError("m_grid must be positive and strictly increasing")
    if mode not in ("eigen", "energy"):
        raise ValueError(f"unknown sweep mode {mode!r}")
    ops = Operators(mesh)
    table = SweepTable(mode)
    prev = None
    single = mesh.n_components == 1
    for m in m_grid:
        try:
            if mode == "eigen":
                rep = minimize_auxiliary(mesh, k, m, restarts=restarts, tol=tol, seed=seed,
                                         starts=() if prev is None else (prev,), ops=ops)
                prev = rep.u
                row = SweepRow(m, rep.lam, rep.symmetry if single else math.nan,
                               rep.iterations, rep.best_restart)
            else:
                rep = minimize_reduced(mesh, k, m, f, tol=tol, ops=ops)
                sym = weighted_cv(rep.h.weights, rep.h.h) if single else math.nan
                row = SweepRow(m, rep.energy, sym, rep.iterations, 0, valid=rep.converged)
        except (ConvergenceError, ValueError) as exc:
            row = SweepRow(m, math.nan, math.nan, 0, -1, valid=False, error=str(exc))
        table.rows.append(row)
    return table


# ---------------------------------------------------------------------------
# energy-problem studies

def component_mass_fractions(mesh: Mesh2D, h: ThicknessField, m: float) -> np.ndarray:
    comp = mesh.component_of_vertex[h.vertices]
    return np.array([h.weights[comp == c] @ h.h[comp == c] for c in range(mesh.n_components)]) / m


@dataclass
class TwoComponentResult:
    fractions: np.ndarray
    cv: list
    report: EnergyReport
    mesh: Mesh2D


def two_component_concentration(R1: float, R2: float, gap: float, k: float, m: float, n: int,
                                f=1.0, tol: float = 1e-12, max_outer: int = 20000) -> TwoComponentResult:
    """Optimal energy insulation of two disjoint discs; returns the share of
    insulator mass on each disc and the thickness CV on each."""
    mesh = generate_two_discs(R1, R2, gap, n)
    rep = minimize_reduced(mesh, k, m, f, tol=tol, max_outer=max_outer)
    comp = mesh.component_of_vertex[rep.h.vertices]
    cvs = [weighted_cv(rep.h.weights[comp == c], rep.h.h[comp == c]) for c in range(mesh.n_components)]
    return TwoComponentResult(component_mass_fractions(mesh, rep.h, m), cvs, rep, mesh)


def _solve_with_dirichlet(ops: Operators, diag_robin: np.ndarray, fixed: np.ndarray, b: np.ndarray):
    """Solve ``(K + diag) u = b`` with ``u = 0`` on the ``fixed`` vertices."""
    n = ops.mesh.n_vertices
    free = np.setdiff1d(np.arange(n), fixed)
    A = (ops.K + sparse.diags(diag_robin)).tocsr()[free][:, free]
    u = np.zeros(n)
    if len(free):
        u[free] = splu(A.tocsc()).solve(b[free])
    return u


def component_split_energy(mesh: Mesh2D, k: float, m: float, fractions, f=1.0) -> float:
    """Energy ``-1/2 b^T u`` when component ``c`` gets constant thickness
    carrying ``fractions[c] * m``; a component with zero share is left
    bare, i.e. held at zero temperature."""
    ops = Operators(mesh)
    b = ops.load(f)
    bv, w = ops.bv, ops.w
    comp = mesh.component_of_vertex[bv]
    diag = np.zeros(mesh.n_vertices)
    fixed = []
    for c, frac in enumerate(fractions):
        sel = comp == c
        if frac <= 0:
            fixed.append(bv[sel])
            continue
        hc = frac * m / w[sel].sum()
        diag[bv[sel]] = w[sel] / (k * hc)
    fixed = np.concatenate(fixed) if fixed else np.zeros(0, np.int64)
    u = _solve_with_dirichlet(ops, diag, fixed, b)
    return float(-0.5 * b @ u)


def dirichlet_energy(mesh: Mesh2D, f=1.0) -> float:
    """Energy of the bare body (zero temperature on the whole boundary)."""
    return component_split_energy(mesh, 1.0, 1.0, [0.0] * mesh.n_components, f)


def dirichlet_solution(mesh: Mesh2D, f=1.0, ops: Operators | None = None) -> np.ndarray:
    ops = ops or Operators(mesh)
    return _solve_with_dirichlet(ops, np.zeros(mesh.n_vertices), ops.bv, ops.load(f))


def dirichlet_normal_derivative(mesh: Mesh2D, f=1.0, ops: Operators | None = None) -> np.ndarray:
    """Outward normal derivative of the Dirichlet solution at the boundary
    vertices (aligned with ``mesh.boundary.vertices``), recovered from the
    assembly residual ``(K u0 - b)_i / w_i``."""
    ops = ops or Operators(mesh)
    b = ops.load(f)
    u0 = _solve_with_dirichlet(ops, np.zeros(mesh.n_vertices), ops.bv, b)
    r = ops.K @ u0 - b
    return r[ops.bv] / ops.w


def flux_minimizers(mesh: Mesh2D, flux, radius: float = 0.1, rel_tol: float = 1e-2) -> np.ndarray:
    """Points where the boundary flux is (to ``rel_tol``) minimal, thinned so
    that selected points are more than ``2 radius`` apart."""
    flux = np.asarray(flux, float)
    xy = mesh.vertices[mesh.boundary.vertices]
    fmin = flux.min()
    cand = np.flatnonzero(flux <= fmin + rel_tol * abs(fmin))
    cand = cand[np.argsort(flux[cand], kind="stable")]
    chosen = []
    for i in cand:
        if all(np.hypot(*(xy[i] - xy[j])) > 2 * radius for j in chosen):
            chosen.append(i)
    return xy[chosen]


@dataclass
class ConcentrationProfile:
    m: float
    profile: np.ndarray        # h_m / m at the boundary vertices
    near_fraction: float       # lumped mass of the profile within radius of the targets
    report: EnergyReport


def concentration_profile(mesh: Mesh2D, k: float, f, m_list, radius: float = 0.1,
                          tol: float = 1e-12, max_outer: int = 20000):
    """Normalised optimal thickness ``h_m / m`` for each mass, with the share
    of it lying within ``radius`` of the points where the Dirichlet flux is
    most negative.  Returns ``(profiles, target_points)``."""
    ops = Operators(mesh)
    targets = flux_minimizers(mesh, dirichlet_normal_derivative(mesh, f, ops), radius)
    xy = mesh.vertices[ops.bv]
    dist = np.min(np.hypot(xy[:, None, 0] - targets[None, :, 0], xy[:, None, 1] - targets[None, :, 1]), axis=1)
    near = dist <= radius + 1e-12
    out = []
    for m in m_list:
        rep = minimize_reduced(mesh, k, m, f, tol=tol, max_outer=max_outer, ops=ops)
        prof = rep.h.h / m
        out.append(ConcentrationProfile(float(m), prof, float(ops.w[near] @ prof[near]), rep))
    return out, targets
