"""Command-line driver.

    insulopt --mode energy --domain disc:1:6 --k 1 --m 1 --out runs/disc

Settings come from an optional ``--config`` file (INI-style sections with
flat ``key = value`` pairs) and are overridden by flags.  Every run writes
``summary.txt``, ``manifest.json`` and ``mesh.txt``; field-producing modes
add ``fields.vtk`` and ``boundary.csv``; sweep, threshold and concentration
add their CSV tables.

Exit codes: 0 success, 1 configuration error, 2 solver non-convergence.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import component_symmetry_metrics, concentration_profile, sweep, threshold_m0
from .eigen import dirichlet_lambda, minimize_auxiliary, neumann_lambda
from .energy import Operators, minimize_reduced, radial_reference
from .io import export_vtk, write_boundary_csv
from .mesh import Mesh2D, generate_disc, generate_square, generate_two_discs, load_mesh, refine, save_mesh
from .sparse import ConvergenceError

MODES = ("energy", "eigen", "threshold", "sweep", "concentration", "two-component")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    domain: str = "disc:1:4"
    mode: str = "energy"
    k: float = 1.0
    m: float = 1.0
    m_grid: str = ""              # "a:b:steps"
    grid_scale: str = "geom"      # geom | lin
    problem: str = "eigen"        # what sweep mode optimises
    f_const: float = 1.0
    tol: float = 1e-10
    max_iter: int = 3000          # outer alternating steps per run
    restarts: int = 4
    seed: int = 0
    refine: int = 0
    bracket: str = "0.25:8"       # threshold search interval "lo:hi"
    bracket_tol: float = 1e-2
    radius: float = 0.1
    out: str = "insulopt-out"

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        for name in ("k", "tol", "radius", "bracket_tol"):
            if not (getattr(self, name) > 0 and math.isfinite(getattr(self, name))):
                raise ConfigError(f"{name} must be positive")
        if self.mode in ("energy", "eigen", "two-component") and not self.m > 0:
            raise ConfigError("m must be positive")
        if not math.isfinite(self.f_const):
            raise ConfigError("f must be finite")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.restarts < 1:
            raise ConfigError("restarts must be at least 1")
        if self.refine < 0:
            raise ConfigError("refine must be nonnegative")
        if self.problem not in ("eigen", "energy"):
            raise ConfigError("problem must be eigen or energy")
        if self.grid_scale not in ("geom", "lin"):
            raise ConfigError("grid_scale must be geom or lin")
        if self.mode in ("sweep", "concentration"):
            self.masses()
        if self.mode == "threshold":
            self.bracket_pair()
        parse_domain(self.domain)

    def masses(self) -> list[float]:
        try:
            a, b, steps = self.m_grid.split(":")
            a, b, steps = float(a), float(b), int(steps)
        except ValueError:
            raise ConfigError("m-grid must look like a:b:steps") from None
        if not (0 < a and steps >= 0 and (steps <= 1 or b > a)):
            raise ConfigError("m-grid needs 0 < a < b and steps >= 0")
        if steps == 0:
            return []
        if steps == 1:
            return [a]
        grid = np.geomspace(a, b, steps) if self.grid_scale == "geom" else np.linspace(a, b, steps)
        return [float(x) for x in grid]

    def bracket_pair(self) -> tuple[float, float]:
        try:
            lo, hi = (float(x) for x in self.bracket.split(":"))
        except ValueError:
            raise ConfigError("bracket must look like lo:hi") from None
        if not 0 < lo < hi:
            raise ConfigError("bracket needs 0 < lo < hi")
        return lo, hi

    def public(self) -> dict:
        return asdict(self)


def parse_domain(spec: str):
    kind, _, rest = spec.partition(":")
    args = rest.split(":") if rest else []
    try:
        if kind == "square" and len(args) == 1:
            return kind, (int(args[0]),)
        if kind == "disc" and len(args) == 2:
            return kind, (float(args[0]), int(args[1]))
        if kind == "two-discs" and len(args) == 4:
            return kind, (float(args[0]), float(args[1]), float(args[2]), int(args[3]))
        if kind == "file" and rest:
            return kind, (rest,)
    except ValueError:
        pass
    raise ConfigError(f"bad domain {spec!r}; use square:N, disc:R:N, two-discs:R1:R2:GAP:N or file:PATH")


def build_mesh(cfg: RunConfig) -> Mesh2D:
    kind, args = parse_domain(cfg.domain)
    try:
        if kind == "square":
            mesh = generate_square(*args)
        elif kind == "disc":
            mesh = generate_disc(*args)
        elif kind == "two-discs":
            mesh = generate_two_discs(*args)
        else:
            mesh = load_mesh(args[0])
    except (ValueError, OSError) as exc:
        raise ConfigError(f"cannot build domain: {exc}") from exc
    for _ in range(cfg.refine):
        mesh = refine(mesh)
    return mesh


_FLAG_KEYS = {f.name for f in fields(RunConfig)}


def _coerce(name: str, raw):
    typ = {f.name: f.type for f in fields(RunConfig)}[name]
    try:
        if typ == "float":
            return float(raw)
        if typ == "int":
            return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {raw!r}") from None
    return str(raw)


def read_config_file(path) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = lambda s: s.strip().lower().replace("-", "_")
    try:
        with open(path) as fh:
            text = fh.read()
        # keys before the first header are allowed
        parser.read_string("[top]\n" + text)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for section in parser.sections():
        for key, val in parser.items(section):
            key = {"f": "f_const", "dir": "out"}.get(key, key)
            if key not in _FLAG_KEYS:
                raise ConfigError(f"unknown config key {key!r} in [{section}]")
            out[key] = val
    return out


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="insulopt", description="Optimal thin insulation (Robin limit) solver.")
    p.add_argument("--config", help="INI-style settings file; flags override it")
    p.add_argument("--replay", help="rerun the config recorded in a manifest.json")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--domain", help="square:N | disc:R:N | two-discs:R1:R2:GAP:N | file:PATH")
    p.add_argument("--k", type=str)
    p.add_argument("--m", type=str)
    p.add_argument("--m-grid", dest="m_grid", help="a:b:steps")
    p.add_argument("--grid-scale", dest="grid_scale", choices=("geom", "lin"))
    p.add_argument("--problem", choices=("eigen", "energy"), help="what sweep mode optimises")
    p.add_argument("--f-const", dest="f_const", type=str)
    p.add_argument("--tol", type=str)
    p.add_argument("--max-iter", dest="max_iter", type=str)
    p.add_argument("--restarts", type=str)
    p.add_argument("--seed", type=str)
    p.add_argument("--refine", type=str)
    p.add_argument("--bracket", help="threshold search interval lo:hi")
    p.add_argument("--bracket-tol", dest="bracket_tol", type=str)
    p.add_argument("--radius", type=str)
    p.add_argument("--out", help="output directory")
    return p


def config_from_args(argv=None) -> RunConfig:
    args = make_parser().parse_args(argv)
    values = {}
    if args.replay:
        try:
            values.update(json.loads(Path(args.replay).read_text())["config"])
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot replay {args.replay}: {exc}") from exc
    if args.config:
        values.update(read_config_file(args.config))
    for key in _FLAG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    summary: dict = {}
    files = ["summary.txt", "manifest.json", "mesh.txt"]
    status, partial, message = "ok", False, ""
    mesh = build_mesh(cfg)
    save_mesh(mesh, out / "mesh.txt")
    summary.update(vertices=mesh.n_vertices, triangles=mesh.n_triangles,
                   components=mesh.n_components, area=mesh.area(), perimeter=mesh.perimeter())
    try:
        files += _dispatch(cfg, mesh, out, summary)
    except ConvergenceError as exc:
        status, partial, message = "not-converged", True, str(exc)
    (out / "summary.txt").write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in summary.items()))
    manifest = {"tool": "insulopt", "version": __version__, "config": cfg.public(),
                "seed": cfg.seed, "status": status, "partial": partial, "message": message,
                "outputs": sorted(set(files))}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if status != "ok":
        print(f"insulopt: {message}", file=sys.stderr)
        return 2
    return 0


def _dispatch(cfg: RunConfig, mesh: Mesh2D, out: Path, summary: dict) -> list[str]:
    k, m, f = cfg.k, cfg.m, cfg.f_const
    written = []

    def fields_out(u, h):
        hfull = h.full(mesh.n_vertices)
        export_vtk(mesh, {"u": u, "h": hfull}, out / "fields.vtk")
        write_boundary_csv(mesh, u, hfull, out / "boundary.csv")
        written.extend(["fields.vtk", "boundary.csv"])

    if cfg.mode in ("energy", "two-component"):
        if cfg.mode == "two-component" and mesh.n_components != 2:
            raise ConfigError("two-component mode needs a two-discs domain")
        rep = minimize_reduced(mesh, k, m, f, tol=cfg.tol, max_outer=cfg.max_iter)
        if not rep.converged:
            raise ConvergenceError("alternating minimisation did not converge", rep.rel_change)
        summary.update(energy=rep.energy, reduced_objective=rep.reduced,
                       minus_half_load_dot_u=-0.5 * float(Operators(mesh).load(f) @ rep.u),
                       iterations=rep.iterations, rel_change=rep.rel_change,
                       degenerate=rep.degenerate)
        cvs = component_symmetry_metrics(mesh, rep.h.full(mesh.n_vertices))
        comp = mesh.component_of_vertex[rep.h.vertices]
        for c in range(mesh.n_components):
            sel = comp == c
            summary[f"mass_fraction_{c}"] = float(rep.h.weights[sel] @ rep.h.h[sel]) / m
            summary[f"h_cv_{c}"] = cvs[c]
        if mesh.circles is not None and mesh.n_components == 1 and f == 1.0:
            cx, cy, R = mesh.circles[0]
            r = np.minimum(np.hypot(mesh.vertices[:, 0] - cx, mesh.vertices[:, 1] - cy), R)
            ref = radial_reference(R, 2, k, m, r)
            summary["radial_max_error_rel"] = float(np.abs(rep.u - ref).max() / ref.max())
        fields_out(rep.u, rep.h)

    elif cfg.mode == "eigen":
        rep = minimize_auxiliary(mesh, k, m, restarts=cfg.restarts, tol=cfg.tol, seed=cfg.seed,
                                 max_iter=cfg.max_iter)
        summary.update(lambda_m=rep.lam, symmetry=rep.symmetry, best_restart=rep.best_restart,
                       iterations=rep.iterations, degenerate=rep.degenerate,
                       restart_lambdas=" ".join(_fmt(x) for x in rep.restart_lams))
        if mesh.n_components == 1:
            summary["neumann_Lambda"] = neumann_lambda(mesh)
        summary["dirichlet_Lambda0"] = dirichlet_lambda(mesh)
        fields_out(rep.u, rep.h)

    elif cfg.mode == "threshold":
        res = threshold_m0(mesh, k, cfg.bracket_pair(), tol=cfg.bracket_tol,
                           restarts=cfg.restarts, seed=cfg.seed)
        res.to_csv(out / "threshold.csv")
        written.append("threshold.csv")
        summary.update(m0=res.m0, bracket_lo=res.bracket[0], bracket_hi=res.bracket[1],
                       neumann_Lambda=res.Lambda, probes=len(res.samples))

    elif cfg.mode == "sweep":
        table = sweep(mesh, k, cfg.masses(), restarts=cfg.restarts, mode=cfg.problem,
                      f=f, tol=cfg.tol, seed=cfg.seed)
        table.to_csv(out / "sweep.csv")
        written.append("sweep.csv")
        summary.update(rows=len(table.rows), invalid_rows=sum(not r.valid for r in table.rows),
                       monotone=table.is_monotone())

    elif cfg.mode == "concentration":
        masses = sorted(cfg.masses(), reverse=True)
        profiles, targets = concentration_profile(mesh, k, f, masses, radius=cfg.radius)
        with open(out / "concentration.csv", "w") as fh:
            fh.write("m,near_fraction,iterations\n")
            for p in profiles:
                fh.write(f"{p.m:.17g},{p.near_fraction:.17g},{p.report.iterations}\n")
        written.append("concentration.csv")
        summary["targets"] = " ".join(f"({x:.6g},{y:.6g})" for x, y in targets)
        for p in profiles:
            summary[f"near_fraction_m={p.m:.6g}"] = p.near_fraction
    return written


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
        return run(cfg)
    except ConfigError as exc:
        print(f"insulopt: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
