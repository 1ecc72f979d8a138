"""Legacy-VTK and CSV writers for meshes and per-vertex fields."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import Mesh2D

VTK_TRIANGLE = 5


def export_vtk(mesh: Mesh2D, fields: dict, path, title: str = "insulopt fields") -> None:
    """Write an ASCII legacy VTK 3.0 unstructured grid with point scalars."""
    checked = {}
    for name, values in fields.items():
        arr = np.asarray(values, dtype=float)
        if arr.shape != (mesh.n_vertices,):
            raise ValueError(f"field {name!r} has shape {arr.shape}, expected ({mesh.n_vertices},)")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"field {name!r} contains non-finite values")
        if not name or any(c.isspace() for c in name):
            raise ValueError(f"field name {name!r} must be a single token")
        checked[name] = arr

    nv, nt = mesh.n_vertices, mesh.n_triangles
    out = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
    out += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.vertices]
    out.append(f"CELLS {nt} {4 * nt}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    out.append(f"CELL_TYPES {nt}")
    out += [str(VTK_TRIANGLE)] * nt
    if checked:
        out.append(f"POINT_DATA {nv}")
        for name, arr in checked.items():
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            out += [f"{x:.17g}" for x in arr]
    Path(path).write_text("\n".join(out) + "\n")


def boundary_rows(mesh: Mesh2D, u, h_full):
    """Rows ``(component, arclength, x, y, u, h)`` walking each boundary loop
    counterclockwise.  The loop is closed by repeating its first vertex at
    arclength equal to the component perimeter."""
    u = np.asarray(u, float)
    h_full = np.asarray(h_full, float)
    rows = []
    for loop, comp in zip(mesh.boundary.loops, mesh.boundary.loop_components):
        closed = np.append(loop, loop[0])
        seg = np.hypot(*np.diff(mesh.vertices[closed], axis=0).T)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        for vi, si in zip(closed, s):
            x, y = mesh.vertices[vi]
            rows.append((comp, si, x, y, u[vi], h_full[vi]))
    return rows


def write_boundary_csv(mesh: Mesh2D, u, h_full, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["component", "arclength", "x", "y", "u", "h"])
        for comp, s, x, y, uu, hh in boundary_rows(mesh, u, h_full):
            wr.writerow([comp] + [f"{v:.17g}" for v in (s, x, y, uu, hh)])
