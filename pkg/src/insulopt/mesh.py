"""Conforming triangular meshes of the benchmark domains.

A :class:`Mesh2D` stores vertex coordinates, counterclockwise triangles and
the oriented boundary edges (domain on the left).  Everything else (outward
normals, connected components, boundary loops, lumped arclength weights) is
derived once at construction.  Meshes are treated as immutable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph


class MeshError(ValueError):
    """A mesh violates one of the structural invariants."""


class MeshParseError(ValueError):
    """Malformed mesh file.  ``lineno`` is 1-based (0 when unknown)."""

    def __init__(self, message: str, lineno: int = 0):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class BoundaryTrace:
    """Boundary vertices in loop order plus lumped arclength weights.

    ``vertices`` is the sorted array of all boundary vertex indices and
    ``weights[i]`` is half the summed length of the two boundary edges
    meeting at ``vertices[i]``.  ``loops`` holds one index array per
    component, ordered counterclockwise around the domain.
    """

    vertices: np.ndarray
    weights: np.ndarray
    loops: tuple[np.ndarray, ...]
    loop_components: tuple[int, ...]

    @property
    def perimeter(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True, eq=False)
class Mesh2D:
    vertices: np.ndarray
    triangles: np.ndarray
    # optional generator metadata: (cx, cy, R) per component, used by refine()
    circles: tuple[tuple[float, float, float], ...] | None = None
    boundary_edges: np.ndarray = field(init=False, repr=False)
    edge_component: np.ndarray = field(init=False, repr=False)
    edge_normals: np.ndarray = field(init=False, repr=False)
    component_of_vertex: np.ndarray = field(init=False, repr=False)
    boundary: BoundaryTrace = field(init=False, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise MeshError("vertices must have shape (N, 2)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must have shape (T, 3)")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle references a vertex index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        _derive_topology(self)
        for arr in (self.vertices, self.triangles, self.boundary_edges,
                    self.edge_component, self.edge_normals,
                    self.component_of_vertex, self.boundary.vertices,
                    self.boundary.weights, *self.boundary.loops):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_components(self) -> int:
        return int(self.component_of_vertex.max()) + 1 if self.n_vertices else 0

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.boundary_edges[:, 1]] - self.vertices[self.boundary_edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def perimeter(self) -> float:
        return float(self.edge_lengths().sum())

    def boundary_weights(self) -> np.ndarray:
        """Lumped arclength weights as a full per-vertex array (zero inside)."""
        w = np.zeros(self.n_vertices)
        w[self.boundary.vertices] = self.boundary.weights
        return w

    def all_edges(self) -> np.ndarray:
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    def boundary_angles(self) -> np.ndarray | None:
        """Polar angle of each boundary vertex about its component's circle
        centre, aligned with ``boundary.vertices``; None without metadata."""
        if self.circles is None:
            return None
        bv = self.boundary.vertices
        centres = np.array([c[:2] for c in self.circles])[self.component_of_vertex[bv]]
        d = self.vertices[bv] - centres
        return np.arctan2(d[:, 1], d[:, 0])

    def validate(self) -> None:
        """Raise :class:`MeshError` if any structural invariant fails."""
        if self.n_triangles == 0:
            raise MeshError("mesh has no triangles")
        areas = self.signed_areas()
        if np.any(areas <= 0):
            bad = int(np.argmin(areas))
            raise MeshError(f"triangle {bad} has non-positive signed area {areas[bad]:.3e}")
        used = np.zeros(self.n_vertices, bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            raise MeshError(f"vertex {int(np.argmin(used))} belongs to no triangle")
        if self.circles is not None and len(self.circles) != self.n_components:
            raise MeshError("circle metadata does not match component count")
        # one loop per component: V - E + F = 1 for each disc-like piece
        edges = self.all_edges()
        for c in range(self.n_components):
            nv = int(np.sum(self.component_of_vertex == c))
            ne = int(np.sum(self.component_of_vertex[edges[:, 0]] == c))
            nf = int(np.sum(self.component_of_vertex[self.triangles[:, 0]] == c))
            if nv - ne + nf != 1:
                raise MeshError(f"component {c} is not simply connected (V-E+F={nv - ne + nf})")


def _derive_topology(mesh: Mesh2D) -> None:
    v, t = mesh.vertices, mesh.triangles
    n = len(v)
    directed = t[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    key = np.sort(directed, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        raise MeshError("non-manifold edge shared by more than two triangles")
    bedges = directed[counts[inverse] == 1]

    if len(t):
        adj = sparse.coo_matrix((np.ones(len(directed)), (directed[:, 0], directed[:, 1])), shape=(n, n))
        _, labels = csgraph.connected_components(adj, directed=False)
    else:
        labels = np.arange(n)
    # renumber components by first appearance so the first generated piece is 0
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    comp = remap[labels].astype(np.int64)

    d = v[bedges[:, 1]] - v[bedges[:, 0]]
    length = np.hypot(d[:, 0], d[:, 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]

    loops, loop_comp = _trace_loops(bedges, comp)
    bverts = np.unique(bedges.ravel())
    wfull = np.zeros(n)
    np.add.at(wfull, bedges[:, 0], 0.5 * length)
    np.add.at(wfull, bedges[:, 1], 0.5 * length)

    object.__setattr__(mesh, "boundary_edges", bedges)
    object.__setattr__(mesh, "edge_component", comp[bedges[:, 0]] if len(bedges) else np.zeros(0, np.int64))
    object.__setattr__(mesh, "edge_normals", normals)
    object.__setattr__(mesh, "component_of_vertex", comp)
    object.__setattr__(mesh, "boundary", BoundaryTrace(bverts, wfull[bverts], loops, loop_comp))


def _trace_loops(bedges: np.ndarray, comp: np.ndarray):
    nxt = {}
    for a, b in bedges:
        if int(a) in nxt:
            raise MeshError(f"boundary vertex {int(a)} has two outgoing boundary edges")
        nxt[int(a)] = int(b)
    loops, loop_comp = [], []
    seen = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        cur = nxt[start]
        while cur != start:
            if cur in seen or cur not in nxt:
                raise MeshError("boundary edges do not form closed loops")
            loop.append(cur)
            seen.add(cur)
            cur = nxt[cur]
        loops.append(np.array(loop, dtype=np.int64))
        loop_comp.append(int(comp[start]))
    return tuple(loops), tuple(loop_comp)


# ---------------------------------------------------------------------------
# generators

def generate_square(n: int) -> Mesh2D:
    """Unit square split into ``n x n`` cells, two triangles each.

    Diagonals alternate between neighbouring cells so the mesh is mirror
    symmetric about both mid-lines when ``n`` is even.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    tris = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
            if (i + j) % 2 == 0:
                tris += [(v00, v10, v11), (v00, v11, v01)]
            else:
                tris += [(v00, v10, v01), (v10, v11, v01)]
    mesh = Mesh2D(verts, np.array(tris))
    mesh.validate()
    return mesh


def _disc_arrays(R: float, n: int, cx: float = 0.0, cy: float = 0.0):
    rings = 2 ** n
    pts = [(cx, cy)]
    start = [0]
    for j in range(1, rings + 1):
        start.append(len(pts))
        r = R * j / rings
        ang = 2.0 * np.pi * np.arange(6 * j) / (6 * j)
        if j == rings:
            # the outer ring sits exactly on the circle
            pts.extend(zip(cx + R * np.cos(ang), cy + R * np.sin(ang)))
        else:
            pts.extend(zip(cx + r * np.cos(ang), cy + r * np.sin(ang)))
    tris = []
    for j in range(1, rings + 1):
        for s in range(6):
            a = [0] * j if j == 1 else [start[j - 1] + (s * (j - 1) + i) % (6 * (j - 1)) for i in range(j)]
            b = [start[j] + (s * j + i) % (6 * j) for i in range(j + 1)]
            for i in range(j):
                tris.append((a[i], b[i], b[i + 1]))
            for i in range(j - 1):
                tris.append((a[i], b[i + 1], a[i + 1]))
    return np.array(pts), np.array(tris, dtype=np.int64)


def generate_disc(R: float, n: int) -> Mesh2D:
    """Disc of radius ``R`` centred at the origin from ``2**n`` concentric rings.

    Ring ``j`` carries ``6 j`` equally spaced vertices; the outer ring lies on
    the circle, so the boundary is an inscribed regular ``6 * 2**n``-gon.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    v, t = _disc_arrays(R, n)
    mesh = Mesh2D(v, t, circles=((0.0, 0.0, float(R)),))
    mesh.validate()
    return mesh


def generate_two_discs(R1: float, R2: float, gap: float, n: int) -> Mesh2D:
    """Two disjoint discs on the x-axis separated by ``gap``.

    Component 0 is the disc of radius ``R1`` centred at the origin.
    """
    if not (R1 > 0 and R2 > 0):
        raise ValueError("radii must be positive")
    if not gap > 0:
        raise ValueError("gap must be positive; the discs would overlap or touch")
    if n < 1:
        raise ValueError("n must be at least 1")
    c2 = R1 + gap + R2
    v1, t1 = _disc_arrays(R1, n)
    v2, t2 = _disc_arrays(R2, n, cx=c2)
    mesh = Mesh2D(np.vstack([v1, v2]), np.vstack([t1, t2 + len(v1)]),
                  circles=((0.0, 0.0, float(R1)), (float(c2), 0.0, float(R2))))
    mesh.validate()
    return mesh


def refine(mesh: Mesh2D) -> Mesh2D:
    """Uniform red refinement: every triangle splits into four.

    With circle metadata, boundary edge midpoints are pushed back onto the
    component's circle.
    """
    t = mesh.triangles
    nv = mesh.n_vertices
    e = np.sort(t[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    uniq, inv = np.unique(e, axis=0, return_inverse=True)
    inv = inv.ravel().reshape(-1, 3) + nv
    mids = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])

    if mesh.circles is not None:
        bkey = np.sort(mesh.boundary_edges, axis=1)
        is_b = np.zeros(len(uniq), bool)
        # locate boundary edges among the unique edges
        code = uniq[:, 0] * nv + uniq[:, 1]
        bcode = bkey[:, 0] * nv + bkey[:, 1]
        is_b[np.searchsorted(code, bcode)] = True
        comp = mesh.component_of_vertex[uniq[is_b, 0]]
        circ = np.array(mesh.circles)[comp]
        d = mids[is_b] - circ[:, :2]
        mids[is_b] = circ[:, :2] + d * (circ[:, 2] / np.hypot(d[:, 0], d[:, 1]))[:, None]

    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    ab, bc, ca = inv[:, 0], inv[:, 1], inv[:, 2]
    children = np.vstack([
        np.column_stack([a, ab, ca]),
        np.column_stack([ab, b, bc]),
        np.column_stack([ca, bc, c]),
        np.column_stack([ab, bc, ca]),
    ])
    out = Mesh2D(np.vstack([mesh.vertices, mids]), children, circles=mesh.circles)
    out.validate()
    return out


# ---------------------------------------------------------------------------
# text format

def save_mesh(mesh: Mesh2D, path) -> None:
    """Write the plain-text mesh format (17 significant digits)."""
    lines = ["# insulopt mesh", f"VERTICES {mesh.n_vertices}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines.append(f"TRIANGLES {mesh.n_triangles}")
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"BOUNDARY {len(mesh.boundary_edges)}")
    lines += [f"{a} {b} {c}" for (a, b), c in zip(mesh.boundary_edges, mesh.edge_component)]
    if mesh.circles is not None:
        lines.append(f"CIRCLES {len(mesh.circles)}")
        lines += [f"{i} {cx:.17g} {cy:.17g} {r:.17g}" for i, (cx, cy, r) in enumerate(mesh.circles)]
    Path(path).write_text("\n".join(lines) + "\n")


_SECTIONS = {"VERTICES": 2, "TRIANGLES": 3, "BOUNDARY": 3, "CIRCLES": 4}


def load_mesh(path) -> Mesh2D:
    """Read a mesh written by :func:`save_mesh` and validate it.

    Raises :class:`MeshParseError` (with line number) on malformed input and
    :class:`MeshError` when the parsed mesh violates an invariant.
    """
    records: dict[str, list] = {}
    current = None
    expected = 0
    header_line = 0
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0].isalpha():
            if current is not None and len(records[current]) != expected:
                raise MeshParseError(f"section {current} declares {expected} records, found "
                                     f"{len(records[current])}", header_line)
            if tok[0] not in _SECTIONS or len(tok) != 2:
                raise MeshParseError(f"unknown section header {line!r}", lineno)
            if tok[0] in records:
                raise MeshParseError(f"duplicate section {tok[0]}", lineno)
            try:
                expected = int(tok[1])
            except ValueError:
                raise MeshParseError(f"bad record count {tok[1]!r}", lineno) from None
            current, header_line = tok[0], lineno
            records[current] = []
            continue
        if current is None:
            raise MeshParseError("data before any section header", lineno)
        if len(tok) != _SECTIONS[current]:
            raise MeshParseError(f"{current} record needs {_SECTIONS[current]} fields", lineno)
        try:
            if current == "VERTICES":
                rec = tuple(float(x) for x in tok)
            elif current == "CIRCLES":
                rec = (int(tok[0]),) + tuple(float(x) for x in tok[1:])
            else:
                rec = tuple(int(x) for x in tok)
        except ValueError:
            raise MeshParseError(f"cannot parse {line!r}", lineno) from None
        if current in ("TRIANGLES", "BOUNDARY"):
            nv = len(records.get("VERTICES", []))
            idx = rec if current == "TRIANGLES" else rec[:2]
            if any(i < 0 or i >= nv for i in idx):
                raise MeshParseError(f"vertex index out of range (have {nv} vertices)", lineno)
        records[current].append((rec, lineno))
    if current is not None and len(records[current]) != expected:
        raise MeshParseError(f"section {current} declares {expected} records, found "
                             f"{len(records[current])}", header_line)
    for name in ("VERTICES", "TRIANGLES", "BOUNDARY"):
        if name not in records:
            raise MeshParseError(f"missing section {name}")

    verts = np.array([r for r, _ in records["VERTICES"]], dtype=float).reshape(-1, 2)
    tris = np.array([r for r, _ in records["TRIANGLES"]], dtype=np.int64).reshape(-1, 3)
    circles = None
    if "CIRCLES" in records:
        circles = tuple((cx, cy, r) for (_, cx, cy, r), _ in sorted(records["CIRCLES"]))
    mesh = Mesh2D(verts, tris, circles=circles)
    mesh.validate()

    # the stored boundary labels must agree with the triangulation
    stored = {(a, b): c for (a, b, c), _ in records["BOUNDARY"]}
    derived = {(int(a), int(b)): int(c) for (a, b), c in zip(mesh.boundary_edges, mesh.edge_component)}
    if stored != derived:
        raise MeshError("BOUNDARY section does not match the boundary of the triangulation")
    return mesh

