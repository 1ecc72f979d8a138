"""P1 assembly of the Robin-limit forms.

Boundary integrals use lumped (vertex-wise) arclength quadrature, so the
Robin term is diagonal and ``int |u|`` is a weighted vertex sum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .mesh import Mesh2D


def _gradients(mesh: Mesh2D):
    p = mesh.vertices[mesh.triangles]
    area = mesh.signed_areas()
    # gradient of barycentric coordinate i is rot90(edge opposite i) / (2 area)
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grad = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2.0 * area[:, None, None])
    return grad, area


def _scatter(mesh: Mesh2D, local: np.ndarray) -> sparse.csr_matrix:
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_stiffness(mesh: Mesh2D) -> sparse.csr_matrix:
    """P1 stiffness matrix of ``int grad u . grad v``."""
    grad, area = _gradients(mesh)
    local = np.einsum("tik,tjk->tij", grad, grad) * area[:, None, None]
    return _scatter(mesh, local)


_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


def assemble_mass(mesh: Mesh2D) -> sparse.csr_matrix:
    """Consistent P1 mass matrix of ``int u v``."""
    local = mesh.signed_areas()[:, None, None] * _MASS_REF[None]
    return _scatter(mesh, local)


def assemble_load(mesh: Mesh2D, f) -> np.ndarray:
    """Load vector ``int f phi_i`` for a per-vertex (or constant) source."""
    f = np.broadcast_to(np.asarray(f, dtype=float), (mesh.n_vertices,))
    return assemble_mass(mesh) @ f


@dataclass(frozen=True)
class ThicknessField:
    """Insulator thickness on the boundary vertices of a mesh.

    ``h`` is aligned with ``mesh.boundary.vertices``; ``weights`` are the
    lumped arclength weights, so the total mass is ``weights @ h``.
    """

    vertices: np.ndarray
    weights: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.shape != self.vertices.shape:
            raise ValueError(f"thickness has length {h.shape}, expected {self.vertices.shape}")
        if not np.all(np.isfinite(h)) or np.any(h < 0):
            raise ValueError("thickness must be finite and nonnegative")
        object.__setattr__(self, "h", h)

    @property
    def mass(self) -> float:
        return float(self.weights @ self.h)

    @classmethod
    def from_values(cls, mesh: Mesh2D, h) -> "ThicknessField":
        bv = mesh.boundary.vertices
        return cls(bv, mesh.boundary.weights, np.broadcast_to(np.asarray(h, float), bv.shape).copy())

    @classmethod
    def constant(cls, mesh: Mesh2D, m: float) -> "ThicknessField":
        """Uniform thickness ``m / perimeter``."""
        return cls.from_values(mesh, m / mesh.boundary.perimeter)

    def full(self, n: int) -> np.ndarray:
        """Per-vertex array with zeros at interior vertices."""
        out = np.zeros(n)
        out[self.vertices] = self.h
        return out

    def scaled(self, factor: float) -> "ThicknessField":
        return ThicknessField(self.vertices, self.weights, self.h * factor)


def optimal_thickness(weights, trace_abs, m: float, floor: float = 0.0) -> np.ndarray:
    """Minimise ``sum w u^2 / h`` over ``{h >= floor, sum w h = m}``.

    Without an active floor the minimiser is ``h = m |u| / sum(w |u|)``
    (equality in Cauchy-Schwarz).  With a floor it is ``max(floor, c |u|)``
    where ``c`` restores the mass constraint.
    """
    w = np.asarray(weights, float)
    a = np.abs(np.asarray(trace_abs, float))
    if floor * w.sum() > m * (1 + 1e-12):
        raise ValueError("floor is incompatible with the total mass")
    S = w @ a
    if S <= 0:
        raise ValueError("boundary trace vanishes; the optimal thickness is undetermined")
    active = a > 0
    while True:
        floored_mass = floor * w[~active].sum()
        c = (m - floored_mass) / (w[active] @ a[active])
        still = active & (c * a > floor)
        if np.array_equal(still, active):
            break
        active = still
    h = np.where(active, c * a, floor)
    return h


def assemble_robin_boundary(mesh: Mesh2D, h: ThicknessField, k: float) -> sparse.csr_matrix:
    """Lumped Robin matrix: diagonal ``w_i / (k h_i)`` on boundary vertices."""
    if not k > 0:
        raise ValueError("k must be positive")
    if np.any(h.h == 0):
        i = int(h.vertices[np.argmin(h.h)])
        raise ZeroDivisionError(f"thickness vanishes at boundary vertex {i}")
    diag = np.zeros(mesh.n_vertices)
    diag[h.vertices] = h.weights / (k * h.h)
    return sparse.diags(diag, format="csr")


def boundary_abs_integral(mesh: Mesh2D, u) -> float:
    """Lumped ``int_{boundary} |u|``."""
    u = np.asarray(u, dtype=float)
    return float(mesh.boundary.weights @ np.abs(u[mesh.boundary.vertices]))


def weighted_cv(weights, values) -> float:
    """Weighted coefficient of variation (std / mean) of ``values``; ``inf``
    when the mean is below 1e-14."""
    w = np.asarray(weights, float)
    x = np.asarray(values, float)
    mean = (w @ x) / w.sum()
    var = (w @ (x - mean) ** 2) / w.sum()
    return float(np.sqrt(var) / mean) if mean > 1e-14 else math.inf
