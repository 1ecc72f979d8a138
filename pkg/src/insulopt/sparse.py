"""Symmetric sparse linear algebra: Jacobi-preconditioned CG and a deflated
shift-and-invert inverse power eigensolver.

Matrices are ``scipy.sparse.csr_matrix`` with both triangles stored.
"""
from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu


class ConvergenceError(RuntimeError):
    """An iterative method stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float, history=None):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual
        self.history = list(history or [])


def as_symmetric(A, rtol: float = 1e-14) -> sparse.csr_matrix:
    """Return ``A`` as CSR after checking symmetry to ``rtol`` of its max entry."""
    A = sparse.csr_matrix(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix is not square: {A.shape}")
    if A.nnz:
        scale = abs(A).max()
        asym = abs(A - A.T).max() if A.nnz else 0.0
        if asym > rtol * scale:
            raise ValueError(f"matrix is not symmetric (max |A - A^T| = {asym:.3e})")
    return A


def cg_solve(A, b, tol: float = 1e-10, max_iter: int | None = None, x0=None,
             history: list | None = None, callback=None) -> np.ndarray:
    """Solve ``A x = b`` for SPD ``A`` by Jacobi-preconditioned CG.

    Stops when ``||A x - b|| <= tol * ||b||``.  Relative residual norms are
    appended to ``history`` when a list is given; ``callback(x)`` is called
    after every iteration.
    """
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if b.shape != (n,):
        raise ValueError(f"right-hand side has length {b.shape}, expected ({n},)")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = 10 * n + 10
    if history is None:
        history = []
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    d = A.diagonal()
    dinv = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 1.0)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    res = np.linalg.norm(r) / bnorm
    history.append(res)
    if res <= tol:
        return x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for _ in range(max_iter):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise ConvergenceError("CG breakdown: matrix not positive definite", res, history)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if callback is not None:
            callback(x)
        res = np.linalg.norm(r) / bnorm
        history.append(res)
        if res <= tol:
            # recheck against the true residual; the recursive one drifts
            true_res = np.linalg.norm(b - A @ x) / bnorm
            if true_res <= tol:
                return x
            r = b - A @ x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(f"CG did not converge in {max_iter} iterations", res, history)


def _m_orthonormalize(Y: np.ndarray, M) -> np.ndarray:
    """Modified Gram-Schmidt (two passes) in the ``M`` inner product."""
    out = []
    if len(Y) == 0:
        return np.zeros((0, M.shape[0]))
    for y in Y:
        q = np.array(y, dtype=float)
        for _ in range(2):
            for u in out:
                q -= (u @ (M @ q)) * u
        nrm = np.sqrt(q @ (M @ q))
        if nrm < 1e-300:
            raise ValueError("deflation vectors are linearly dependent")
        out.append(q / nrm)
    return np.array(out)


class _ShiftedSolver:
    def __init__(self, S, method: str, tol: float):
        self.S, self.method, self.tol = S, method, tol
        self.prev = None
        if method == "direct":
            self.lu = splu(sparse.csc_matrix(S))
        elif method != "cg":
            raise ValueError(f"unknown inner solver {method!r}")

    def __call__(self, rhs):
        if self.method == "direct":
            return self.lu.solve(rhs)
        x = cg_solve(self.S, rhs, tol=self.tol, x0=self.prev)
        self.prev = x
        return x


def eig_smallest(A, M, deflation=(), tol: float = 1e-10, v0=None, *,
                 solver: str = "direct", max_iter: int = 5000, seed: int = 0,
                 history: list | None = None):
    """Smallest eigenpair of ``A v = lam M v`` on the ``M``-orthogonal
    complement of ``deflation``.

    Shift-and-invert inverse iteration with shift ``sigma = 1e-8 tr(A)/n``
    (which regularises a singular Neumann operator).  Inner solves use a
    sparse LU factorisation (``solver="direct"``) or Jacobi-preconditioned
    CG (``solver="cg"``).  Converged when ``||A v - lam M v|| <= tol ||A v||``
    (or the residual reaches rounding level) and the relative eigenvalue
    change is below ``1e-10``.

    Returns ``(lam, v)`` with ``v^T M v = 1``.
    """
    n = A.shape[0]
    if A.shape != (n, n) or M.shape != (n, n):
        raise ValueError(f"dimension mismatch: A {A.shape}, M {M.shape}")
    if history is None:
        history = []
    Y = np.asarray(deflation, dtype=float).reshape(-1, n) if len(deflation) else np.zeros((0, n))
    if len(Y) >= n:
        raise ValueError("deflation space fills the whole space")
    Y = _m_orthonormalize(Y, M)
    MY = (M @ Y.T).T if len(Y) else Y

    def project(x):
        for y, my in zip(Y, MY):
            x = x - (my @ x) * y
        return x

    if v0 is None:
        v = np.random.default_rng(seed).standard_normal(n)
    else:
        v = np.array(v0, dtype=float)
        if v.shape != (n,):
            raise ValueError(f"start vector has length {v.shape}, expected ({n},)")
    v = project(v)
    nrm = np.sqrt(v @ (M @ v))
    if not nrm > 0:
        v = project(np.random.default_rng(seed).standard_normal(n))
        nrm = np.sqrt(v @ (M @ v))
    v /= nrm

    sigma = 1e-8 * max(A.diagonal().sum(), 0.0) / n
    shifted = _ShiftedSolver((A + sigma * M).tocsr(), solver, tol=max(1e-14, 0.01 * tol))

    absA = abs(A)
    eps = np.finfo(float).eps
    Av = A @ v
    lam = v @ Av
    res = np.inf
    for _ in range(max_iter):
        w = project(shifted(M @ v))
        w = project(w)
        v = w / np.sqrt(w @ (M @ w))
        Av = A @ v
        lam_new = v @ Av
        Mv = M @ v
        res = np.linalg.norm(Av - lam_new * Mv)
        scale = np.linalg.norm(Av)
        history.append(res / scale if scale > 0 else res)
        change = abs(lam_new - lam)
        lam = lam_new
        # products cannot resolve residuals below their own rounding level
        av = absA @ np.abs(v)
        floor = 64 * eps * np.linalg.norm(av)
        lam_floor = 64 * eps * float(np.abs(v) @ av)
        if res <= max(tol * scale, floor) and change <= max(1e-10 * abs(lam), lam_floor):
            return float(lam), v
        if scale == 0.0 and res == 0.0:
            return float(lam), v
    raise ConvergenceError(f"inverse iteration did not converge in {max_iter} steps", res, history)
