import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from insulopt.energy import (Operators, energy_value, minimize_reduced, radial_reference,
                             reduced_objective, solve_robin)
from insulopt.fem import ThicknessField
from insulopt.sparse import ConvergenceError

from conftest import disc, square
from oracles import radial_temperature


class TestRadialReference:
    def test_centre(self):
        assert math.isclose(radial_reference(1, 2, 1, 1, 0.0), 0.25 + 1 / (4 * math.pi), rel_tol=1e-15)

    def test_rim(self):
        assert math.isclose(radial_reference(1, 2, 1, 1, 1.0), 1 / (4 * math.pi), rel_tol=1e-15)

    @pytest.mark.parametrize("d,omega", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3)])
    def test_rim_any_dimension(self, d, omega):
        R, k, m = 1.7, 0.3, 2.5
        assert math.isclose(radial_reference(R, d, k, m, R), k * m / (d * d * omega * R ** (d - 2)),
                            rel_tol=1e-14)

    def test_rejects_outside(self):
        with pytest.raises(ValueError):
            radial_reference(1, 2, 1, 1, 1.5)


class TestSolveRobin:
    def test_constant_h_disc_radial(self):
        mesh = disc(6)
        u = solve_robin(mesh, ThicknessField.constant(mesh, 1.0), 1.0, 1.0)
        r = np.hypot(*mesh.vertices.T)
        centre = int(np.argmin(r))
        rim = mesh.boundary.vertices
        assert abs(u[centre] - 0.32958) < 0.01 * 0.32958
        assert np.max(np.abs(u[rim] - 0.07958)) < 0.01 * 0.32958
        assert np.max(np.abs(u - radial_temperature(np.minimum(r, 1)))) < 0.01 * 0.32958

    def test_zero_source(self):
        mesh = square(4)
        assert not np.any(solve_robin(mesh, ThicknessField.constant(mesh, 1.0), 1.0, 0.0))

    def test_rejects_nonpositive_h(self):
        mesh = square(4)
        h = ThicknessField.from_values(mesh, 0.0)
        with pytest.raises(ValueError):
            solve_robin(mesh, h, 1.0, 1.0)

    def test_cg_matches_direct(self):
        mesh = square(12)
        h = ThicknessField.constant(mesh, 0.7)
        a = solve_robin(mesh, h, 1.0, 1.0)
        b = solve_robin(mesh, h, 1.0, 1.0, solver="cg", tol=1e-12)
        assert np.allclose(a, b, rtol=1e-9, atol=0)

    def test_cg_nonconvergence_propagates(self, monkeypatch):
        import insulopt.energy as energy

        def failing(A, b, tol):
            raise ConvergenceError("forced", 1.0)

        monkeypatch.setattr(energy, "cg_solve", failing)
        mesh = square(4)
        with pytest.raises(ConvergenceError):
            solve_robin(mesh, ThicknessField.constant(mesh, 1.0), 1.0, 1.0, solver="cg")

    def test_neumann_degeneration(self):
        # thick insulation: the mean temperature grows like h, the gradient
        # energy stays bounded and the heat still leaves through the boundary
        mesh = square(8)
        ops = Operators(mesh)
        mean, grad = [], []
        for hval in (1e4, 1e6):
            h = ThicknessField.from_values(mesh, hval)
            u = solve_robin(mesh, h, 1.0, 1.0, ops=ops)
            mean.append(np.sum(ops.M @ u))
            grad.append(u @ (ops.K @ u))
            flux = ops.w @ (u[ops.bv] / hval)
            assert math.isclose(flux, 1.0, rel_tol=1e-6)
        assert math.isclose(mean[1] / mean[0], 100.0, rel_tol=1e-3)
        assert math.isclose(grad[0], grad[1], rel_tol=1e-2)


class TestEnergyValue:
    def test_zero_field(self):
        mesh = square(4)
        assert energy_value(mesh, ThicknessField.constant(mesh, 1.0), 1.0, 1.0, np.zeros(mesh.n_vertices)) == 0.0

    @pytest.mark.parametrize("mesh", [square(10), disc(3)], ids=["square", "disc"])
    def test_identity(self, mesh):
        h = ThicknessField.constant(mesh, 0.8)
        ops = Operators(mesh)
        u = solve_robin(mesh, h, 1.0, 1.0, ops=ops)
        E = energy_value(mesh, h, 1.0, 1.0, u, ops)
        assert math.isclose(E, -0.5 * ops.load(1.0) @ u, rel_tol=1e-8)

    def test_quadratic_in_source(self):
        mesh = square(8)
        h = ThicknessField.constant(mesh, 1.0)
        E1 = energy_value(mesh, h, 1.0, 1.0, solve_robin(mesh, h, 1.0, 1.0))
        E2 = energy_value(mesh, h, 1.0, 2.0, solve_robin(mesh, h, 1.0, 2.0))
        assert math.isclose(E2, 4 * E1, rel_tol=1e-10)


class TestMinimizeReduced:
    def test_disc_radial(self):
        mesh = disc(5)
        rep = minimize_reduced(mesh, 1.0, 1.0, 1.0)
        assert rep.converged
        h = rep.h
        cv = math.sqrt(h.weights @ (h.h - h.h.mean()) ** 2 / h.weights.sum()) / h.h.mean()
        assert cv < 0.02
        r = np.minimum(np.hypot(*mesh.vertices.T), 1.0)
        assert np.max(np.abs(rep.u - radial_temperature(r))) < 0.01 * 0.32958

    def test_zero_source_degenerate(self):
        rep = minimize_reduced(square(4), 1.0, 1.0, 0.0)
        assert rep.degenerate
        assert rep.energy == 0.0
        assert not np.any(rep.u)

    def test_square_beats_constant(self):
        mesh = square(16)
        rep = minimize_reduced(mesh, 1.0, 1.0, 1.0)
        h0 = ThicknessField.constant(mesh, 1.0)
        E0 = energy_value(mesh, h0, 1.0, 1.0, solve_robin(mesh, h0, 1.0, 1.0))
        assert rep.energy <= E0 - 1e-6

    def test_energy_equals_reduced_at_optimum(self):
        rep = minimize_reduced(square(12), 1.0, 0.5, 1.0, tol=1e-13)
        assert math.isclose(rep.energy, rep.reduced, rel_tol=1e-7)

    def test_max_outer(self):
        rep = minimize_reduced(square(8), 1.0, 0.01, 1.0, max_outer=3)
        assert not rep.converged
        assert len(rep.trace) == 3
        with pytest.raises(ConvergenceError) as info:
            minimize_reduced(square(8), 1.0, 0.01, 1.0, max_outer=3, strict=True)
        assert len(info.value.history) == 3

    @pytest.mark.parametrize("k,m", [(0.0, 1.0), (1.0, -1.0), (1.0, math.nan)])
    def test_rejects_parameters(self, k, m):
        with pytest.raises(ValueError):
            minimize_reduced(square(2), k, m, 1.0)

    def test_more_mass_lower_energy(self):
        mesh = square(8)
        energies = [minimize_reduced(mesh, 1.0, m, 1.0).energy for m in (0.1, 0.5, 2.0)]
        assert energies[0] > energies[1] > energies[2]


@given(st.floats(0.1, 3.0), st.floats(0.2, 3.0))
@settings(max_examples=15, deadline=None)
def test_optimum_below_reduced_of_perturbation(k, m):
    mesh = square(5)
    ops = Operators(mesh)
    rep = minimize_reduced(mesh, k, m, 1.0, tol=1e-13, ops=ops)
    Fopt = reduced_objective(mesh, k, m, 1.0, rep.u, ops)
    rng = np.random.default_rng(0)
    for _ in range(5):
        v = rep.u + 1e-3 * rng.standard_normal(mesh.n_vertices)
        assert reduced_objective(mesh, k, m, 1.0, v, ops) >= Fopt - 1e-10 * abs(Fopt)
