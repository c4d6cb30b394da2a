"""Dirichlet solver, flux extraction, and the measurement-point forward map."""

import math

import numpy as np
import pytest

from fracbayes.forward import (
    DirichletSolver,
    ForwardModel,
    Potential,
    SolveError,
    admissible_intervals,
    dn_on_grid,
    eval_G,
    solve_dirichlet,
)
from fracbayes.grid import BumpDatum, GridFunction, build_grid, classify_regions, sample_phi
from fracbayes.operator import build_symbol


def _setup(m, s=0.5):
    spec = build_grid(3.0, m, s)
    regions = classify_regions(spec)
    op = build_symbol(spec)
    phi = sample_phi(spec)
    return spec, regions, op, phi


class TestPotential:
    def test_accepts_nonnegative_values(self):
        f = Potential(np.array([0.0, 1.5, 2.0]))
        assert f.background == 1.0

    def test_rejects_negative_nan_and_over_cap(self):
        with pytest.raises(ValueError):
            Potential(np.array([1.0, -0.1]))
        with pytest.raises(ValueError):
            Potential(np.array([1.0, math.nan]))
        with pytest.raises(ValueError):
            Potential(np.array([1.0, 3.0]), cap=2.0)


class TestHandSolvedSystem:
    """At m=2 the bulk holds exactly three nodes, so the linear system can
    be written out and solved independently."""

    def test_bulk_response_matches_three_by_three_solve(self):
        spec, regions, op, phi = _setup(2)
        np.testing.assert_array_equal(regions.omega, [5, 6, 7])
        a = op.symbol
        phi1 = phi.at(1)  # the only nonzero datum node at this resolution
        mat = np.array(
            [
                [a[0] + 1.0, a[1], a[2]],
                [a[1], a[0] + 1.0, a[1]],
                [a[2], a[1], a[0] + 1.0],
            ]
        )
        rhs = -phi1 * np.array([a[4], a[5], a[6]])
        expected_v = np.linalg.solve(mat, rhs)

        f = Potential(np.ones(3))
        sol = solve_dirichlet(f, phi, op, regions)
        got_v = sol.v.at(regions.omega)
        np.testing.assert_allclose(got_v, expected_v, rtol=1e-12)

    def test_flux_matches_hand_expansion(self):
        spec, regions, op, phi = _setup(2)
        a = op.symbol
        phi1 = phi.at(1)
        f = Potential(np.ones(3))
        sol = solve_dirichlet(f, phi, op, regions)
        dn = dn_on_grid(sol, op, regions)
        v = sol.v.at(regions.omega)
        for pos, j in enumerate(regions.dd):
            expected = float(a[np.abs(j - regions.omega)] @ v) + a[abs(j - 1)] * phi1
            assert dn[pos] == pytest.approx(expected, rel=1e-12, abs=1e-15)

    def test_full_state_is_datum_plus_response(self):
        spec, regions, op, phi = _setup(2)
        sol = solve_dirichlet(Potential(np.ones(3)), phi, op, regions)
        np.testing.assert_array_equal(sol.u.values, sol.v.values + phi.values)
        # the response is supported on the bulk nodes only
        off_bulk = np.setdiff1d(np.arange(1, spec.k), regions.omega)
        np.testing.assert_array_equal(sol.v.at(off_bulk), 0.0)


class TestSolverBehaviour:
    def test_zero_datum_gives_zero_state_and_flux(self):
        spec = build_grid(3.0, 10, 0.5)
        regions = classify_regions(spec)
        op = build_symbol(spec)
        phi = sample_phi(spec, BumpDatum(amplitude=0.0))
        sol = solve_dirichlet(Potential(np.ones(regions.n_omega)), phi, op, regions)
        np.testing.assert_array_equal(sol.u.values, 0.0)
        np.testing.assert_array_equal(sol.v.values, 0.0)
        np.testing.assert_array_equal(dn_on_grid(sol, op, regions), 0.0)

    def test_repeat_solves_are_bit_identical(self):
        spec, regions, op, phi = _setup(10)
        f = np.linspace(0.0, 3.0, regions.n_omega)
        solver = DirichletSolver(op, phi, regions)
        v1 = solver.solve_values(f)
        v2 = solver.solve_values(f)
        np.testing.assert_array_equal(v1, v2)
        np.testing.assert_array_equal(solver.dn_values(v1), solver.dn_values(v2))

    def test_flux_depends_on_potential(self):
        spec, regions, op, phi = _setup(10)
        solver = DirichletSolver(op, phi, regions)
        dn0 = solver.dn_values(solver.solve_values(np.zeros(regions.n_omega)))
        dn1 = solver.dn_values(solver.solve_values(np.ones(regions.n_omega)))
        assert np.abs(dn0 - dn1).max() > 0

    def test_response_is_damped_by_larger_potential(self):
        """Adding absorption shrinks the bulk response in absolute size."""
        spec, regions, op, phi = _setup(10)
        solver = DirichletSolver(op, phi, regions)
        v_small = solver.solve_values(np.zeros(regions.n_omega))
        v_large = solver.solve_values(100.0 * np.ones(regions.n_omega))
        assert np.abs(v_large).max() < np.abs(v_small).max()

    def test_indefinite_system_raises_solve_error(self):
        spec, regions, op, phi = _setup(10)
        solver = DirichletSolver(op, phi, regions)
        with pytest.raises(SolveError):
            solver.solve_values(-1e6 * np.ones(regions.n_omega))

    def test_datum_leaking_into_bulk_rejected(self):
        spec, regions, op, _ = _setup(10)
        bad = np.zeros(spec.n_interior)
        bad[regions.omega[0] - 1] = 1.0
        with pytest.raises(ValueError):
            DirichletSolver(op, GridFunction(spec, bad), regions)

    def test_wrong_potential_shape_rejected(self):
        spec, regions, op, phi = _setup(10)
        with pytest.raises(ValueError):
            solve_dirichlet(Potential(np.ones(regions.n_omega + 1)), phi, op, regions)


class TestExactPairingIdentity:
    def test_flux_pairing_equals_bulk_pairing(self):
        """For two solves sharing the datum and a test solve with exterior
        data psi, h*sum_D psi*(dn1-dn2) equals h*sum_Omega (f1-f2)*u1*u~
        up to roundoff; this is the operator-symmetry identity the
        inversion theory rests on."""
        spec, regions, op, phi = _setup(10)
        solver = DirichletSolver(op, phi, regions)
        rng = np.random.default_rng(3)
        om_pos = regions.omega - 1
        for _ in range(5):
            f1 = rng.uniform(0.0, 5.0, regions.n_omega)
            f2 = rng.uniform(0.0, 5.0, regions.n_omega)
            sol1 = solver.solution(solver.solve_values(f1))
            sol2 = solver.solution(solver.solve_values(f2))
            dn_diff = dn_on_grid(sol1, op, regions) - dn_on_grid(sol2, op, regions)

            psi_vals = np.zeros(spec.n_interior)
            psi_vals[regions.dd - 1] = rng.standard_normal(regions.dd.size)
            tilde = solve_dirichlet(
                Potential(f2), GridFunction(spec, psi_vals), op, regions
            )
            lhs = spec.h * float(psi_vals[regions.dd - 1] @ dn_diff)
            rhs = spec.h * float(
                ((f1 - f2) * sol1.u.values[om_pos] * tilde.u.values[om_pos]).sum()
            )
            assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-13)


class TestFluxEvaluation:
    def test_admissible_intervals_shrink_by_one_cell(self):
        spec = build_grid(3.0, 50, 0.5)
        regions = classify_regions(spec)
        (a1, b1), (a2, b2) = admissible_intervals(spec, regions)
        assert (a1, b1) == (pytest.approx(-2.98), pytest.approx(-1.02))
        assert (a2, b2) == (pytest.approx(1.02), pytest.approx(2.98))

    def test_node_points_return_nodal_flux(self):
        spec, regions, op, phi = _setup(10)
        sol = solve_dirichlet(Potential(np.ones(regions.n_omega)), phi, op, regions)
        dn = dn_on_grid(sol, op, regions)
        x_dd = spec.node_x(regions.dd)
        for pos in (0, 5, regions.dd.size - 1):
            assert eval_G(sol, float(x_dd[pos]), regions) == dn[pos]

    def test_midpoints_average_adjacent_nodes(self):
        spec, regions, op, phi = _setup(10)
        sol = solve_dirichlet(Potential(np.ones(regions.n_omega)), phi, op, regions)
        dn = dn_on_grid(sol, op, regions)
        x_dd = spec.node_x(regions.dd)
        mid = 0.5 * (x_dd[3] + x_dd[4])
        assert eval_G(sol, float(mid), regions) == pytest.approx(
            0.5 * (dn[3] + dn[4]), rel=1e-14
        )

    def test_uncached_flux_rejected(self):
        spec, regions, op, phi = _setup(10)
        sol = solve_dirichlet(Potential(np.ones(regions.n_omega)), phi, op, regions)
        with pytest.raises(ValueError):
            eval_G(sol, 2.0, regions)

    def test_points_outside_admissible_set_rejected(self):
        spec, regions, op, phi = _setup(10)
        sol = solve_dirichlet(Potential(np.ones(regions.n_omega)), phi, op, regions)
        dn_on_grid(sol, op, regions)
        for x in (0.0, 1.01, 3.5, -1.0):
            with pytest.raises(ValueError):
                eval_G(sol, x, regions)

    def test_refinement_tightens_point_flux(self):
        """The flux at x=2.13 for the unit potential converges under mesh
        refinement: consecutive-mesh gaps shrink."""
        vals = {}
        for m in (25, 50, 100):
            spec, regions, op, phi = _setup(m)
            sol = solve_dirichlet(Potential(np.ones(regions.n_omega)), phi, op, regions)
            dn_on_grid(sol, op, regions)
            vals[m] = eval_G(sol, 2.13, regions)
        assert abs(vals[100] - vals[50]) < abs(vals[50] - vals[25])


class TestForwardModel:
    def test_predict_matches_manual_interpolation(self):
        spec, regions, op, phi = _setup(10)
        model = ForwardModel(op, phi, regions)
        f = Potential(np.full(regions.n_omega, 1.3))
        sol = solve_dirichlet(f, phi, op, regions)
        dn_on_grid(sol, op, regions)
        xs = np.array([-2.5, -1.7, 1.77, 2.4])
        np.testing.assert_allclose(
            model.predict(f, xs), eval_G(sol, xs, regions), rtol=1e-12
        )

    def test_plans_are_reusable_across_potentials(self):
        spec, regions, op, phi = _setup(10)
        model = ForwardModel(op, phi, regions)
        plan = model.prepare(np.array([1.8, 2.2]))
        g0 = model.predict_values(np.zeros(regions.n_omega), plan)
        g1 = model.predict_values(np.ones(regions.n_omega), plan)
        assert np.abs(g0 - g1).max() > 0

    def test_prepare_rejects_out_of_range_points(self):
        spec, regions, op, phi = _setup(10)
        model = ForwardModel(op, phi, regions)
        with pytest.raises(ValueError):
            model.prepare(np.array([0.5]))
