"""Minimizer behavior, equilibrium residual, audits and checks."""

import numpy as np
import pytest

from analytic import equilibrium_oracle, fitted_order, sample_configuration
from plate6.constitutive import (
    CosseratParams,
    EngineeringParams,
    from_engineering,
    identify_coefficients,
)
from plate6.functional import (
    BoundaryData,
    LoadSpec,
    apply_boundary,
    energy_gradient,
    total_energy,
)
from plate6.kinematics import PlateGrid, identity_configuration
from plate6.so3 import exp_so3, rotation_defect
from plate6.solver import (
    SolverSettings,
    build_initial_guess,
    equilibrium_residual,
    equivalence_audit,
    gradient_check,
    invariance_check,
    minimize,
)

MATERIAL = from_engineering(EngineeringParams(1.0, 0.3, 0.1))


def bending_problem(n, load=1e-3, thickness=0.1):
    grid = PlateGrid(1.0, 1.0, n, n, thickness)
    loads = LoadSpec.zeros(grid)
    loads.f[..., 2] = load
    bd = BoundaryData.reference(grid, "clamped")
    return grid, loads, bd


class TestMinimize:
    def test_zero_load_identity_converges_immediately(self):
        grid, _, bd = bending_problem(7)
        loads = LoadSpec.zeros(grid)
        cfg, report = minimize(grid, MATERIAL, loads, bd, SolverSettings())
        assert report.converged
        assert report.iterations <= 1
        assert abs(report.final_breakdown.total) < 1e-20

    def test_monotone_energy_history(self):
        grid, loads, bd = bending_problem(7)
        _, report = minimize(grid, MATERIAL, loads, bd, SolverSettings(max_iterations=60))
        hist = np.asarray(report.energy_history)
        slack = 1e-14 * max(1.0, abs(hist[0]))
        assert np.all(np.diff(hist) <= slack)

    def test_clamped_bending_small(self):
        grid, loads, bd = bending_problem(9)
        settings = SolverSettings(max_iterations=5000, grad_tolerance=1e-9)
        initial = build_initial_guess(grid, bd)
        initial_energy = total_energy(grid, initial, MATERIAL, loads).total
        cfg, report = minimize(grid, MATERIAL, loads, bd, settings, initial=initial)
        assert report.converged
        assert report.final_grad_norm < settings.grad_tolerance
        # discrete counterpart of the minimizer upper bound at the
        # boundary-data extension
        assert report.final_breakdown.total <= initial_energy
        # the plate sags toward the load
        assert cfg.y[4, 4, 2] > 1e-3

    def test_dirichlet_dofs_bitwise_frozen(self):
        grid, loads, bd = bending_problem(9)
        initial = build_initial_guess(grid, bd)
        cfg, _ = minimize(grid, MATERIAL, loads, bd, SolverSettings(max_iterations=40), initial=initial)
        dmask = grid.dirichlet_node_mask()
        np.testing.assert_array_equal(cfg.y[dmask], initial.y[dmask])
        np.testing.assert_array_equal(cfg.Q[dmask], initial.Q[dmask])

    def test_manifold_preserved(self):
        grid, loads, bd = bending_problem(9)
        cfg, _ = minimize(grid, MATERIAL, loads, bd, SolverSettings(max_iterations=200))
        assert float(np.max(rotation_defect(cfg.Q))) <= 1e-9

    def test_relaxed_mode_frees_boundary_rotations(self):
        grid, loads, bd = bending_problem(9)
        relaxed = BoundaryData.reference(grid, "relaxed")
        cfg, report = minimize(
            grid, MATERIAL, loads, relaxed, SolverSettings(max_iterations=2000, grad_tolerance=1e-9)
        )
        assert report.converged
        # boundary rotations moved away from the identity initial guess
        edge_defect = np.linalg.norm(cfg.Q[0, 1:-1] - np.eye(3), axis=(-2, -1))
        assert float(np.max(edge_defect)) > 1e-4

    def test_determinism(self):
        grid, loads, bd = bending_problem(7)
        settings = SolverSettings(max_iterations=50, seed=5)
        _, r1 = minimize(grid, MATERIAL, loads, bd, settings)
        _, r2 = minimize(grid, MATERIAL, loads, bd, settings)
        assert r1.energy_history == r2.energy_history
        assert r1.final_grad_norm == r2.final_grad_norm
        assert [row[:6] for row in r1.history] == [row[:6] for row in r2.history]

    def test_iteration_limit_reported(self):
        grid, loads, bd = bending_problem(9)
        _, report = minimize(grid, MATERIAL, loads, bd, SolverSettings(max_iterations=3))
        assert not report.converged
        assert "iteration limit" in report.message

    def test_nonfinite_energy_aborts_with_cell(self):
        grid, loads, bd = bending_problem(5)
        bad = identity_configuration(grid)
        bad.y[2, 2, 2] = np.nan
        with pytest.raises(RuntimeError, match="cell"):
            minimize(grid, MATERIAL, loads, bd, SolverSettings(max_iterations=1), initial=bad)

    def test_gradient_descent_method(self):
        grid, loads, bd = bending_problem(5)
        settings = SolverSettings(method="gradient_descent", max_iterations=4000, grad_tolerance=1e-8)
        _, report = minimize(grid, MATERIAL, loads, bd, settings)
        assert report.converged

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            SolverSettings(armijo_c=1.5).validate()
        with pytest.raises(ValueError):
            SolverSettings(method="newton").validate()


class TestInitialGuess:
    def test_admissible_and_finite(self):
        grid = PlateGrid(1.0, 1.0, 7, 7, 0.1, dirichlet_edges=frozenset({"left", "right"}))
        bd = BoundaryData.reference(grid, "clamped")
        bd.y_star = bd.y_star.copy()
        bd.y_star[..., 2] += 0.1  # lifted boundary
        bd.Q_star = exp_so3(np.full((7, 7, 3), [0.0, 0.3, 0.0]))
        cfg = build_initial_guess(grid, bd)
        dmask = grid.dirichlet_node_mask()
        np.testing.assert_array_equal(cfg.y[dmask], bd.y_star[dmask])
        np.testing.assert_array_equal(cfg.Q[dmask], bd.Q_star[dmask])
        energy = total_energy(grid, cfg, MATERIAL, LoadSpec.zeros(grid)).total
        assert np.isfinite(energy)

    def test_transfinite_blend_spans_interior(self):
        grid = PlateGrid(1.0, 1.0, 9, 9, 0.1)
        bd = BoundaryData.reference(grid, "clamped")
        bd.y_star = bd.y_star.copy()
        bd.y_star[..., 2] += 0.2
        cfg = build_initial_guess(grid, bd)
        # all-edges Dirichlet with constant lift: transfinite interpolation
        # reproduces the constant exactly in the interior
        np.testing.assert_allclose(cfg.y[..., 2], 0.2, atol=1e-14)


class TestGradientCheck:
    def test_generic_configuration(self, rng):
        grid = PlateGrid(1.0, 1.0, 9, 9, 0.1)
        loads = LoadSpec.zeros(grid)
        loads.f = 1e-2 * rng.standard_normal(loads.f.shape)
        cfg = identity_configuration(grid)
        cfg.y = cfg.y + 0.03 * rng.standard_normal(cfg.y.shape)
        cfg.Q = exp_so3(0.2 * rng.standard_normal((9, 9, 3))) @ cfg.Q
        report = gradient_check(grid, cfg, MATERIAL, loads, directions=20, seed=3)
        assert report.max_rel_error <= 1e-6
        assert report.eligible == report.directions

    def test_zero_gradient_point_absolute(self):
        grid = PlateGrid(1.0, 1.0, 7, 7, 0.1)
        cfg = identity_configuration(grid)
        report = gradient_check(grid, cfg, MATERIAL, LoadSpec.zeros(grid), directions=10, seed=1)
        assert report.max_abs_error <= 1e-10

    def test_pure_membrane_quadratic_in_y(self, rng):
        # with rotations frozen at the identity the energy is exactly
        # quadratic in y, so central differences agree to roundoff
        grid = PlateGrid(1.0, 1.0, 9, 9, 0.1)
        loads = LoadSpec.zeros(grid)
        cfg = identity_configuration(grid)
        cfg.y = cfg.y + 0.02 * rng.standard_normal(cfg.y.shape)
        gy, _ = energy_gradient(grid, cfg, MATERIAL, loads)
        worst = 0.0
        for _ in range(10):
            dy = rng.standard_normal(gy.shape)
            dy /= np.sqrt(np.sum(dy * dy))
            analytic = float(np.sum(gy * dy))
            step = 1e-4
            plus, minus = cfg.copy(), cfg.copy()
            plus.y = cfg.y + step * dy
            minus.y = cfg.y - step * dy
            fd = (
                total_energy(grid, plus, MATERIAL, loads).total
                - total_energy(grid, minus, MATERIAL, loads).total
            ) / (2.0 * step)
            worst = max(worst, abs(fd - analytic) / max(abs(analytic), abs(fd)))
        assert worst <= 1e-8


class TestInvarianceCheck:
    def test_identity_motion_exact(self, rng):
        grid = PlateGrid(1.0, 1.0, 7, 7, 0.1)
        cfg = identity_configuration(grid)
        cfg.y = cfg.y + 0.02 * rng.standard_normal(cfg.y.shape)
        cfg.Q = exp_so3(0.2 * rng.standard_normal((7, 7, 3))) @ cfg.Q
        report = invariance_check(grid, cfg, MATERIAL, motions=20, seed=2)
        assert report.passed
        assert report.max_energy_rel_change <= 1e-12


class TestEquivalenceAudit:
    @pytest.fixture
    def params(self):
        return CosseratParams(
            mu=1.0, lam=1.0, mu_c=0.5, internal_length=0.01,
            a5=1.0, a6=1.0, a7=0.0, p=1.0, a4=0.0, thickness=0.1,
        )

    def test_fitted_shear_correction_is_one(self, params):
        report = equivalence_audit(params, samples=10000, seed=7)
        assert report.shear_sensitive
        # regression constant established by this audit: the identification
        # is exact at shear correction factor 1
        np.testing.assert_allclose(report.fitted_shear_correction, 1.0, atol=1e-12)
        assert report.max_rel_discrepancy <= 1e-12

    def test_membrane_only_is_insensitive(self, params):
        report = equivalence_audit(params, samples=2000, seed=7, membrane_only=True)
        assert not report.shear_sensitive
        assert report.max_rel_discrepancy <= 1e-12

    def test_coupling_identity(self, params):
        report = equivalence_audit(params, samples=100, seed=0)
        assert abs(report.coupling_identity_error) <= 4.0 * np.finfo(float).eps * (
            params.thickness * (params.mu + params.mu_c)
        )

    def test_generic_parameters(self):
        cp = CosseratParams(
            mu=2.3, lam=0.7, mu_c=0.9, internal_length=0.2,
            a5=1.4, a6=0.6, a7=0.3, p=1.0, a4=0.0, thickness=0.25, kappa=0.3,
        )
        report = equivalence_audit(cp, samples=5000, seed=11)
        np.testing.assert_allclose(report.fitted_shear_correction, 1.0, atol=1e-12)
        assert report.max_rel_discrepancy <= 1e-12

    def test_rejects_wrong_regime(self, params):
        from dataclasses import replace

        with pytest.raises(ValueError, match="p = 1"):
            equivalence_audit(replace(params, p=2.0))

    def test_degenerate_couple_modulus_runs(self):
        cp = CosseratParams(mu=1.0, lam=1.0, mu_c=0.0, internal_length=0.1, thickness=0.1)
        report = equivalence_audit(cp, samples=2000, seed=1)
        assert report.max_rel_discrepancy <= 1e-12


class TestEquilibriumResidual:
    def test_identity_configuration_zero(self):
        grid = PlateGrid(1.0, 1.0, 9, 9, 0.1)
        res = equilibrium_residual(grid, identity_configuration(grid), MATERIAL)
        assert res.force_max <= 1e-13
        assert res.moment_max <= 1e-13

    def test_manufactured_solution_second_order(self):
        # exact fields with exact source terms: the discrete residual is pure
        # discretization error and must vanish at O(h^2)
        oracle = equilibrium_oracle(MATERIAL.alpha, MATERIAL.beta)
        hs, errs = [], []
        for n in (9, 17, 33):
            grid = PlateGrid(1.0, 1.0, n, n, 0.1)
            cfg = sample_configuration(grid)
            x = grid.reference_positions()
            loads = LoadSpec.zeros(grid)
            loads.f = oracle["f"](x[..., 0], x[..., 1])
            couple = oracle["c"](x[..., 0], x[..., 1])
            res = equilibrium_residual(grid, cfg, MATERIAL, loads, couple_field=couple)
            hs.append(grid.hx)
            errs.append(res.max_norm)
        assert fitted_order(hs, errs) >= 1.9

    def test_couple_field_defaults_to_load_induced(self, rng):
        grid = PlateGrid(1.0, 1.0, 7, 7, 0.1)
        cfg = identity_configuration(grid)
        loads = LoadSpec.zeros(grid)
        loads.C_omega = 1e-3 * rng.standard_normal(loads.C_omega.shape)
        res_default = equilibrium_residual(grid, cfg, MATERIAL, loads)
        from plate6.so3 import skew_part_axial

        induced = 2.0 * skew_part_axial(
            np.einsum("...ij,...kj->...ik", loads.C_omega, cfg.Q)
        )
        res_explicit = equilibrium_residual(grid, cfg, MATERIAL, loads, couple_field=induced)
        np.testing.assert_array_equal(res_default.moment_residual, res_explicit.moment_residual)
