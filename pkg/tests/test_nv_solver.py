"""NV solver tests (grid, ETDRK4 stepping, right-hand sides, invariants, exact solutions)"""

import math

import numpy as np
import pytest

import src.solver.nv_solver as nv_solver
from src.solver.etdrk4 import ETDRK4Integrator
from src.solver.grid import (
    GridSpec, RealField2D, SpectralField2D, enforce_hermitian, hermitian_residue, resolution_check,
    tail_fraction,
)
from src.solver.nv_solver import (
    BlowupParams, NVSolver, NVState, blowup_residual, compute_w, evolve, gaussian, hermitian_drift,
    initial_data, invariants, kdv_profile, kdv_reference, kdv_soliton_speed, lifespan_probe, nv_rhs,
    real_form_rhs, recovery_identities, rhs_imaginary_residue, scaling_symmetry_check,
    single_mode,
)
from src.utils.error_handler import PreconditionError, ResolutionError


def _box(n: int = 16) -> GridSpec:
    return GridSpec(n, n, 2 * np.pi, 2 * np.pi)


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


class TestGrid:
    """Test class for periodic grids and spectral fields"""

    # ===================== 1. Construction =====================

    @pytest.mark.parametrize("nx", [4, 12, 100])
    def test_point_counts(self, nx):
        """[Basic] counts must be powers of two >= 8"""
        with pytest.raises(PreconditionError, match="power of two"):
            GridSpec(nx, 16, 1.0, 1.0)

    def test_coordinates(self):
        """[Basic] the box is centred and dx = L/n"""
        grid = GridSpec(8, 16, 4.0, 2.0)
        assert grid.dx == 0.5 and grid.dy == 0.125
        assert grid.x[0] == -2.0 and grid.y[-1] == pytest.approx(1.0 - 0.125)
        assert grid.mesh()[0].shape == (8, 16)

    def test_scaled_grid(self):
        """[Basic] x -> λx shrinks the box, keeps the counts"""
        grid = GridSpec(32, 16, 20.0, 10.0).scaled(2.0)
        assert (grid.nx, grid.ny, grid.Lx, grid.Ly) == (32, 16, 10.0, 5.0)

    def test_workers_not_part_of_equality(self):
        """[Basic] equal boxes compare equal for any worker count"""
        assert GridSpec(8, 8, 1.0, 1.0, workers=4) == GridSpec(8, 8, 1.0, 1.0)

    # ===================== 2. Spectral Operations =====================

    def test_derivative_of_sine(self):
        """[Medium] ∂_x sin(x + 2y) = cos(x + 2y), ∂_y = 2cos"""
        grid = _box()
        X, Y = grid.mesh()
        f = np.sin(X + 2 * Y)
        assert np.allclose(grid.derivative(f, ox=1), np.cos(X + 2 * Y), atol=1e-12)
        assert np.allclose(grid.derivative(f, oy=1), 2 * np.cos(X + 2 * Y), atol=1e-12)

    def test_hermitian_projection(self):
        """[Basic] spectra of real fields are hermitian, projection fixes others"""
        grid = _box()
        rng = np.random.default_rng(0)
        real = grid.fft(rng.normal(size=grid.shape))
        assert hermitian_residue(real) < 1e-14
        noisy = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
        assert hermitian_residue(noisy) > 0.1
        assert hermitian_residue(enforce_hermitian(noisy)) < 1e-14

    def test_spectral_round_trip(self):
        """[Basic] to_real recovers the samples"""
        grid = _box()
        v = single_mode(grid, 2, 1)
        back = v.spectrum().to_real()
        assert np.allclose(back.values, v.values)

    def test_non_hermitian_spectrum_rejected(self):
        """[Basic] a complex field has no real form"""
        grid = _box()
        coeffs = np.zeros(grid.shape, dtype=complex)
        coeffs[1, 0] = 1.0
        with pytest.raises(PreconditionError, match="hermitian"):
            SpectralField2D(grid, coeffs).to_real()

    def test_field_validation(self):
        """[Basic] complex samples and wrong shapes are rejected"""
        grid = _box()
        with pytest.raises(PreconditionError):
            RealField2D(grid, np.zeros(grid.shape, dtype=complex))
        with pytest.raises(PreconditionError, match="shape"):
            RealField2D(grid, np.zeros((8, 8)))

    # ===================== 3. Resolution Gate =====================

    def test_tail_of_resolved_field(self):
        """[Basic] a well-resolved Gaussian passes the gate"""
        v = gaussian(GridSpec(64, 64, 20.0, 20.0))
        assert resolution_check(v) < 1e-10

    def test_tail_of_under_resolved_field(self):
        """[Basic] a mode at the truncation edge fails"""
        grid = _box()
        v = single_mode(grid, 5, 0)
        assert tail_fraction(v.values, grid) == pytest.approx(1.0)
        with pytest.raises(ResolutionError):
            resolution_check(v)


class TestETDRK4:
    """Test class for the exponential integrator"""

    def test_pure_linear_step_is_exact(self):
        """[Basic] with N = 0 one step multiplies by e^{dt·L}"""
        L = np.array([-2j, 0.5j, 0.0])
        integ = ETDRK4Integrator(L, lambda c: np.zeros_like(c), 0.3)
        c0 = np.array([1.0 + 0j, 2.0 - 1j, 0.5])
        assert np.allclose(integ.step(c0), np.exp(0.3 * L) * c0, atol=1e-14)

    def test_constant_forcing_is_exact(self):
        """[Medium] u' = Lu + f has the closed form e^{tL}u0 + f(e^{tL} - 1)/L"""
        L, f, dt = np.array([2j, -3j]), np.array([1.0 + 0.5j, -0.2j]), 0.1
        integ = ETDRK4Integrator(L, lambda c: f, dt)
        u = integ.forward_integrate(np.array([1.0 + 0j, 1.0 + 0j]), 10)
        t = 1.0
        exact = np.exp(t * L) * 1.0 + f * (np.exp(t * L) - 1.0) / L
        assert np.allclose(u, exact, atol=1e-10)

    def test_fourth_order_convergence(self):
        """[Hard] halving dt cuts the error of u' = -u² by about 16"""
        def error(dt):
            integ = ETDRK4Integrator(np.zeros(1), lambda c: -c * c, dt)
            u = integ.forward_integrate(np.array([1.0 + 0j]), int(round(1.0 / dt)))
            return abs(u[0] - 0.5)

        ratio = error(0.1) / error(0.05)
        assert 12.0 < ratio < 20.0

    def test_invalid_step(self):
        """[Basic] time step and contour size are validated"""
        with pytest.raises(PreconditionError):
            ETDRK4Integrator(np.zeros(2), lambda c: c, 0.0)
        with pytest.raises(PreconditionError):
            ETDRK4Integrator(np.zeros(2), lambda c: c, 0.1, num_roots_of_unity=2)


class TestNVOperators:
    """Test class for w recovery and the right-hand sides"""

    # ===================== 1. Recovering w =====================

    def test_w_of_single_modes(self):
        """[Simple] cos x gives w = -3cos x, cos y gives w = 3cos y"""
        grid = _box()
        X, Y = grid.mesh()
        assert np.allclose(compute_w(RealField2D(grid, np.cos(X))), -3 * np.cos(X), atol=1e-13)
        assert np.allclose(compute_w(RealField2D(grid, np.cos(Y))), 3 * np.cos(Y), atol=1e-13)

    def test_w_has_no_mean(self):
        """[Basic] ŵ(0) = 0"""
        grid = _box()
        w = compute_w(RealField2D(grid, 1.0 + single_mode(grid).values))
        assert abs(w.mean()) < 1e-14

    def test_recovery_identities(self):
        """[Medium] Δw1 = 3(∂y² - ∂x²)v and Δw2 = 6∂xy v"""
        res = recovery_identities(gaussian(GridSpec(64, 64, 20.0, 20.0)))
        assert res["w1"] < 1e-10 and res["w2"] < 1e-10

    # ===================== 2. Right-hand Sides =====================

    def test_complex_and_real_forms_agree(self):
        """[Medium] both right-hand sides give the same field"""
        grid = GridSpec(64, 64, 20.0, 20.0)
        v = gaussian(grid, 1.0, 1.0, x0=0.5, y0=-0.3)
        state = NVState.from_v(v, -1.0)
        assert _rel(real_form_rhs(state).values, nv_rhs(state).values) < 1e-10
        assert rhs_imaginary_residue(state) < 1e-12

    def test_rhs_rejects_imaginary_residue(self, monkeypatch):
        """[Medium] an imaginary part above 1e-12 of the field norm is refused"""
        grid = GridSpec(32, 32, 20.0, 20.0)
        state = NVState.from_v(gaussian(grid, 1.0, 1.0, x0=0.5), -1.0)
        real = real_form_rhs(state).values
        monkeypatch.setattr(nv_solver, "_complex_rhs", lambda s: real + 1e-11j * real)
        with pytest.raises(PreconditionError, match="not real"):
            nv_rhs(state)
        assert np.array_equal(nv_rhs(state, imag_tol=1e-10).values, real)

    def test_radial_mass_vanishes(self):
        """[Medium] M = ∫vw is 0 for a radial profile"""
        v = gaussian(GridSpec(128, 128, 20.0, 20.0))
        report = invariants(NVState.from_v(v, -1.0))
        assert abs(report.mass) / v.l2_norm() ** 2 < 1e-10
        assert report.l1_integral == pytest.approx(2 * math.pi, rel=1e-10)


class TestNVEvolution:
    """Test class for time stepping and the exact-solution checks"""

    # ===================== 1. Linear Flow =====================

    def test_linear_plane_wave(self):
        """[Simple] cos(x + y) travels with p(1, 1; -1) = -10"""
        grid = _box()
        X, Y = grid.mesh()
        final = evolve(NVState.from_v(single_mode(grid), -1.0), 1.0, 0.1, nonlinear=False)
        assert final.t == pytest.approx(1.0)
        assert np.allclose(final.v.values, np.cos(X + Y + 10.0), atol=1e-10)

    def test_l1_integral_conserved(self):
        """[Medium] ∫v is unchanged by the nonlinear flow"""
        v0 = gaussian(GridSpec(64, 64, 20.0, 20.0), 0.5)
        final = evolve(NVState.from_v(v0, -1.0), 0.05, 1e-3)
        assert final.v.integral() == pytest.approx(v0.integral(), rel=1e-12)

    def test_cfl_violation(self):
        """[Basic] an oversized step is refused before stepping"""
        v0 = gaussian(GridSpec(64, 64, 20.0, 20.0))
        with pytest.raises(PreconditionError, match="advection bound"):
            evolve(NVState.from_v(v0, -1.0), 1.0, 1.0)

    def test_negative_time(self):
        """[Basic] T must be non-negative"""
        v0 = gaussian(_box(32))
        with pytest.raises(PreconditionError):
            NVSolver(v0.grid, -1.0, 0.01).evolve(NVState.from_v(v0, -1.0), -1.0)

    def test_hermitian_drift(self):
        """[Hard] without the projection v̂ stays hermitian over 10³ nonlinear steps"""
        v0 = gaussian(GridSpec(32, 32, 20.0, 20.0), 0.5, 1.0, x0=1.5, y0=-2.0)
        assert hermitian_drift(NVState.from_v(v0, -1.0), 1e-3, 1000) <= 1e-11

    # ===================== 2. Exact Solutions =====================

    def test_kdv_speed(self):
        """[Basic] velocity -(6(E + v̄) + 2c)"""
        assert kdv_soliton_speed(1.0, -1.0, 0.0) == pytest.approx(4.0)
        assert kdv_soliton_speed(2.0, 0.0, -0.1) == pytest.approx(-3.4)

    def test_kdv_reduction(self):
        """[Hard] a y-independent soliton follows the mapped KdV solution"""
        grid = GridSpec(256, 8, 40.0, 10.0)
        c, x0, E = 1.0, -4.0, -1.0
        v0 = kdv_profile(grid, c, x0)
        final = evolve(NVState.from_v(v0, E), 0.25, 0.005)
        reference = kdv_reference(grid, c, x0, E, final.t, float(v0.values.mean()))
        assert _rel(final.v.values, reference.values) < 1e-2

    def test_blowup_residual(self):
        """[Medium] the closed-form blow-up solves the E = 0 equation"""
        assert blowup_residual(BlowupParams(1.0, 1.0, 1.0)) <= 1e-5

    def test_blowup_preconditions(self):
        """[Basic] E != 0 and non-positive φ are rejected, φ = a is trivial"""
        with pytest.raises(PreconditionError, match="E = 0"):
            blowup_residual(BlowupParams(1.0, 1.0, 1.0), E=-1.0)
        with pytest.raises(PreconditionError, match="positive"):
            blowup_residual(BlowupParams(-1.0, 0.0, 1.0))
        assert blowup_residual(BlowupParams(2.0, 0.0, 0.0)) == 0.0

    def test_scaling_symmetry(self):
        """[Hard] v_λ(T/λ³) = λ²v(T) on rescaled grids"""
        v0 = gaussian(GridSpec(64, 64, 20.0, 20.0), 0.5)
        assert scaling_symmetry_check(v0, -1.0, 2.0, 0.02, 1e-3) < 1e-9
        assert scaling_symmetry_check(v0, -1.0, 1.0, 0.02, 1e-3) == 0.0

    def test_scaling_identity_skips_evolution(self, monkeypatch):
        """[Basic] λ = 1 returns 0 without stepping"""
        def refuse(*args, **kwargs):
            raise AssertionError("evolve called")

        monkeypatch.setattr(NVSolver, "evolve", refuse)
        v0 = gaussian(GridSpec(64, 64, 20.0, 20.0), 0.5)
        assert scaling_symmetry_check(v0, -1.0, 1.0, 0.02, 1e-3) == 0.0
        with pytest.raises(AssertionError, match="evolve called"):
            scaling_symmetry_check(v0, -1.0, 2.0, 0.02, 1e-3)

    # ===================== 3. Presets and Probes =====================

    def test_initial_data_presets(self):
        """[Basic] named presets build fields, unknown names fail"""
        grid = GridSpec(32, 32, 20.0, 20.0)
        assert initial_data("gaussian", grid, sigma=2.0).values.max() == pytest.approx(1.0, rel=1e-2)
        assert initial_data("kdv_soliton", grid, c=2.0, x0=-5.0).values.min() == pytest.approx(-1.0, rel=1e-2)
        with pytest.raises(PreconditionError, match="preset"):
            initial_data("vortex", grid)

    def test_lifespan_rows(self):
        """[Basic] one row per energy, smooth data reaches T_max"""
        v0 = gaussian(GridSpec(32, 32, 20.0, 20.0), 0.1, 2.0)
        rows = lifespan_probe(v0, [-1.0, 1.0], 0.01, 1e-3)
        assert [r["E"] for r in rows] == [-1.0, 1.0]
        assert all(r["status"] == "OK" and r["t_reached"] == pytest.approx(0.01) for r in rows)


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
