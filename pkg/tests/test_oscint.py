"""Oscillatory integral tests (partition of unity, integrands, decay fitting, propagator)"""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import j0, jn_zeros

from src.dispersion.oscint import (
    OscIntQuery, QuadControl, _lambda_layout, _xi_layout, compensated_bounded, decay_probe,
    energy_envelope, eval_I, fit_decay, integrand_lambda, linear_propagator, lp_norm,
    propagator_decay_probe, strichartz_probe, transition, u_label,
)
from src.dispersion.stationary import lambda_map_jacobian
from src.solver.grid import GridSpec, RealField2D
from src.utils.error_handler import PreconditionError, ResolutionError


def _gaussian(grid: GridSpec, sigma: float = 1.0) -> RealField2D:
    X, Y = grid.mesh()
    return RealField2D(grid, np.exp(-(X ** 2 + Y ** 2) / (2 * sigma ** 2)))


def _radial_integral(t: float, alpha: float, zeros: int = 120, passes: int = 40) -> float:
    """I(t, 0; -1) = 2π∫₀^∞ J0(2t(r³ + 3r)) r^{1+α} dr.

    Quadrature between consecutive zeros of J0, then repeated averaging of the
    alternating partial sums.
    """
    s = np.concatenate([[0.0], jn_zeros(0, zeros) / (2.0 * t)])
    c = np.cbrt(0.5 * s + np.sqrt(0.25 * s * s + 1.0))
    r = c - 1.0 / c
    pieces = [quad(lambda x: j0(2.0 * t * (x ** 3 + 3.0 * x)) * x ** (1.0 + alpha), a, b,
                   epsabs=1e-14, epsrel=1e-12, limit=200)[0]
              for a, b in zip(r[:-1], r[1:])]
    sums = np.cumsum(pieces)
    for _ in range(passes):
        sums = 0.5 * (sums[:-1] + sums[1:])
    return 2.0 * math.pi * float(sums[-1])


class TestPartition:
    """Test class for the smooth cutoffs"""

    # ===================== 1. Transition Profile =====================

    def test_transition_plateaus(self):
        """[Basic] 1 on x ≤ 1, 0 on x ≥ 2"""
        x = np.array([-1.0, 0.0, 1.0, 2.0, 3.0])
        assert transition(x).tolist() == [1.0, 1.0, 1.0, 0.0, 0.0]

    def test_transition_monotone(self):
        """[Basic] strictly decreasing across the band"""
        vals = transition(np.linspace(1.01, 1.99, 50))
        assert np.all(np.diff(vals) < 0)
        assert np.all((vals > 0) & (vals < 1))
        assert float(transition(1.5)) == pytest.approx(0.5)

    # ===================== 2. Layouts =====================

    @pytest.mark.parametrize("layout_for,E", [(_lambda_layout, -1.0), (_xi_layout, -2.0)])
    def test_weights_telescope(self, layout_for, E):
        """[Medium] Σ_k weight_k = 1 - Π(1 - χ_k)"""
        q = OscIntQuery(1.0, 2.0 + 1.0j, E)
        layout = layout_for(q, 64.0)
        rng = np.random.default_rng(3)
        z = rng.uniform(-4, 4, 400) + 1j * rng.uniform(-4, 4, 400)
        total = sum(layout.weight(k, z) for k in range(len(layout.cutoffs)))
        rest = np.ones_like(z.real)
        for cut in layout.cutoffs:
            rest = rest * (1.0 - cut.value(z))
        assert np.allclose(total, 1.0 - rest, atol=1e-12)

    def test_lambda_layout_covers_unit_circle(self):
        """[Basic] the first patch equals 1 on the unit circle"""
        layout = _lambda_layout(OscIntQuery(1.0, 0j), 64.0)
        z = np.exp(1j * np.linspace(0, 2 * np.pi, 17))
        assert np.allclose(layout.weight(0, z), 1.0)


class TestIntegrand:
    """Test class for the λ-plane integrand"""

    def test_zero_inside_unit_disk(self):
        """[Basic] f vanishes for |λ| ≤ 1"""
        vals = integrand_lambda(2.0 + 1.0j, np.array([0.5, 1.0, 0.3j, -0.2 - 0.6j]), t=3.0)
        assert np.all(vals == 0)

    @pytest.mark.parametrize("lam", [2.0, 1.5 - 0.5j, -3.0j])
    def test_modulus_is_weighted_jacobian(self, lam):
        """[Basic] |f| = |ξ|^α times the Jacobian"""
        alpha = 0.5
        r = abs(lam)
        expected = (r - 1.0 / r) ** alpha * lambda_map_jacobian(lam)
        val = integrand_lambda(1.0 + 1.0j, np.array([lam]), t=2.0, alpha=alpha, beta=0.7)[0]
        assert abs(val) == pytest.approx(expected)


class TestDecayFit:
    """Test class for the decay fitting helpers"""

    def test_power_law_fit(self):
        """[Basic] log-log slope of 2·t^{-3/4}"""
        ts = [2.0 ** k for k in range(8)]
        fit = fit_decay(ts, [2.0 * t ** -0.75 for t in ts], alpha=0.0)
        assert fit.exponent == pytest.approx(-0.75)
        assert fit.constant == pytest.approx(math.log(2.0))
        assert fit.rms_residual < 1e-12
        assert fit.t_range == (1.0, 128.0)

    def test_too_few_points(self):
        """[Basic] fewer than five usable points give no fit"""
        assert fit_decay([1.0, 2.0, 4.0, 8.0, 16.0], [1.0, 0.5, math.nan, 0.2, -1.0], 0.0) is None

    def test_compensated_bounded(self):
        """[Basic] t^{-3/4} is bounded against 0.7, t^{-1/2} is not"""
        ts = [10.0 ** (0.5 * k) for k in range(9)]
        assert compensated_bounded(ts, [t ** -0.75 for t in ts], 0.7)
        assert not compensated_bounded(ts, [t ** -0.5 for t in ts], 0.7)

    def test_u_label(self):
        """[Basic] labels keep sign and imaginary part"""
        assert u_label(2.0 + 1.0j) == "2+1j"
        assert u_label(-6.0) == "-6+0j"

    def test_probe_needs_two_decades(self):
        """[Basic] a short time grid is rejected before any quadrature"""
        with pytest.raises(PreconditionError, match="two decades"):
            decay_probe(0.0, 0.0, [0j], [1.0, 2.0, 4.0])


class TestQueries:
    """Test class for query validation"""

    @pytest.mark.parametrize("kwargs", [
        {"t": 0.0, "u": 0j},
        {"t": 1.0, "u": 0j, "alpha": 1.0},
        {"t": 1.0, "u": 0j, "E": 1.0},
        {"t": 1.0, "u": complex(math.inf, 0)},
    ])
    def test_invalid_queries(self, kwargs):
        """[Basic] t ≤ 0, α ∉ [0, 1), E ≥ 0 and non-finite u are rejected"""
        with pytest.raises(PreconditionError):
            OscIntQuery(**kwargs)

    def test_invalid_control(self):
        """[Basic] a single level cannot be stabilized"""
        with pytest.raises(PreconditionError):
            QuadControl(richardson_levels=1)
        with pytest.raises(PreconditionError):
            QuadControl(cutoff_profile="box")

    def test_lambda_representation_needs_unit_energy(self):
        """[Basic] the λ-plane is only available at E = -1"""
        with pytest.raises(PreconditionError, match="E = -1"):
            eval_I(OscIntQuery(1.0, 0j, -2.0), "lambda")

    def test_unknown_representation(self):
        """[Basic] representation names are checked"""
        with pytest.raises(PreconditionError):
            eval_I(OscIntQuery(1.0, 0j), "polar")


class TestValues:
    """Test class for values of I against the radial Bessel reduction at u = 0"""

    def test_reference_is_stable(self):
        """[Basic] more zeros do not move the reference"""
        assert _radial_integral(1.0, 0.0, zeros=160) == pytest.approx(_radial_integral(1.0, 0.0), rel=1e-7)

    @pytest.mark.parametrize("representation", ["lambda", "xi"])
    @pytest.mark.parametrize("alpha", [0.0, 0.5])
    def test_radial_value(self, representation, alpha):
        """[Hard] both representations match 2π∫J0(2t(r³+3r)) r^{1+α} dr at t = 1"""
        reference = _radial_integral(1.0, alpha)
        res = eval_I(OscIntQuery(1.0, 0j, -1.0, alpha), representation)
        assert res.converged
        assert abs(res.value - reference) <= 1e-3 * abs(reference)

    def test_energy_envelope(self):
        """[Medium] |I| at E = -4 scales to the E = -1 value; ratio = |I| / bound shape"""
        alpha = 0.5
        env = energy_envelope(0.125, 0j, -4.0, alpha)
        assert env["abs_I"] == pytest.approx(4.0 ** ((alpha + 2.0) / 2.0) * abs(_radial_integral(1.0, alpha)),
                                             rel=1e-3)
        shape = 4.0 ** ((alpha - 1.0) / 8.0) / 0.125 ** ((alpha + 3.0) / 4.0)
        assert env["bound_shape"] == pytest.approx(shape)
        assert env["ratio"] == pytest.approx(env["abs_I"] / shape)

    def test_energy_envelope_unit_shape(self):
        """[Basic] at E = -1, t = 1 the bound shape is 1"""
        plain = energy_envelope(1.0, 0j, -1.0, 0.0)
        assert plain["bound_shape"] == pytest.approx(1.0)
        assert plain["ratio"] == pytest.approx(plain["abs_I"])


class TestPropagator:
    """Test class for the linear propagator probes"""

    def test_unitary_on_band_limited_data(self):
        """[Medium] U(t) preserves the L² norm"""
        grid = GridSpec(64, 64, 20.0, 20.0)
        v0 = _gaussian(grid)
        vt = linear_propagator(v0.values, grid, -1.0, 0.7)
        assert lp_norm(vt, grid.cell_area, 2.0) == pytest.approx(v0.l2_norm(), rel=1e-10)

    def test_lp_norm_sup(self):
        """[Basic] p = ∞ is the maximum modulus"""
        assert lp_norm(np.array([[1.0, -3.0], [2.0, 0.5]]), 1.0, math.inf) == 3.0

    def test_table_shape(self):
        """[Medium] one row per time and p = 2/(1 - β)"""
        grid = GridSpec(64, 64, 20.0, 20.0)
        table = propagator_decay_probe(_gaussian(grid), 0.0, 0.5, -1.0, [0.0, 0.5, 1.0, 2.0])
        assert table.p == pytest.approx(4.0)
        assert [row["t"] for row in table.rows] == [0.0, 0.5, 1.0, 2.0]
        assert all(row["l2_norm"] == pytest.approx(table.rows[0]["l2_norm"], rel=1e-10) for row in table.rows)

    def test_under_resolved_data_rejected(self):
        """[Basic] a field with energy near the cutoff fails the tail gate"""
        grid = GridSpec(16, 16, 2 * np.pi, 2 * np.pi)
        X, _ = grid.mesh()
        with pytest.raises(ResolutionError):
            propagator_decay_probe(RealField2D(grid, np.cos(6 * X)), 0.0, 0.5, -1.0, [1.0])

    def test_strichartz_isometry_row(self):
        """[Basic] β = 0 gives p = 2, q = ∞ and the L² isometry"""
        grid = GridSpec(64, 64, 20.0, 20.0)
        record = strichartz_probe(_gaussian(grid), 0.0, 0.0, -1.0, [0.0, 0.25, 0.5, 1.0, 2.0])
        assert record["p"] == 2.0 and math.isinf(record["q"])
        assert record["mixed_ratio"] == pytest.approx(1.0, rel=1e-10)
        assert record["mixed_refinement_change"] < 1e-10

    def test_strichartz_exponents(self):
        """[Medium] p = 2/(1 - β), 2/q = β((α+3)/4 - ε), finite ratios"""
        grid = GridSpec(64, 64, 20.0, 20.0)
        ts = np.linspace(0.0, 2.0, 17)
        record = strichartz_probe(_gaussian(grid), 0.5, 0.5, -1.0, ts)
        assert record["p"] == pytest.approx(4.0)
        assert 2.0 / record["q"] == pytest.approx(0.5 * (3.5 / 4.0 - 0.05))
        for key in ("mixed_ratio", "l4_ratio", "mixed_refinement_change", "l4_refinement_change"):
            assert math.isfinite(record[key]) and record[key] >= 0
        assert record["mixed_ratio"] > 0 and record["l4_ratio"] > 0

    def test_strichartz_needs_three_times(self):
        """[Basic] fewer than three samples are rejected"""
        grid = GridSpec(64, 64, 20.0, 20.0)
        with pytest.raises(PreconditionError, match="three"):
            strichartz_probe(_gaussian(grid), 0.0, 0.5, -1.0, [0.5, 1.0])

    def test_beta_range(self):
        """[Basic] β outside [0, 1] is rejected"""
        grid = GridSpec(64, 64, 20.0, 20.0)
        with pytest.raises(PreconditionError):
            propagator_decay_probe(_gaussian(grid), 0.0, 1.5, -1.0, [1.0])


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
