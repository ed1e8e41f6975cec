"""Symbol unit tests (multiplier, dispersion symbol, modulation, resonance function)"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.dispersion.symbol_core import (
    EnergyParam, SpectralPoint, fractional_kernel_bound, multiplier_array, multiplier_m,
    resonance_H, resonance_dH, sigma, symbol_array, symbol_p_complex, symbol_w,
)
from src.utils.error_handler import PreconditionError


coords = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False, allow_infinity=False)
energies = st.floats(min_value=-4.0, max_value=4.0, allow_nan=False, allow_infinity=False)


class TestSymbolCore:
    """Test class for the pointwise symbols"""

    # ===================== 1. Hand Values =====================

    def test_symbol_on_axes(self):
        """[Basic] w(1, 0; -1) = 8 and w vanishes on the ξ2 axis"""
        assert symbol_w((1.0, 0.0), -1.0).value == pytest.approx(8.0)
        assert symbol_w((0.0, 1.0), -1.0).value == 0.0
        assert symbol_w((1.0, 1.0), 0.0).value == pytest.approx(-4.0)

    def test_origin_convention(self):
        """[Basic] m(0) = 0 and w(0) = 0 with the convention flag set"""
        w = symbol_w((0.0, 0.0), -1.0)
        assert w.value == 0.0
        assert w.at_origin_convention
        assert multiplier_m((0.0, 0.0)) == 0
        assert float(symbol_array(0.0, 0.0, 5.0)) == 0.0

    def test_multiplier_value(self):
        """[Basic] m(1, 1) = (1 - i)/(1 + i) = -i"""
        assert multiplier_m((1.0, 1.0)) == pytest.approx(-1j)

    def test_sigma_is_tau_minus_w(self):
        """[Basic] σ = τ - w"""
        p = SpectralPoint(1.0, 0.0, 3.0)
        assert sigma(p, -1.0) == pytest.approx(3.0 - 8.0)

    # ===================== 2. Structural Properties =====================

    @settings(max_examples=100, deadline=None)
    @given(coords, coords)
    def test_multiplier_is_unimodular(self, a, b):
        """[Medium] |m(ξ)| = 1 away from the origin"""
        if a * a + b * b < 1e-12:
            return
        assert abs(multiplier_array(a, b)) == pytest.approx(1.0)

    @settings(max_examples=100, deadline=None)
    @given(coords, coords, energies, st.floats(min_value=0.25, max_value=4.0))
    def test_energy_scaling(self, a, b, E, lam):
        """[Medium] w(λξ; λ²E) = λ³ w(ξ; E)"""
        if a * a + b * b < 1e-6:
            return
        left = float(symbol_array(lam * a, lam * b, lam * lam * E))
        right = lam ** 3 * float(symbol_array(a, b, E))
        scale = max(1.0, abs(right))
        assert abs(left - right) <= 1e-9 * scale

    @settings(max_examples=100, deadline=None)
    @given(coords, coords, energies)
    def test_complex_identification(self, a, b, E):
        """[Medium] the complex form (ξ³ + ξ̄³)(1 - 3E/|ξ|²) equals w"""
        if a * a + b * b < 1e-12:
            return
        expected = float(symbol_array(a, b, E))
        assert symbol_p_complex(complex(a, b), E) == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_vectorized_matches_scalar(self):
        """[Medium] array and scalar paths agree"""
        rng = np.random.default_rng(1)
        pts = rng.uniform(-3, 3, size=(20, 2))
        values = symbol_array(pts[:, 0], pts[:, 1], -2.0)
        for (a, b), v in zip(pts, values):
            assert symbol_w((a, b), -2.0).value == pytest.approx(v)

    def test_fractional_kernel_bound(self):
        """[Basic] |ab/(a²+b²)| ≤ 1/2, 0 at the origin"""
        a = np.linspace(-3, 3, 61)
        out = fractional_kernel_bound(a[:, None], a[None, :])
        assert out.max() <= 0.5 + 1e-15
        assert out[30, 30] == 0.0
        assert fractional_kernel_bound(1.0, 1.0) == pytest.approx(0.5)

    # ===================== 3. Resonance Function =====================

    def test_resonance_symmetry(self):
        """[Medium] H[ξ, ξ̂] = H[ξ̂ - ξ, ξ̂]"""
        xi, xihat = (0.7, -0.4), (3.1, 1.2)
        swapped = (xihat[0] - xi[0], xihat[1] - xi[1])
        assert resonance_H(xi, xihat, -1.0) == pytest.approx(resonance_H(swapped, xihat, -1.0))

    @pytest.mark.parametrize("axis", [1, 2])
    def test_resonance_derivative_matches_differences(self, axis):
        """[Hard] closed-form ∂H agrees with a central difference"""
        xi, xihat, E, h = np.array([0.7, -0.4]), (3.1, 1.2), -1.5, 1e-6
        step = np.zeros(2)
        step[axis - 1] = h
        fd = (resonance_H(tuple(xi + step), xihat, E) - resonance_H(tuple(xi - step), xihat, E)) / (2 * h)
        exact = resonance_dH(tuple(xi), xihat, E, axis)
        assert exact == pytest.approx(fd, rel=1e-6, abs=1e-6)

    # ===================== 4. Error Handling =====================

    def test_resonance_requires_negative_energy(self):
        """[Basic] H is defined for E < 0 only"""
        with pytest.raises(PreconditionError, match="E < 0"):
            resonance_H((1.0, 0.0), (2.0, 0.0), 1.0)

    def test_resonance_derivative_singular_points(self):
        """[Basic] ∂H rejects ξ = 0 and a bad axis"""
        with pytest.raises(PreconditionError):
            resonance_dH((0.0, 0.0), (2.0, 0.0), -1.0, 1)
        with pytest.raises(PreconditionError):
            resonance_dH((1.0, 0.5), (2.0, 0.0), -1.0, 3)

    def test_non_finite_inputs(self):
        """[Basic] non-finite energies and frequencies are rejected"""
        with pytest.raises(PreconditionError):
            EnergyParam(math.nan)
        with pytest.raises(PreconditionError):
            SpectralPoint(math.inf, 0.0)


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
