"""Stationary-point tests (λ-map, phase derivatives, cubic roots, region classification)"""

import cmath
import math

import pytest

from src.dispersion.stationary import (
    PhasePoint, Region, boundary_curve, factorization_check, lambda_map, lambda_map_jacobian,
    phase_G, phase_S, phase_S_lambda, solve_cubic, solve_Q, wirtinger_report,
)
from src.utils.error_handler import PreconditionError


def _matches(roots, expected, tol=1e-6):
    remaining = list(expected)
    for z in roots:
        best = min(remaining, key=lambda e: abs(e - z))
        if abs(best - z) > tol:
            return False
        remaining.remove(best)
    return True


class TestLambdaPlane:
    """Test class for the change of variables and the phase"""

    # ===================== 1. Change of Variables =====================

    def test_lambda_map_values(self):
        """[Basic] ξ(2) = -1.5i and the unit circle maps to 0"""
        assert lambda_map(2.0) == pytest.approx(-1.5j)
        for theta in (0.0, 0.4, 2.0, 5.5):
            assert abs(lambda_map(cmath.exp(1j * theta))) < 1e-14

    @pytest.mark.parametrize("lam", [1.5, 2.0 + 1.0j, -0.3 + 3.0j])
    def test_lambda_map_modulus(self, lam):
        """[Basic] |ξ| = |λ| - 1/|λ|"""
        r = abs(lam)
        assert abs(lambda_map(lam)) == pytest.approx(r - 1.0 / r)

    def test_jacobian(self):
        """[Basic] (|λ|⁴ - 1)/|λ|⁴, vanishing on the unit circle"""
        assert lambda_map_jacobian(2.0) == pytest.approx(15.0 / 16.0)
        assert lambda_map_jacobian(1j) == pytest.approx(0.0)

    # ===================== 2. Phase =====================

    @pytest.mark.parametrize("u,lam", [(0j, 1.5 + 0.2j), (2.0 + 1.0j, 1.3 + 0.4j), (-6.0, -2.0 + 0.7j)])
    def test_phase_is_imaginary(self, u, lam):
        """[Basic] S = G - conj G is purely imaginary"""
        assert phase_S(u, lam).real == pytest.approx(0.0, abs=1e-12)

    def test_first_derivative_formula(self):
        """[Basic] S_λ = ū/2 - u/(2λ²) - 3λ² + 3/λ⁴"""
        u, lam = 3.0 - 2.0j, 1.2 + 0.5j
        expected = u.conjugate() / 2 - u / (2 * lam ** 2) - 3 * lam ** 2 + 3 / lam ** 4
        assert phase_S_lambda(u, lam) == pytest.approx(expected)

    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_derivative_chain(self, order):
        """[Medium] each order of G is the complex derivative of the previous one"""
        u, lam, h = 2.0 + 1.0j, 1.3 + 0.4j, 1e-5
        fd = (phase_G(u, lam + h, order - 1) - phase_G(u, lam - h, order - 1)) / (2 * h)
        exact = phase_G(u, lam, order)
        assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))

    def test_wirtinger_report(self):
        """[Medium] closed forms agree with finite-difference Wirtinger derivatives"""
        report = wirtinger_report(2.0 + 1.0j, 1.3 + 0.4j)
        assert report["rel_err_first"] < 1e-6
        assert report["rel_err_second"] < 1e-6

    # ===================== 3. Error Handling =====================

    def test_lambda_zero_rejected(self):
        """[Basic] λ = 0 is outside the domain"""
        with pytest.raises(PreconditionError, match="lambda != 0"):
            lambda_map(0j)
        with pytest.raises(PreconditionError):
            phase_S(1.0, 0.0)

    def test_bad_order(self):
        """[Basic] derivative order above 4 is rejected"""
        with pytest.raises(PreconditionError, match="order"):
            phase_G(0j, 2.0, 5)

    def test_phase_point_requires_positive_time(self):
        """[Basic] u = z/t needs t > 0"""
        with pytest.raises(PreconditionError):
            PhasePoint(1.0 + 0j, 0.0)


class TestStationaryRoots:
    """Test class for solve_Q and the region classification"""

    # ===================== 1. Hand-checked Roots =====================

    def test_triple_root(self):
        """[Simple] u = 18 gives ζ = 1 three times on the boundary"""
        a = solve_Q(18.0)
        assert a.classification == Region.BOUNDARY
        assert _matches(a.zeta_roots, [1.0, 1.0, 1.0])
        assert a.phi == pytest.approx(0.0, abs=1e-9)
        assert a.omega == 0.0

    def test_double_root(self):
        """[Simple] u = -6 gives {1, -1, -1} on the boundary with φ = π"""
        a = solve_Q(-6.0)
        assert a.classification == Region.BOUNDARY
        assert _matches(a.zeta_roots, [1.0, -1.0, -1.0])
        assert a.phi == pytest.approx(math.pi, abs=1e-6)
        assert a.coincident_pairs

    def test_roots_of_unity(self):
        """[Simple] u = 0 gives the cube roots of unity inside the region"""
        a = solve_Q(0.0)
        assert a.classification == Region.INTERIOR
        unity = [cmath.exp(2j * math.pi * k / 3) for k in range(3)]
        assert _matches(a.zeta_roots, unity, tol=1e-10)
        assert a.coincident_pairs == ()

    def test_exterior(self):
        """[Medium] u far outside the curve has a root off the unit circle"""
        a = solve_Q(60.0 + 10.0j)
        assert a.classification == Region.EXTERIOR
        assert a.omega > 0
        assert max(a.moduli) > 1.0

    # ===================== 2. Structure =====================

    @pytest.mark.parametrize("u", [0j, 2.0 + 1.0j, -6.0, 18.0, 40.0 - 25.0j])
    def test_vieta(self, u):
        """[Medium] Π ζ_j = 1 and Σ ζ_j = ū/6"""
        z = solve_Q(u).zeta_roots
        assert z[0] * z[1] * z[2] == pytest.approx(1.0, abs=1e-8)
        assert sum(z) == pytest.approx(complex(u).conjugate() / 6.0, abs=1e-8)

    def test_six_stationary_points(self):
        """[Basic] ±√ζ_j give six λ-points with λ² on the roots"""
        a = solve_Q(2.0 + 1.0j)
        assert len(a.lambda_points) == 6
        for k, z in enumerate(a.zeta_roots):
            assert a.lambda_points[2 * k] ** 2 == pytest.approx(z)
            assert a.lambda_points[2 * k + 1] == pytest.approx(-a.lambda_points[2 * k])

    def test_sorted_by_modulus(self):
        """[Basic] roots come in decreasing modulus"""
        m = solve_Q(60.0 + 10.0j).moduli
        assert m[0] >= m[1] >= m[2]

    @pytest.mark.parametrize("u,lam", [(2.0 + 1.0j, 1.3 + 0.4j), (-6.0, 2.0j), (50.0, 0.7 - 1.1j)])
    def test_factorization(self, u, lam):
        """[Medium] S_λ = (-3/λ⁴) Π(λ² - ζ_j)"""
        assert factorization_check(u, lam) < 1e-9 * max(1.0, abs(u))

    def test_record_is_json_ready(self):
        """[Basic] complex values are split into [re, im]"""
        rec = solve_Q(0.0).to_record()
        assert rec["classification"] == "INTERIOR"
        assert len(rec["zeta_roots"]) == 3 and len(rec["zeta_roots"][0]) == 2

    # ===================== 3. Boundary Curve =====================

    def test_boundary_vertices(self):
        """[Basic] u(0) = 18, u(π) = -6"""
        assert boundary_curve(0.0) == pytest.approx(18.0)
        assert boundary_curve(math.pi) == pytest.approx(-6.0)

    @pytest.mark.parametrize("phi", [0.5, 1.0, 2.5])
    def test_boundary_points_classified(self, phi):
        """[Hard] points on the curve classify as BOUNDARY"""
        assert solve_Q(boundary_curve(phi)).classification == Region.BOUNDARY

    def test_shrunken_curve_is_interior(self):
        """[Medium] half the curve lies inside the region"""
        assert solve_Q(0.5 * boundary_curve(1.0)).classification == Region.INTERIOR

    def test_cubic_leading_coefficient(self):
        """[Basic] a degenerate cubic is rejected"""
        with pytest.raises(PreconditionError):
            solve_cubic(0.0, 1.0, 1.0, 1.0)


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
