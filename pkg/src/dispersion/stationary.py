"""λ-plane machinery for the oscillatory integral at E = −1.

The polar change of variables ξ = −i(λ − 1/λ̄) maps {|λ| > 1} onto ξ ≠ 0
(|ξ| = |λ| − 1/|λ|) and decouples the phase into a holomorphic part and its
conjugate:

    S(u, λ) = −(λ³ + λ⁻³ − λ̄³ − λ̄⁻³) + ½((λ − 1/λ̄)ū − (λ̄ − 1/λ)u)
            = G(λ) − conj G(λ),   G(λ) = −λ³ − λ⁻³ + ½(ūλ + u/λ).

Stationary points solve G'(λ) = 0, i.e. with ζ = λ² the cubic
3ζ³ − (ū/2)ζ² + (u/2)ζ − 3 = 0. Its roots classify u against the region
bounded by the curve u = 6(2e^{−iφ} + e^{2iφ}).
"""

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Sequence, Tuple

from src.utils.error_handler import PreconditionError


# coincident-root and unit-modulus tolerances
COINCIDENCE_TOL = 1e-7
MODULUS_TOL = 1e-7
# relative residual below which a root cluster is accepted as a true multiple root
_MULTIPLE_ROOT_RESIDUAL = 1e-13
_OMEGA = cmath.exp(2j * math.pi / 3)


class Region(str, Enum):
    """Position of u relative to the closed region bounded by the curve."""
    INTERIOR = "INTERIOR"
    BOUNDARY = "BOUNDARY"
    EXTERIOR = "EXTERIOR"


@dataclass(frozen=True)
class PhasePoint:
    """u = z/t with t > 0."""
    u: complex
    t: float

    def __post_init__(self):
        if not (self.t > 0 and math.isfinite(self.t)):
            raise PreconditionError(f"time t must be positive and finite, got {self.t!r}")
        if not (math.isfinite(self.u.real) and math.isfinite(self.u.imag)):
            raise PreconditionError(f"u must be finite, got {self.u!r}")


@dataclass(frozen=True)
class StationaryAnalysis:
    """Roots of the stationary-point cubic and the derived classification.

    Attributes:
        u: the queried group velocity
        zeta_roots: three roots ζ_j, sorted by decreasing modulus then argument
        lambda_points: six stationary points ±√ζ_j (principal roots first)
        classification: INTERIOR, BOUNDARY or EXTERIOR
        omega: |λ0| − 1 for the largest root (0 unless EXTERIOR)
        phi: argument parameter in [0, 2π)
        arguments: arg ζ_j in [0, 2π), in root order
        coincident_pairs: index pairs (i, j) declared coincident
    """
    u: complex
    zeta_roots: Tuple[complex, complex, complex]
    lambda_points: Tuple[complex, ...]
    classification: Region
    omega: float
    phi: float
    arguments: Tuple[float, float, float]
    coincident_pairs: Tuple[Tuple[int, int], ...] = field(default_factory=tuple)

    @property
    def moduli(self) -> Tuple[float, float, float]:
        return tuple(abs(z) for z in self.zeta_roots)

    def to_record(self) -> dict:
        """JSON-ready dict with complex numbers split into [re, im]."""
        def pair(z):
            return [z.real, z.imag]
        return {
            "u": pair(self.u),
            "zeta_roots": [pair(z) for z in self.zeta_roots],
            "lambda_points": [pair(z) for z in self.lambda_points],
            "classification": self.classification.value,
            "omega": self.omega,
            "phi": self.phi,
            "arguments": list(self.arguments),
        }


# ============================================================================
# Change of variables and phase
# ============================================================================

def _check_lambda(lam: complex, operation: str) -> complex:
    lam = complex(lam)
    if lam == 0:
        raise PreconditionError(f"{operation} requires lambda != 0")
    return lam


def lambda_map(lam: complex) -> complex:
    """ξ = −i(λ − 1/λ̄); the unit circle goes to ξ = 0."""
    lam = _check_lambda(lam, "lambda_map")
    return -1j * (lam - 1.0 / lam.conjugate())


def lambda_map_jacobian(lam: complex) -> float:
    """Area distortion (|λ|⁴ − 1)/|λ|⁴ of lambda_map."""
    lam = _check_lambda(lam, "lambda_map_jacobian")
    r4 = abs(lam) ** 4
    return (r4 - 1.0) / r4


def phase_G(u: complex, lam: complex, order: int = 0) -> complex:
    """Holomorphic part G of the phase and its λ-derivatives, order 0..4."""
    lam = _check_lambda(lam, "phase_G")
    u = complex(u)
    ub = u.conjugate()
    if order == 0:
        return -lam ** 3 - lam ** -3 + 0.5 * (ub * lam + u / lam)
    if order == 1:
        return ub / 2 - u / (2 * lam ** 2) - 3 * lam ** 2 + 3 / lam ** 4
    if order == 2:
        return u / lam ** 3 - 6 * lam - 12 / lam ** 5
    if order == 3:
        return -3 * u / lam ** 4 - 6 + 60 / lam ** 6
    if order == 4:
        return 12 * u / lam ** 5 - 360 / lam ** 7
    raise PreconditionError(f"phase_G order must be in 0..4, got {order!r}")


def phase_S(u: complex, lam: complex) -> complex:
    """S(u, λ) = G(λ) − conj G(λ); purely imaginary."""
    g = phase_G(u, _check_lambda(lam, "phase_S"), 0)
    return g - g.conjugate()


def phase_S_lambda(u: complex, lam: complex) -> complex:
    """S_λ = ū/2 − u/(2λ²) − 3λ² + 3/λ⁴."""
    return phase_G(u, _check_lambda(lam, "phase_S_lambda"), 1)


def phase_S_lambdalambda(u: complex, lam: complex) -> complex:
    """S_λλ = u/λ³ − 6λ − 12/λ⁵."""
    return phase_G(u, _check_lambda(lam, "phase_S_lambdalambda"), 2)


def wirtinger_fd(func: Callable[[complex], complex], lam: complex, h: float = 1e-6) -> complex:
    """Central-difference Wirtinger derivative ∂/∂λ = ½(∂_x − i∂_y)."""
    dx = (func(lam + h) - func(lam - h)) / (2 * h)
    dy = (func(lam + 1j * h) - func(lam - 1j * h)) / (2 * h)
    return 0.5 * (dx - 1j * dy)


def wirtinger_report(u: complex, lam: complex, h: float = 1e-6) -> dict:
    """Closed-form S_λ, S_λλ next to finite-difference Wirtinger derivatives."""
    lam = _check_lambda(lam, "wirtinger_report")
    s1 = phase_S_lambda(u, lam)
    s2 = phase_S_lambdalambda(u, lam)
    fd1 = wirtinger_fd(lambda z: phase_S(u, z), lam, h)
    fd2 = wirtinger_fd(lambda z: phase_S_lambda(u, z), lam, h)
    return {
        "S_lambda": s1,
        "S_lambda_fd": fd1,
        "S_lambdalambda": s2,
        "S_lambdalambda_fd": fd2,
        "rel_err_first": abs(s1 - fd1) / max(1.0, abs(s1)),
        "rel_err_second": abs(s2 - fd2) / max(1.0, abs(s2)),
    }


# ============================================================================
# Cubic solver
# ============================================================================

def _cbrt(z: complex) -> complex:
    r = abs(z)
    if r == 0:
        return 0j
    theta = cmath.phase(z)
    return r ** (1.0 / 3.0) * cmath.exp(1j * theta / 3.0)


def _poly(coeffs: Sequence[complex], z: complex) -> complex:
    a, b, c, d = coeffs
    return ((a * z + b) * z + c) * z + d


def _dpoly(coeffs: Sequence[complex], z: complex) -> complex:
    a, b, c, _ = coeffs
    return (3 * a * z + 2 * b) * z + c


def _relative_residual(coeffs: Sequence[complex], z: complex) -> float:
    a, b, c, d = coeffs
    r = abs(z)
    scale = abs(a) * r ** 3 + abs(b) * r ** 2 + abs(c) * r + abs(d)
    return abs(_poly(coeffs, z)) / scale if scale > 0 else 0.0


def _newton_polish(coeffs: Sequence[complex], z: complex) -> complex:
    dp = _dpoly(coeffs, z)
    if dp == 0:
        return z
    candidate = z - _poly(coeffs, z) / dp
    if _relative_residual(coeffs, candidate) <= _relative_residual(coeffs, z):
        return candidate
    return z


def _quadratic_roots(a: complex, b: complex, c: complex) -> Tuple[complex, complex]:
    disc = cmath.sqrt(b * b - 4 * a * c)
    q = -0.5 * (b + disc) if abs(b + disc) >= abs(b - disc) else -0.5 * (b - disc)
    if q == 0:
        return 0j, 0j
    return q / a, c / q


def _refine_clusters(coeffs: Sequence[complex], roots: List[complex]) -> List[complex]:
    """Replace numerically split multiple roots by roots of P' or P''."""
    a, b, c, _ = coeffs
    scale = 1.0 + max(abs(z) for z in roots)
    tol = 1e-5 * scale
    close = [(i, j) for i in range(3) for j in range(i + 1, 3) if abs(roots[i] - roots[j]) <= tol]
    if not close:
        return roots
    if len(close) >= 2:
        triple = -b / (3 * a)
        if _relative_residual(coeffs, triple) <= _MULTIPLE_ROOT_RESIDUAL:
            return [triple, triple, triple]
        return roots
    i, j = close[0]
    k = 3 - i - j
    mean = 0.5 * (roots[i] + roots[j])
    r1, r2 = _quadratic_roots(3 * a, 2 * b, c)
    double = r1 if abs(r1 - mean) <= abs(r2 - mean) else r2
    if _relative_residual(coeffs, double) > _MULTIPLE_ROOT_RESIDUAL:
        return roots
    single = _newton_polish(coeffs, -b / a - 2 * double)
    out = list(roots)
    out[i] = out[j] = double
    out[k] = single
    return out


def solve_cubic(a: complex, b: complex, c: complex, d: complex) -> List[complex]:
    """Roots of aζ³ + bζ² + cζ + d by Cardano, one Newton polish, cluster refinement.

    The second cube root is taken as −p/(3U) so the pair stays on a consistent
    branch.
    """
    if a == 0:
        raise PreconditionError("leading coefficient of the cubic must be nonzero")
    coeffs = (complex(a), complex(b), complex(c), complex(d))
    a, b, c, d = coeffs
    shift = -b / (3 * a)
    p = (3 * a * c - b * b) / (3 * a * a)
    q = (2 * b ** 3 - 9 * a * b * c + 27 * a * a * d) / (27 * a ** 3)
    sq = cmath.sqrt((q / 2) ** 2 + (p / 3) ** 3)
    w1, w2 = -q / 2 + sq, -q / 2 - sq
    U = _cbrt(w1 if abs(w1) >= abs(w2) else w2)
    if abs(U) <= 1e-300:
        ys = [0j, 0j, 0j]
    else:
        V = -p / (3 * U)
        ys = [U + V, _OMEGA * U + V / _OMEGA, U / _OMEGA + _OMEGA * V]
    roots = [_newton_polish(coeffs, y + shift) for y in ys]
    return _refine_clusters(coeffs, roots)


# ============================================================================
# Stationary points and classification
# ============================================================================

def _arg(z: complex) -> float:
    return cmath.phase(z) % (2 * math.pi)


def solve_Q(u: complex) -> StationaryAnalysis:
    """Roots of 3ζ³ − (ū/2)ζ² + (u/2)ζ − 3 and the classification of u."""
    u = complex(u)
    if not (math.isfinite(u.real) and math.isfinite(u.imag)):
        raise PreconditionError(f"u must be finite, got {u!r}")
    roots = solve_cubic(3.0, -u.conjugate() / 2, u / 2, -3.0)
    roots.sort(key=lambda z: (-round(abs(z), 12), round(_arg(z), 12)))

    pair_tol = COINCIDENCE_TOL * (1.0 + abs(u))
    coincident = tuple((i, j) for i in range(3) for j in range(i + 1, 3)
                       if abs(roots[i] - roots[j]) <= pair_tol)
    on_circle = all(abs(abs(z) - 1.0) <= MODULUS_TOL for z in roots)

    if on_circle and coincident:
        region = Region.BOUNDARY
        i, j = coincident[0]
        phi = _arg(0.5 * (roots[i] + roots[j]))
        omega = 0.0
    elif on_circle:
        region = Region.INTERIOR
        phi = _arg(roots[0])
        omega = 0.0
    else:
        region = Region.EXTERIOR
        largest = max(roots, key=abs)
        omega = math.sqrt(abs(largest)) - 1.0
        phi = _arg(largest)

    lambdas = []
    for z in roots:
        r = cmath.sqrt(z)
        lambdas.extend([r, -r])

    return StationaryAnalysis(
        u=u,
        zeta_roots=tuple(roots),
        lambda_points=tuple(lambdas),
        classification=region,
        omega=omega,
        phi=phi,
        arguments=tuple(_arg(z) for z in roots),
        coincident_pairs=coincident,
    )


def factorization_check(u: complex, lam: complex) -> float:
    """|S_λ − (−3/λ⁴)Π(λ² − ζ_j)| with the roots from solve_Q."""
    lam = _check_lambda(lam, "factorization_check")
    zeta = solve_Q(u).zeta_roots
    z = lam * lam
    product = (-3.0 / lam ** 4) * (z - zeta[0]) * (z - zeta[1]) * (z - zeta[2])
    return abs(phase_S_lambda(u, lam) - product)


def boundary_curve(phi: float) -> complex:
    """u = 6(2e^{−iφ} + e^{2iφ}); periodic in φ, vertices u = 18e^{−2πik/3} at φ = 2πk/3."""
    if not math.isfinite(phi):
        raise PreconditionError(f"phi must be finite, got {phi!r}")
    return 6.0 * (2.0 * cmath.exp(-1j * phi) + cmath.exp(2j * phi))
