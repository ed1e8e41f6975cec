"""Pointwise symbols of the NV equation at fixed energy E.

Everything here is plain double-precision arithmetic on scalars or numpy
arrays:

* the nonlocal multiplier m(ξ) = (ξ1 − iξ2)/(ξ1 + iξ2) that produces w from v;
* the dispersion symbol w(ξ; E) = 2(ξ1³ − 3ξ1ξ2²)(1 − 3E/|ξ|²), equal to
  p(ξ) = (ξ³ + ξ̄³)(1 − 3E/|ξ|²) under ξ = ξ1 + iξ2;
* the modulation σ = τ − w(ξ);
* the resonance function H[ξ, ξ̂] = w(ξ̂) − w(ξ) − w(ξ̂ − ξ) and its closed-form
  partial derivatives.

Origin convention: m(0) = 0 and w(0) = 0 (w extends continuously by 0).
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from src.utils.error_handler import PreconditionError


ArrayLike = Union[float, np.ndarray]


# ============================================================================
# Domain Types
# ============================================================================

@dataclass(frozen=True)
class EnergyParam:
    """Fixed energy level E of the associated Schrödinger problem.

    Attributes:
        E: real energy; sign free, finite.
    """
    E: float

    def __post_init__(self):
        if not math.isfinite(self.E):
            raise PreconditionError(f"energy E must be finite, got {self.E!r}")

    @property
    def magnitude(self) -> float:
        return abs(self.E)

    def require_negative(self, operation: str) -> "EnergyParam":
        """Raise unless E < 0; returns self for chaining."""
        if not self.E < 0:
            raise PreconditionError(f"{operation} requires E < 0, got E = {self.E}")
        return self


@dataclass(frozen=True)
class SpectralPoint:
    """Frequency point ξ = ξ1 + iξ2 with time frequency τ.

    Attributes:
        xi1, xi2: real frequencies
        tau: real time frequency
    """
    xi1: float
    xi2: float
    tau: float = 0.0

    def __post_init__(self):
        for name in ("xi1", "xi2", "tau"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise PreconditionError(f"spectral point component {name} must be finite, got {value!r}")

    @property
    def xi(self) -> complex:
        return complex(self.xi1, self.xi2)

    @property
    def is_origin(self) -> bool:
        return self.xi1 == 0.0 and self.xi2 == 0.0

    def __sub__(self, other: "SpectralPoint") -> "SpectralPoint":
        return SpectralPoint(self.xi1 - other.xi1, self.xi2 - other.xi2, self.tau - other.tau)


@dataclass(frozen=True)
class SymbolValue:
    """Value of w(ξ; E); at_origin_convention marks the limit-filled ξ = 0 case."""
    value: float
    at_origin_convention: bool = False

    def __float__(self) -> float:
        return self.value


def as_energy(E: Union[float, EnergyParam]) -> EnergyParam:
    """Coerce a float or EnergyParam into an EnergyParam."""
    return E if isinstance(E, EnergyParam) else EnergyParam(float(E))


def _as_point(p) -> SpectralPoint:
    if isinstance(p, SpectralPoint):
        return p
    if isinstance(p, complex):
        return SpectralPoint(p.real, p.imag)
    xi1, xi2, *rest = p
    return SpectralPoint(float(xi1), float(xi2), float(rest[0]) if rest else 0.0)


# ============================================================================
# Vectorized kernels
# ============================================================================

def multiplier_array(xi1: ArrayLike, xi2: ArrayLike) -> np.ndarray:
    """m(ξ) = ξ̄/ξ elementwise, 0 at the origin."""
    xi = np.asarray(xi1, dtype=float) + 1j * np.asarray(xi2, dtype=float)
    out = np.zeros(np.broadcast(xi).shape, dtype=complex)
    nz = xi != 0
    out[nz] = np.conj(xi[nz]) / xi[nz]
    return out


def symbol_array(xi1: ArrayLike, xi2: ArrayLike, E: float) -> np.ndarray:
    """w(ξ; E) = 2(ξ1³ − 3ξ1ξ2²)(1 − 3E/|ξ|²) elementwise, 0 at the origin."""
    a = np.asarray(xi1, dtype=float)
    b = np.asarray(xi2, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    r2 = a * a + b * b
    cubic = 2.0 * (a ** 3 - 3.0 * a * b * b)
    out = np.zeros(r2.shape, dtype=float)
    nz = r2 > 0
    out[nz] = cubic[nz] * (1.0 - 3.0 * E / r2[nz])
    return out


def sigma_array(tau: ArrayLike, xi1: ArrayLike, xi2: ArrayLike, E: float) -> np.ndarray:
    """σ = τ − w(ξ; E) elementwise."""
    return np.asarray(tau, dtype=float) - symbol_array(xi1, xi2, E)


def resonance_H_array(xi1, xi2, xh1, xh2, E: float) -> np.ndarray:
    """H[ξ, ξ̂] = w(ξ̂) − w(ξ) − w(ξ̂ − ξ) elementwise."""
    xi1, xi2, xh1, xh2 = (np.asarray(a, dtype=float) for a in (xi1, xi2, xh1, xh2))
    return (symbol_array(xh1, xh2, E) - symbol_array(xi1, xi2, E)
            - symbol_array(xh1 - xi1, xh2 - xi2, E))


def resonance_dH_array(xi1, xi2, xh1, xh2, E: float, axis: int) -> np.ndarray:
    """Closed-form ∂_{ξ_axis} H[ξ, ξ̂] with a = |E|, η = ξ̂ − ξ.

    ∂ξ1 H = −6[(ξ1²−ξ2²)(1+3a/|ξ|²) − (η1²−η2²)(1+3a/|η|²)
               − 2aξ1²(ξ1²−3ξ2²)/|ξ|⁴ + 2aη1²(η1²−3η2²)/|η|⁴]
    ∂ξ2 H = −12[−ξ1ξ2(1+3a/|ξ|²) + η1η2(1+3a/|η|²)
                − aξ1ξ2(ξ1²−3ξ2²)/|ξ|⁴ + aη1η2(η1²−3η2²)/|η|⁴]

    Singular at ξ = 0 and ξ̂ = ξ; callers mask those points.
    """
    a = -float(E)
    x1, x2, h1, h2 = (np.asarray(v, dtype=float) for v in (xi1, xi2, xh1, xh2))
    e1, e2 = h1 - x1, h2 - x2
    r2 = x1 * x1 + x2 * x2
    q2 = e1 * e1 + e2 * e2
    if axis == 1:
        return -6.0 * ((x1 ** 2 - x2 ** 2) * (1.0 + 3.0 * a / r2)
                       - (e1 ** 2 - e2 ** 2) * (1.0 + 3.0 * a / q2)
                       - 2.0 * a * x1 ** 2 * (x1 ** 2 - 3.0 * x2 ** 2) / r2 ** 2
                       + 2.0 * a * e1 ** 2 * (e1 ** 2 - 3.0 * e2 ** 2) / q2 ** 2)
    if axis == 2:
        return -12.0 * (-x1 * x2 * (1.0 + 3.0 * a / r2)
                        + e1 * e2 * (1.0 + 3.0 * a / q2)
                        - a * x1 * x2 * (x1 ** 2 - 3.0 * x2 ** 2) / r2 ** 2
                        + a * e1 * e2 * (e1 ** 2 - 3.0 * e2 ** 2) / q2 ** 2)
    raise PreconditionError(f"axis must be 1 or 2, got {axis!r}")


def fractional_kernel_bound(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    """|ab/(a²+b²)| elementwise, 0 at the origin (bounded by 1/2)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    den = a * a + b * b
    out = np.zeros(den.shape, dtype=float)
    nz = den > 0
    out[nz] = np.abs(a[nz] * b[nz] / den[nz])
    return out


# ============================================================================
# Scalar operations
# ============================================================================

def multiplier_m(p) -> complex:
    """(ξ1 − iξ2)/(ξ1 + iξ2); 0 at ξ = 0."""
    p = _as_point(p)
    if p.is_origin:
        return 0j
    return p.xi.conjugate() / p.xi


def symbol_w(p, E) -> SymbolValue:
    """Dispersion symbol w(ξ1, ξ2; E) with the origin convention."""
    p = _as_point(p)
    E = as_energy(E)
    if p.is_origin:
        return SymbolValue(0.0, at_origin_convention=True)
    return SymbolValue(float(symbol_array(p.xi1, p.xi2, E.E)))


def symbol_p_complex(xi: complex, E) -> float:
    """(ξ³ + ξ̄³)(1 − 3E/|ξ|²) in the complex identification; 0 at ξ = 0."""
    E = as_energy(E)
    xi = complex(xi)
    if not (math.isfinite(xi.real) and math.isfinite(xi.imag)):
        raise PreconditionError(f"xi must be finite, got {xi!r}")
    r2 = xi.real * xi.real + xi.imag * xi.imag
    if r2 == 0.0:
        return 0.0
    return 2.0 * (xi ** 3).real * (1.0 - 3.0 * E.E / r2)


def sigma(p, E) -> float:
    """σ(τ, ξ) = τ − w(ξ; E)."""
    p = _as_point(p)
    return p.tau - symbol_w(p, E).value


def resonance_H(xi, xihat, E) -> float:
    """H[ξ, ξ̂] = w(ξ̂) − w(ξ) − w(ξ̂ − ξ); requires E < 0."""
    E = as_energy(E).require_negative("resonance_H")
    xi, xihat = _as_point(xi), _as_point(xihat)
    return float(resonance_H_array(xi.xi1, xi.xi2, xihat.xi1, xihat.xi2, E.E))


def resonance_dH(xi, xihat, E, axis: int) -> float:
    """Closed-form ∂_{ξ_axis} H[ξ, ξ̂]; rejects ξ = 0 and ξ̂ = ξ."""
    E = as_energy(E).require_negative("resonance_dH")
    xi, xihat = _as_point(xi), _as_point(xihat)
    if xi.is_origin:
        raise PreconditionError("resonance_dH is singular at xi = 0")
    if xi.xi1 == xihat.xi1 and xi.xi2 == xihat.xi2:
        raise PreconditionError("resonance_dH is singular at xihat = xi")
    return float(resonance_dH_array(xi.xi1, xi.xi2, xihat.xi1, xihat.xi2, E.E, axis))
