"""Oscillatory integral I(t, u; E) and the decay probes built on it.

    I(t, u; E) = ∫_C |ξ|^{α+iβ} exp(i t S̃(u, ξ; E)) dReξ dImξ,
    S̃(u, ξ; E) = (ξ³ + ξ̄³)(1 − 3E/|ξ|²) + ½(ūξ + uξ̄).

The integral is improper and oscillatory. It is evaluated with a smooth
partition of unity localized on its critical set: the singular point (ξ = 0,
i.e. the unit circle |λ| = 1) and the stationary points from solve_Q. Each
patch is sized so the phase changes by about K across its transition band;
the uncovered remainder has no stationary point and vanishes
super-algebraically in K. Stabilization compares K, 2K, ...

Two independent representations are provided: polar panels in the ξ-plane
and, at E = −1, in the λ-plane after ξ = −i(λ − 1/λ̄).
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from src.dispersion.stationary import lambda_map, phase_G, solve_Q
from src.dispersion.symbol_core import as_energy, symbol_array
from src.solver.grid import RealField2D, resolution_check
from src.utils.error_handler import NonConvergedError, PreconditionError


_GL_ORDER = 16
_GL_NODES, _GL_WEIGHTS = leggauss(_GL_ORDER)
_PILOT_RADIAL = 65
_PILOT_ANGULAR = 256
_PILOT_S0 = 1e-3
_CHUNK_POINTS = 1 << 20
_MERGE_TOL = 1e-6


# ============================================================================
# Query and result types
# ============================================================================

@dataclass(frozen=True)
class QuadControl:
    """Quadrature and stabilization controls.

    Attributes:
        cutoff_radius: initial localization scale K (phase change across a
            patch transition band)
        cutoff_profile: name of the transition profile
        panels_radial: minimum Gauss-Legendre panels per patch
        panels_angular: minimum trapezoid nodes per patch
        refine_near_unit_circle: cubic radial grading at |λ| = 1 / ξ = 0
        refine_near_stationary: resolve neighbouring patch transitions
        richardson_levels: number of localization scales K·2^j compared
        tol: relative stabilization tolerance
        node_budget: maximum nodes per level
    """
    cutoff_radius: float = 64.0
    cutoff_profile: str = "cinf-bump"
    panels_radial: int = 24
    panels_angular: int = 64
    refine_near_unit_circle: bool = True
    refine_near_stationary: bool = True
    richardson_levels: int = 2
    tol: float = 1e-3
    node_budget: int = 60_000_000

    def __post_init__(self):
        if not self.cutoff_radius > 0:
            raise PreconditionError(f"cutoff_radius must be positive, got {self.cutoff_radius!r}")
        if self.panels_radial < 1 or self.panels_angular < 1:
            raise PreconditionError("panel counts must be >= 1")
        if self.richardson_levels < 2:
            raise PreconditionError("richardson_levels must be >= 2 for a stabilization check")
        if self.cutoff_profile != "cinf-bump":
            raise PreconditionError(f"unknown cutoff profile {self.cutoff_profile!r}")
        if not self.tol > 0:
            raise PreconditionError(f"tol must be positive, got {self.tol!r}")


@dataclass(frozen=True)
class OscIntQuery:
    """One evaluation point of I(t, u; E)."""
    t: float
    u: complex
    E: float = -1.0
    alpha: float = 0.0
    beta: float = 0.0
    quad: QuadControl = field(default_factory=QuadControl)

    def __post_init__(self):
        if not (self.t > 0 and math.isfinite(self.t)):
            raise PreconditionError(f"oscillatory integral requires t > 0, got {self.t!r}")
        if not 0.0 <= self.alpha < 1.0:
            raise PreconditionError(f"alpha must lie in [0, 1), got {self.alpha!r}")
        if not math.isfinite(self.beta):
            raise PreconditionError(f"beta must be finite, got {self.beta!r}")
        as_energy(self.E).require_negative("oscillatory integral")
        u = complex(self.u)
        if not (math.isfinite(u.real) and math.isfinite(u.imag)):
            raise PreconditionError(f"u must be finite, got {self.u!r}")
        object.__setattr__(self, "u", u)


@dataclass
class OscIntResult:
    """Stabilized value of I.

    Attributes:
        value: value at the largest localization scale
        stabilization_error: |I(K_last) − I(K_prev)|
        panels_used: radial Gauss-Legendre panels over all patches, last level
        converged: stabilization_error ≤ tol·|value|
        nodes_used: quadrature nodes at the last level
        level_values: values at K, 2K, ...
        status: "OK" or "NON_CONVERGED"
        reason: "", "STABILIZATION" or "NODE_BUDGET"
    """
    value: complex
    stabilization_error: float
    panels_used: int
    converged: bool
    nodes_used: int = 0
    level_values: Tuple[complex, ...] = ()
    status: str = "OK"
    reason: str = ""
    representation: str = "lambda"

    @property
    def relative_error(self) -> float:
        mag = abs(self.value)
        return self.stabilization_error / mag if mag > 0 else math.inf


# ============================================================================
# Partition of unity
# ============================================================================

def _h(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def transition(x) -> np.ndarray:
    """C∞ step equal to 1 for x ≤ 1 and 0 for x ≥ 2."""
    x = np.asarray(x, dtype=float)
    a = _h(2.0 - x)
    b = _h(x - 1.0)
    return a / (a + b)


@dataclass(frozen=True)
class _Cutoff:
    """χ((|z − center| − inner)/scale); support radius inner + 2·scale."""
    center: complex
    scale: float
    inner: float = 0.0
    power: int = 1

    @property
    def outer(self) -> float:
        return self.inner + 2.0 * self.scale

    def value(self, z: np.ndarray) -> np.ndarray:
        return transition((np.abs(z - self.center) - self.inner) / self.scale)

    def meets(self, other: "_Cutoff") -> bool:
        return abs(self.center - other.center) < self.outer + other.outer


class _Layout:
    """Ordered cutoffs; patch k carries χ_k·Π_{i<k}(1 − χ_i)."""

    def __init__(self, cutoffs: List[_Cutoff]):
        self.cutoffs = cutoffs
        self._neighbours = [
            [i for i in range(len(cutoffs)) if i != k and cutoffs[i].meets(cutoffs[k])]
            for k in range(len(cutoffs))
        ]

    def weight(self, k: int, z: np.ndarray) -> np.ndarray:
        w = self.cutoffs[k].value(z)
        for i in self._neighbours[k]:
            if i < k:
                w = w * (1.0 - self.cutoffs[i].value(z))
        return w

    def min_scale(self, k: int) -> float:
        return min([self.cutoffs[k].scale] + [self.cutoffs[i].scale for i in self._neighbours[k]])


# ============================================================================
# Integrands (amplitude, real phase)
# ============================================================================

class _LambdaIntegrand:
    """f(λ) e^{tS}: amplitude (|λ|²−1)^α(|λ|⁴−1)/|λ|^{α+4}, phase 2t·Im G + β·log((|λ|²−1)/|λ|)."""

    def __init__(self, t: float, u: complex, alpha: float, beta: float):
        self.t, self.u, self.alpha, self.beta = t, u, alpha, beta

    def __call__(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        with np.errstate(all="ignore"):
            rho = np.abs(z)
            live = rho > 1.0
            gap = (rho - 1.0) * (rho + 1.0)
            amp = np.where(live, gap ** self.alpha * gap * (rho * rho + 1.0) / rho ** (self.alpha + 4.0), 0.0)
            g = -z ** 3 - z ** -3 + 0.5 * (np.conj(self.u) * z + self.u / z)
            psi = 2.0 * self.t * g.imag
            if self.beta:
                psi = psi + self.beta * (np.log(gap) - np.log(rho))
        return amp, psi


class _XiIntegrand:
    """|ξ|^{α+iβ} e^{itS̃(u, ξ; E)} for E < 0."""

    def __init__(self, t: float, u: complex, E: float, alpha: float, beta: float):
        self.t, self.u, self.a, self.alpha, self.beta = t, u, abs(E), alpha, beta

    def __call__(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        with np.errstate(all="ignore"):
            r = np.abs(z)
            live = r > 0.0
            amp = np.where(live, r ** self.alpha, 0.0)
            psi = self.t * (2.0 * (z ** 3).real * (1.0 + 3.0 * self.a / (r * r))
                            + (np.conj(self.u) * z).real)
            if self.beta:
                psi = psi + self.beta * np.log(r)
        return amp, psi


# ============================================================================
# Patch geometry
# ============================================================================

def _annulus_halfwidth(t0: float, K: float) -> float:
    """w with w + w³ = K/(6t0)."""
    target = K / (6.0 * t0)
    return brentq(lambda x: x + x ** 3 - target, 0.0, max(1.0, target))


def _stationary_radius(t0: float, u0: complex, lam: complex, beta: float, K: float) -> float:
    """ℓ with t0·Σ_{m=2..4} D_m ℓ^m/m! = K, D_m = 2|G^{(m)}(λ)|."""
    d2, d3, d4 = (2.0 * abs(phase_G(u0, lam, m)) for m in (2, 3, 4))

    def excess(ell):
        return t0 * (d2 * ell ** 2 / 2.0 + d3 * ell ** 3 / 6.0 + d4 * ell ** 4 / 24.0) - K

    hi = 1.0
    while excess(hi) < 0 and hi < 1e6:
        hi *= 2.0
    ell = brentq(excess, 0.0, hi) if excess(hi) >= 0 else hi
    rho = abs(lam)
    if beta and d2 > 0 and rho > 1.0 + 1e-9:
        # the log factor of the amplitude shifts the stationary point
        grad = abs(beta) * abs(2.0 * rho / (rho * rho - 1.0) - 1.0 / rho)
        ell = max(ell, min(2.0 * grad / (t0 * d2), 1.0))
    return ell


def _merge(points: List[Tuple[complex, float]], center: complex, ell: float) -> None:
    for i, (c, e) in enumerate(points):
        if abs(c - center) <= _MERGE_TOL * (1.0 + abs(c)):
            points[i] = (c, max(e, ell))
            return
    points.append((center, ell))


def _canonical_geometry(t0: float, u0: complex, beta: float, K: float):
    w = _annulus_halfwidth(t0, K)
    points: List[Tuple[complex, float]] = []
    for lam in solve_Q(u0).lambda_points:
        _merge(points, lam, _stationary_radius(t0, u0, lam, beta, K))
    return w, points


def _lambda_layout(q: OscIntQuery, K: float) -> _Layout:
    w, points = _canonical_geometry(q.t, q.u, q.beta, K)
    grading = 3 if q.quad.refine_near_unit_circle else 1
    cutoffs = [_Cutoff(0j, w, inner=1.0, power=grading)]
    for lam, ell in points:
        if abs(lam) + 2.0 * ell > 1.0 + w:
            cutoffs.append(_Cutoff(lam, ell))
    return _Layout(cutoffs)


def _xi_layout(q: OscIntQuery, K: float) -> _Layout:
    a = abs(q.E)
    root = math.sqrt(a)
    w, points = _canonical_geometry(a ** 1.5 * q.t, q.u / a, q.beta, K)
    plateau = (1.0 + w) - 1.0 / (1.0 + w)
    grading = 3 if q.quad.refine_near_unit_circle else 1
    disks: List[Tuple[complex, float]] = []
    for lam, ell in points:
        rho = abs(lam)
        if rho < 1.0 - 1e-9:
            continue
        xi = lambda_map(lam) if rho > 1.0 else 0j
        ell_xi = ell * (1.0 + 1.0 / (rho * rho))
        if abs(xi) + 2.0 * ell_xi > plateau:
            _merge(disks, xi, ell_xi)
    cutoffs = [_Cutoff(0j, root * plateau, inner=0.0, power=grading)]
    cutoffs += [_Cutoff(root * c, root * e) for c, e in disks]
    return _Layout(cutoffs)


# ============================================================================
# Patch quadrature
# ============================================================================

@dataclass
class _PatchPlan:
    s_nodes: np.ndarray
    s_weights: np.ndarray
    n_theta: int
    panels: int

    @property
    def nodes(self) -> int:
        return self.s_nodes.size * self.n_theta


def _patch_points(cut: _Cutoff, s: np.ndarray, theta: np.ndarray):
    b = 2.0 * cut.scale
    r = cut.inner + b * s ** cut.power
    drds = b * cut.power * s ** (cut.power - 1)
    z = cut.center + r[:, None] * np.exp(1j * theta)[None, :]
    return z, r, drds


def _plan_patch(layout: _Layout, k: int, integrand, control: QuadControl) -> Optional[_PatchPlan]:
    cut = layout.cutoffs[k]
    s_grid = np.linspace(0.0, 1.0, _PILOT_RADIAL)
    s_eval = s_grid.copy()
    s_eval[0] = _PILOT_S0
    theta = 2.0 * np.pi * np.arange(_PILOT_ANGULAR) / _PILOT_ANGULAR
    z, _, _ = _patch_points(cut, s_eval, theta)
    weight = layout.weight(k, z)
    amp, psi = integrand(z)
    live = (weight > 0) & (amp > 0) & np.isfinite(psi)
    if not live.any():
        return None
    # sample the phase, never the exponential
    phase = np.where(live, psi, np.nan)
    with np.errstate(invalid="ignore"):
        radial = np.abs(np.diff(phase, axis=0))
        angular = np.abs(phase - np.roll(phase, -1, axis=1)) * (_PILOT_ANGULAR / (2.0 * np.pi))
    radial = np.where(np.isfinite(radial), radial, 0.0).max(axis=1)
    max_dtheta = float(np.where(np.isfinite(angular), angular, 0.0).max())

    density = radial + np.pi * control.panels_radial / (_PILOT_RADIAL - 1)
    cumulative = np.concatenate([[0.0], np.cumsum(density)])
    n_panels = max(control.panels_radial, int(math.ceil(cumulative[-1] / np.pi)))
    breaks = np.interp(np.linspace(0.0, cumulative[-1], n_panels + 1), cumulative, s_grid)

    n_theta = int(math.ceil(1.5 * max_dtheta)) + 64
    if control.refine_near_stationary:
        feature = layout.min_scale(k)
        max_len = feature / (2.0 * 2.0 * cut.scale * cut.power)
        pieces = [breaks[:1]]
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            m = max(1, int(math.ceil((hi - lo) / max_len)))
            pieces.append(np.linspace(lo, hi, m + 1)[1:])
        breaks = np.concatenate(pieces)
        n_theta = max(n_theta, int(math.ceil(8.0 * np.pi * cut.outer / feature)))
    n_theta = max(n_theta, control.panels_angular)
    n_theta += n_theta % 2

    lo, hi = breaks[:-1], breaks[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    s_nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    s_weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return _PatchPlan(s_nodes, s_weights, n_theta, lo.size)


def _integrate_patch(layout: _Layout, k: int, integrand, plan: _PatchPlan) -> complex:
    cut = layout.cutoffs[k]
    theta = 2.0 * np.pi * np.arange(plan.n_theta) / plan.n_theta
    rows = max(1, _CHUNK_POINTS // plan.n_theta)
    total = 0j
    for start in range(0, plan.s_nodes.size, rows):
        s = plan.s_nodes[start:start + rows]
        z, r, drds = _patch_points(cut, s, theta)
        weight = layout.weight(k, z)
        amp, psi = integrand(z)
        live = (weight > 0) & (amp > 0)
        with np.errstate(invalid="ignore"):
            vals = np.where(live, weight * amp * np.exp(1j * np.where(live, psi, 0.0)), 0.0)
        total += np.dot(vals.sum(axis=1), r * drds * plan.s_weights[start:start + rows])
    return total * (2.0 * np.pi / plan.n_theta)


def _integrate_layout(layout: _Layout, integrand, control: QuadControl) -> Tuple[complex, int, int]:
    plans = [_plan_patch(layout, k, integrand, control) for k in range(len(layout.cutoffs))]
    nodes = sum(p.nodes for p in plans if p is not None)
    if nodes > control.node_budget:
        raise NonConvergedError(
            f"quadrature needs {nodes} nodes, budget is {control.node_budget}",
            detail={"reason": "NODE_BUDGET", "nodes": nodes},
        )
    value = sum(_integrate_patch(layout, k, integrand, p)
                for k, p in enumerate(plans) if p is not None)
    panels = sum(p.panels for p in plans if p is not None)
    return complex(value), nodes, panels


def _stabilize(q: OscIntQuery, layout_for: Callable[[OscIntQuery, float], _Layout],
               integrand, representation: str, strict: bool) -> OscIntResult:
    control = q.quad
    levels: List[complex] = []
    nodes = panels = 0
    try:
        for j in range(control.richardson_levels):
            value, nodes, panels = _integrate_layout(layout_for(q, control.cutoff_radius * 2 ** j),
                                                     integrand, control)
            levels.append(value)
    except NonConvergedError as exc:
        if strict:
            exc.detail["query"] = _query_record(q)
            raise
        return OscIntResult(complex(math.nan, math.nan), math.inf, panels, False, nodes,
                            tuple(levels), "NON_CONVERGED", exc.detail.get("reason", "NODE_BUDGET"),
                            representation)

    value = levels[-1]
    stab = abs(levels[-1] - levels[-2])
    converged = stab <= control.tol * abs(value)
    result = OscIntResult(value, stab, panels, converged, nodes, tuple(levels),
                          "OK" if converged else "NON_CONVERGED",
                          "" if converged else "STABILIZATION", representation)
    if strict and not converged:
        raise NonConvergedError(
            f"stabilization error {stab:.3e} exceeds {control.tol:.1e}·|I| = {control.tol * abs(value):.3e}",
            detail={"reason": "STABILIZATION", "query": _query_record(q), "levels": [str(v) for v in levels]},
        )
    return result


def _query_record(q: OscIntQuery) -> dict:
    return {"t": q.t, "u": [q.u.real, q.u.imag], "E": q.E, "alpha": q.alpha, "beta": q.beta}


# ============================================================================
# Public evaluation
# ============================================================================

def eval_I_xi(q: OscIntQuery, strict: bool = True) -> OscIntResult:
    """I(t, u; E) by polar panels in the ξ-plane (any E < 0)."""
    return _stabilize(q, _xi_layout, _XiIntegrand(q.t, q.u, q.E, q.alpha, q.beta), "xi", strict)


def eval_I_lambda(q: OscIntQuery, strict: bool = True) -> OscIntResult:
    """I(t, u; −1) by polar panels over |λ| > 1."""
    if q.E != -1.0:
        raise PreconditionError(f"the lambda representation is derived at E = -1, got E = {q.E}")
    return _stabilize(q, _lambda_layout, _LambdaIntegrand(q.t, q.u, q.alpha, q.beta), "lambda", strict)


def eval_I(q: OscIntQuery, representation: str = "lambda", strict: bool = True) -> OscIntResult:
    if representation == "xi":
        return eval_I_xi(q, strict)
    if representation == "lambda":
        return eval_I_lambda(q, strict)
    raise PreconditionError(f"unknown representation {representation!r}")


def integrand_lambda(u: complex, lam, t: float = 1.0, alpha: float = 0.0, beta: float = 0.0) -> np.ndarray:
    """f(λ)·e^{tS(u, λ)} pointwise; exactly 0 on and inside the unit circle."""
    z = np.asarray(lam, dtype=complex)
    amp, psi = _LambdaIntegrand(t, complex(u), alpha, beta)(z)
    with np.errstate(invalid="ignore"):
        return np.where(amp > 0, amp * np.exp(1j * np.where(amp > 0, psi, 0.0)), 0.0)


def scaling_identity_check(t: float, u: complex, E: float, alpha: float, beta: float = 0.0,
                           quad: QuadControl = None, representation: str = "xi") -> float:
    """|I(t,u;E) − |E|^{(α+2)/2 + iβ/2} I(|E|^{3/2}t, u/|E|; −1)| / |I(t,u;E)|.

    The left side always uses the ξ-plane; ``representation`` picks the
    quadrature of the canonical right side.
    """
    quad = quad or QuadControl()
    a = abs(as_energy(E).require_negative("scaling_identity_check").E)
    left = eval_I_xi(OscIntQuery(t, u, E, alpha, beta, quad))
    canonical = OscIntQuery(a ** 1.5 * t, complex(u) / a, -1.0, alpha, beta, quad)
    right = eval_I(canonical, representation)
    factor = a ** ((alpha + 2.0) / 2.0) * complex(math.cos(0.5 * beta * math.log(a)),
                                                 math.sin(0.5 * beta * math.log(a)))
    return abs(left.value - factor * right.value) / abs(left.value)


def energy_envelope(t: float, u: complex, E: float, alpha: float, beta: float = 0.0,
                    quad: QuadControl = None) -> dict:
    """|I(t,u;E)| next to the shape (1+|β|)|E|^{(α−1)/8}/t^{(α+3)/4}."""
    res = eval_I_xi(OscIntQuery(t, u, E, alpha, beta, quad or QuadControl()))
    shape = (1.0 + abs(beta)) * abs(E) ** ((alpha - 1.0) / 8.0) / t ** ((alpha + 3.0) / 4.0)
    return {"t": t, "E": E, "alpha": alpha, "beta": beta, "abs_I": abs(res.value),
            "bound_shape": shape, "ratio": abs(res.value) / shape}


# ============================================================================
# Decay probes
# ============================================================================

@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit log|I| ≈ exponent·log t + constant."""
    alpha: float
    exponent: float
    constant: float
    rms_residual: float
    t_range: Tuple[float, float]

    def to_record(self) -> dict:
        return {"alpha": self.alpha, "exponent": self.exponent, "constant": self.constant,
                "rms_residual": self.rms_residual, "t_range": list(self.t_range)}


@dataclass
class DecayReport:
    """Per-u fits, the envelope fit and the compensated-boundedness verdicts."""
    alpha: float
    beta: float
    target_exponent: float
    rows: List[dict]
    fits: Dict[str, Optional[DecayFit]]
    envelope: Optional[DecayFit]
    bounded: Dict[str, bool]

    @property
    def all_bounded(self) -> bool:
        return all(self.bounded.values())


def u_label(u: complex) -> str:
    u = complex(u)
    return f"{u.real:.6g}{u.imag:+.6g}j"


def fit_decay(ts: Sequence[float], values: Sequence[float], alpha: float,
              min_points: int = 5) -> Optional[DecayFit]:
    """Slope of log|I| against log t; None with fewer than min_points usable samples."""
    pts = [(t, v) for t, v in zip(ts, values) if t > 0 and v > 0 and math.isfinite(v)]
    if len(pts) < min_points:
        return None
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    t_lo, t_hi = min(p[0] for p in pts), max(p[0] for p in pts)
    return DecayFit(alpha, float(slope), float(intercept), rms, (t_lo, t_hi))


def compensated_bounded(ts: Sequence[float], values: Sequence[float], exponent: float,
                        beta: float = 0.0, factor: float = 3.0) -> bool:
    """(1+|β|)^{-1}·v·t^{exponent} never exceeds `factor` times an earlier value."""
    running_min = math.inf
    for t, v in zip(ts, values):
        if not (math.isfinite(v) and t > 0):
            continue
        c = v * t ** exponent / (1.0 + abs(beta))
        if c > factor * running_min:
            return False
        running_min = min(running_min, c)
    return True


def decay_probe(alpha: float, beta: float, u_set: Sequence[complex], t_grid: Sequence[float],
                E: float = -1.0, quad: QuadControl = None, eps: float = 0.05,
                target_exponent: float = None, representation: str = "lambda",
                workers: int = 1) -> DecayReport:
    """|I(t, u; E)| over a time grid; fits per u plus the envelope over u.

    Boundedness uses |I|·t^{target − eps}/(1+|β|); the default target is the
    large-time rate (α+3)/4.
    """
    if not 0.0 <= alpha < 1.0:
        raise PreconditionError(f"alpha must lie in [0, 1), got {alpha!r}")
    ts = sorted(float(t) for t in t_grid)
    if len(ts) < 2 or ts[0] <= 0 or ts[-1] / ts[0] < 100.0:
        raise PreconditionError("decay probe needs positive times spanning at least two decades")
    quad = quad or QuadControl()
    target = (alpha + 3.0) / 4.0 if target_exponent is None else target_exponent
    if representation == "lambda" and E != -1.0:
        representation = "xi"
    tasks = [(t, complex(u)) for u in u_set for t in ts]

    def run(task):
        t, u = task
        return eval_I(OscIntQuery(t, u, E, alpha, beta, quad), representation, strict=False)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(run, tasks))

    rows = []
    by_u: Dict[str, List[Tuple[float, float]]] = {}
    for (t, u), res in zip(tasks, results):
        ok = res.converged
        rows.append({
            "t": t, "u_re": u.real, "u_im": u.imag, "E": E, "alpha": alpha, "beta": beta,
            "I_re": res.value.real if ok else None, "I_im": res.value.imag if ok else None,
            "abs_I": abs(res.value) if ok else None,
            "stab_err": res.stabilization_error if ok else None,
            "reason": "" if ok else f"{res.status}:{res.reason}",
        })
        by_u.setdefault(u_label(u), []).append((t, abs(res.value) if ok else math.nan))

    fits, bounded = {}, {}
    envelope_values = []
    for label, series in by_u.items():
        t_vals = [p[0] for p in series]
        a_vals = [p[1] for p in series]
        fits[label] = fit_decay(t_vals, a_vals, alpha)
        bounded[label] = compensated_bounded(t_vals, a_vals, target - eps, beta)
    for i, t in enumerate(ts):
        finite = [series[i][1] for series in by_u.values() if math.isfinite(series[i][1])]
        envelope_values.append(max(finite) if finite else math.nan)
    envelope = fit_decay(ts, envelope_values, alpha)
    return DecayReport(alpha, beta, target, rows, fits, envelope, bounded)


def small_t_probe(alpha: float, beta: float, u_set: Sequence[complex], t_grid: Sequence[float] = None,
                  E: float = -1.0, quad: QuadControl = None, eps: float = 0.05,
                  representation: str = "lambda", workers: int = 1) -> DecayReport:
    """decay_probe on t ∈ [1e-3, 1] against the short-time rate (α+2)/3."""
    if t_grid is None:
        t_grid = [10.0 ** (-3 + 0.5 * k) for k in range(7)]
    return decay_probe(alpha, beta, u_set, t_grid, E, quad, eps, (alpha + 2.0) / 3.0,
                       representation, workers)


# ============================================================================
# Propagator probes
# ============================================================================

def linear_propagator(values: np.ndarray, grid, E: float, t: float, order: float = 0.0) -> np.ndarray:
    """|∂_z|^order U(t) applied spectrally: v̂ ↦ (|k|/2)^order e^{−itp(k)} v̂."""
    kx, ky = grid.wavenumbers()
    mult = np.exp(-1j * t * symbol_array(kx, ky, E)) * grid.nyquist_mask()
    if order:
        mult = mult * (0.5 * np.sqrt(kx * kx + ky * ky)) ** order
    return grid.ifft(mult * grid.fft(values)).real


def lp_norm(values: np.ndarray, cell_area: float, p: float) -> float:
    if math.isinf(p):
        return float(np.abs(values).max())
    return float((np.sum(np.abs(values) ** p) * cell_area) ** (1.0 / p))


@dataclass
class PropagatorTable:
    """Rows t, norm_p, l2_norm, ratio = norm_p·t^{β((α+3)/4 − ε)}."""
    p: float
    rate: float
    rows: List[dict]
    bounded: bool
    fitted_exponent: Optional[float]


def _check_propagator_inputs(v0: RealField2D, beta: float, E: float, tail_tol: float) -> None:
    if not 0.0 <= beta <= 1.0:
        raise PreconditionError(f"beta must lie in [0, 1] for the propagator estimate, got {beta!r}")
    as_energy(E).require_negative("propagator probe")
    resolution_check(v0, tol=tail_tol)


def propagator_decay_probe(v0: RealField2D, alpha: float, beta: float, E: float,
                           t_grid: Sequence[float], eps: float = 0.05,
                           tail_tol: float = 1e-10) -> PropagatorTable:
    """‖|∂_z|^{αβ} U(t)v0‖_{L^p} with p = 2/(1−β) over the time grid."""
    _check_propagator_inputs(v0, beta, E, tail_tol)
    grid = v0.grid
    p = math.inf if beta == 1.0 else 2.0 / (1.0 - beta)
    rate = beta * ((alpha + 3.0) / 4.0 - eps)
    rows = []
    for t in t_grid:
        vt = linear_propagator(v0.values, grid, E, t)
        smoothed = linear_propagator(v0.values, grid, E, t, alpha * beta) if alpha * beta else vt
        norm = lp_norm(smoothed, grid.cell_area, p)
        rows.append({"t": float(t), "norm_p": norm,
                     "l2_norm": lp_norm(vt, grid.cell_area, 2.0),
                     "ratio": norm * t ** rate if t > 0 else norm})
    positive = [r for r in rows if r["t"] > 0]
    bounded = compensated_bounded([r["t"] for r in positive], [r["norm_p"] for r in positive], rate)
    fitted = None
    if len(positive) >= 2:
        fitted = float(np.polyfit(np.log([r["t"] for r in positive]),
                                  np.log([r["norm_p"] for r in positive]), 1)[0])
    return PropagatorTable(p, rate, rows, bounded, fitted)


def strichartz_probe(v0: RealField2D, alpha: float, beta: float, E: float,
                     t_grid: Sequence[float], eps: float = 0.05, tail_tol: float = 1e-10) -> dict:
    """Space-time norms of U(t)v0 relative to ‖v0‖_{L²}.

    mixed: ‖|∂_z|^{αβ/2} U(t)v0‖_{L^q_t L^p_x}, p = 2/(1−β), 2/q = β((α+3)/4 − ε);
    l4: ‖U(t)v0‖_{L⁴_{t,x,y}}. Both are repeated on every other time sample to
    report sensitivity to the time grid.
    """
    _check_propagator_inputs(v0, beta, E, tail_tol)
    ts = np.asarray(sorted(float(t) for t in t_grid))
    if ts.size < 3:
        raise PreconditionError("strichartz_probe needs at least three time samples")
    grid = v0.grid
    p = math.inf if beta == 1.0 else 2.0 / (1.0 - beta)
    q = math.inf if beta == 0.0 else 2.0 / (beta * ((alpha + 3.0) / 4.0 - eps))
    space, quartic = [], []
    for t in ts:
        vt = linear_propagator(v0.values, grid, E, t)
        smoothed = linear_propagator(v0.values, grid, E, t, 0.5 * alpha * beta) if alpha * beta else vt
        space.append(lp_norm(smoothed, grid.cell_area, p))
        quartic.append(float(np.sum(vt ** 4) * grid.cell_area))
    space = np.asarray(space)
    quartic = np.asarray(quartic)
    l2 = v0.l2_norm()

    def norms(sel):
        tt = ts[sel]
        mixed = space[sel].max() if math.isinf(q) else trapezoid(space[sel] ** q, tt) ** (1.0 / q)
        return float(mixed) / l2, float(trapezoid(quartic[sel], tt) ** 0.25) / l2

    fine = norms(slice(None))
    coarse = norms(slice(None, None, 2))
    return {
        "p": p, "q": q, "alpha": alpha, "beta": beta, "E": E,
        "mixed_ratio": fine[0], "l4_ratio": fine[1],
        "mixed_refinement_change": abs(fine[0] - coarse[0]) / fine[0] if fine[0] else 0.0,
        "l4_refinement_change": abs(fine[1] - coarse[1]) / fine[1] if fine[1] else 0.0,
    }
