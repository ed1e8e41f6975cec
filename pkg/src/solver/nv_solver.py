"""Pseudo-spectral NV solver at fixed energy E.

    ∂_t v = 8(∂_z³ + ∂_z̄³)v + 2∂_z(vw) + 2∂_z̄(vw̄) − 2E(∂_z w + ∂_z̄ w̄),
    ∂_z̄ w = −3∂_z v,

with z = x + iy, ∂_z = ½(∂_x − i∂_y). On the grid ∂_z ↔ ½(i·kx + ky), so
ŵ = −3(k̄/k)·v̂ with k = kx + i·ky and ŵ(0) = 0. The linear part is
v̂_t = −i·p(k)·v̂ with p the dispersion symbol; the nonlinear part is
4·Re ∂_z(vw) = 2∇·(v w⃗).
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import correlate1d

from src.dispersion.symbol_core import EnergyParam, as_energy, multiplier_array, symbol_array
from src.solver.etdrk4 import ETDRK4Integrator
from src.solver.grid import GridSpec, RealField2D, enforce_hermitian, hermitian_residue, resolution_check
from src.utils.error_handler import NaNDetectedError, PreconditionError


# ============================================================================
# Domain Types
# ============================================================================

@dataclass
class NVState:
    """Solution snapshot with w kept in sync with v.

    Attributes:
        v: real potential
        w: complex field w1 + i·w2
        t: time
        E: energy level
    """
    v: RealField2D
    w: np.ndarray
    t: float
    E: EnergyParam

    @classmethod
    def from_v(cls, v: RealField2D, E, t: float = 0.0) -> "NVState":
        return cls(v, compute_w(v), float(t), as_energy(E))

    @property
    def grid(self) -> GridSpec:
        return self.v.grid

    @property
    def w1(self) -> np.ndarray:
        return self.w.real

    @property
    def w2(self) -> np.ndarray:
        return self.w.imag


@dataclass(frozen=True)
class HamiltonianParts:
    """Terms of H = ∫[6∂_z w ∂_z v + Ew² − vw²]."""
    dispersive: complex
    potential: complex
    cubic: complex

    @property
    def total(self) -> complex:
        return self.dispersive + self.potential + self.cubic


@dataclass(frozen=True)
class InvariantReport:
    """∫v, M = ∫vw, H and the conjugate-paired variant of H."""
    l1_integral: float
    mass: complex
    energy: complex
    parts: HamiltonianParts
    energy_alt: complex

    def to_row(self, t: float) -> dict:
        return {"t": t, "l1": self.l1_integral,
                "mass_re": self.mass.real, "mass_im": self.mass.imag,
                "energy_re": self.energy.real, "energy_im": self.energy.imag}


@dataclass(frozen=True)
class BlowupParams:
    """φ = a − 24ct + c(x³ + y³) + d(x² + y²)²; v = −2Δ log φ."""
    a: float
    c: float
    d: float


# ============================================================================
# Spectral building blocks
# ============================================================================

def _dz(grid: GridSpec) -> np.ndarray:
    kx, ky = grid.wavenumbers()
    return 0.5 * (1j * kx + ky)


def _dzbar(grid: GridSpec) -> np.ndarray:
    kx, ky = grid.wavenumbers()
    return 0.5 * (1j * kx - ky)


def _w_multiplier(grid: GridSpec) -> np.ndarray:
    kx, ky = grid.wavenumbers()
    return -3.0 * multiplier_array(kx, ky)


def linear_symbol(grid: GridSpec, E: float) -> np.ndarray:
    """L(k) = −i·p(k; E) on the grid."""
    kx, ky = grid.wavenumbers()
    return -1j * symbol_array(kx, ky, E)


def compute_w(v: RealField2D) -> np.ndarray:
    """w with ŵ = −3·m(k)·v̂ and ŵ(0) = 0 (complex field)."""
    grid = v.grid
    return grid.ifft(_w_multiplier(grid) * grid.fft(v.values))


def recovery_identities(v: RealField2D) -> Dict[str, float]:
    """Relative residuals of Δw1 = 3(∂_y² − ∂_x²)v and Δw2 = 6∂_xy v."""
    grid = v.grid
    kx, ky = grid.wavenumbers()
    w = compute_w(v)
    w1_hat = grid.fft(w.real)
    w2_hat = grid.fft(w.imag)
    v_hat = grid.fft(v.values)
    lap = -(kx * kx + ky * ky)
    target1 = 3.0 * (kx * kx - ky * ky) * v_hat
    target2 = -6.0 * kx * ky * v_hat

    def rel(a, b):
        scale = np.linalg.norm(b)
        return float(np.linalg.norm(a - b) / scale) if scale > 0 else float(np.linalg.norm(a))

    return {"w1": rel(lap * w1_hat, target1), "w2": rel(lap * w2_hat, target2)}


class _NonlinearTerm:
    """N̂(v̂) = 4·Re ∂_z(vw) with truncated inputs and products."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.mask = grid.dealias_mask()
        self.dz = _dz(grid)
        self.w_mult = _w_multiplier(grid)

    def __call__(self, v_hat: np.ndarray) -> np.ndarray:
        grid = self.grid
        v_hat = v_hat * self.mask
        v = grid.ifft(v_hat).real
        w = grid.ifft(self.w_mult * v_hat)
        product = self.mask * grid.fft(v * w)
        return 4.0 * enforce_hermitian(self.dz * product)


# ============================================================================
# Right-hand sides
# ============================================================================

def _complex_rhs(state: NVState) -> np.ndarray:
    grid = state.grid
    mask = grid.dealias_mask()
    dz, dzb = _dz(grid), _dzbar(grid)
    v_hat = mask * grid.fft(state.v.values)
    v = grid.ifft(v_hat).real
    w_hat = _w_multiplier(grid) * v_hat
    w = grid.ifft(w_hat)
    wbar_hat = grid.fft(np.conj(w))
    vw_hat = mask * grid.fft(v * w)
    vwbar_hat = mask * grid.fft(v * np.conj(w))
    E = state.E.E
    total = (8.0 * (dz ** 3 + dzb ** 3) * v_hat
             + 2.0 * dz * vw_hat + 2.0 * dzb * vwbar_hat
             - 2.0 * E * (dz * w_hat + dzb * wbar_hat))
    return grid.ifft(total)


def _imaginary_residue(out: np.ndarray) -> float:
    scale = np.linalg.norm(out.real)
    return float(np.linalg.norm(out.imag) / scale) if scale > 0 else float(np.linalg.norm(out.imag))


def nv_rhs(state: NVState, imag_tol: float = 1e-12) -> RealField2D:
    """Complex-form right-hand side.

    Raises PreconditionError when ‖Im‖/‖Re‖ in L² exceeds imag_tol.
    """
    out = _complex_rhs(state)
    residue = _imaginary_residue(out)
    if residue > imag_tol:
        raise PreconditionError(
            f"complex-form RHS is not real (imaginary residue {residue:.3e} > {imag_tol:.1e})")
    return RealField2D(state.grid, out.real)


def rhs_imaginary_residue(state: NVState) -> float:
    return _imaginary_residue(_complex_rhs(state))


def real_form_rhs(state: NVState) -> RealField2D:
    """2[∂_x(∂_x² − 3∂_y²)v + ∇·(v w⃗) − E∇·w⃗] with w⃗ from the Laplacian identities."""
    grid = state.grid
    mask = grid.dealias_mask()
    kx, ky = grid.wavenumbers()
    k2 = kx * kx + ky * ky
    safe = np.where(k2 > 0, k2, 1.0)
    v_hat = mask * grid.fft(state.v.values)
    w1_hat = np.where(k2 > 0, -3.0 * (kx * kx - ky * ky) / safe, 0.0) * v_hat
    w2_hat = np.where(k2 > 0, 6.0 * kx * ky / safe, 0.0) * v_hat
    v = grid.ifft(v_hat).real
    w1 = grid.ifft(w1_hat).real
    w2 = grid.ifft(w2_hat).real
    flux_x = mask * grid.fft(v * w1)
    flux_y = mask * grid.fft(v * w2)
    dispersive = 1j * kx * ((1j * kx) ** 2 - 3.0 * (1j * ky) ** 2) * v_hat
    divergence = 1j * kx * flux_x + 1j * ky * flux_y
    linear_w = 1j * kx * w1_hat + 1j * ky * w2_hat
    total = 2.0 * (dispersive + divergence - state.E.E * linear_w)
    return RealField2D(grid, grid.ifft(total).real)


# ============================================================================
# Time stepping
# ============================================================================

class NVSolver:
    """ETDRK4 evolution of NV on one grid at one energy and step size.

    The linear part uses the exact exponential of −i·p(k)·dt; the truncation
    mask and hermitian projection are applied to every stage.
    """

    def __init__(self, grid: GridSpec, E, dt: float, nonlinear: bool = True):
        self.grid = grid
        self.E = as_energy(E)
        self.dt = float(dt)
        self.nonlinear = nonlinear
        self.mask = grid.dealias_mask()
        term = _NonlinearTerm(grid) if nonlinear else (lambda c: np.zeros_like(c))
        self.integrator = ETDRK4Integrator(
            linear_symbol(grid, self.E.E), term, self.dt,
            project=lambda c: self.mask * enforce_hermitian(c))

    def check_cfl(self, state: NVState) -> None:
        """dt·2·max|w| ≤ 0.5·min(dx, dy)."""
        if not self.nonlinear:
            return
        speed = 2.0 * float(np.abs(state.w).max())
        limit = 0.5 * min(self.grid.dx, self.grid.dy)
        if self.dt * speed > limit:
            raise PreconditionError(
                f"time step {self.dt:g} violates the advection bound dt*speed <= {limit:g} (speed {speed:g})")

    def _state(self, v_hat: np.ndarray, t: float) -> NVState:
        v = RealField2D(self.grid, self.grid.ifft(v_hat).real)
        return NVState.from_v(v, self.E, t)

    def step(self, state: NVState) -> NVState:
        v_hat = self.integrator.step(self.mask * enforce_hermitian(self.grid.fft(state.v.values)))
        if not np.all(np.isfinite(v_hat)):
            raise NaNDetectedError("non-finite values after one step", state=state, time=state.t)
        return self._state(v_hat, state.t + self.dt)

    def evolve(self, state: NVState, T: float,
               observer: Optional[Callable[[NVState], None]] = None,
               observe_every: int = 1) -> NVState:
        """Advance by T in ceil(T/dt) steps (the last step count rounds, dt is fixed)."""
        if T < 0:
            raise PreconditionError(f"evolution time must be non-negative, got {T!r}")
        self.check_cfl(state)
        n_steps = int(round(T / self.dt))
        v_hat = self.mask * enforce_hermitian(self.grid.fft(state.v.values))
        last_finite = state
        t = state.t
        if observer is not None:
            observer(state)
        for n in range(1, n_steps + 1):
            v_hat = self.integrator.step(v_hat)
            t = state.t + n * self.dt
            if not np.all(np.isfinite(v_hat)):
                raise NaNDetectedError(f"non-finite values at t = {t:g}", state=last_finite, time=last_finite.t)
            if observer is not None and (n % observe_every == 0 or n == n_steps):
                last_finite = self._state(v_hat, t)
                observer(last_finite)
            elif n % 50 == 0:
                last_finite = self._state(v_hat, t)
        return self._state(v_hat, t)


def step(state: NVState, dt: float, nonlinear: bool = True) -> NVState:
    return NVSolver(state.grid, state.E, dt, nonlinear).step(state)


def evolve(state: NVState, T: float, dt: float, nonlinear: bool = True) -> NVState:
    return NVSolver(state.grid, state.E, dt, nonlinear).evolve(state, T)


def evolve_tracked(state: NVState, T: float, dt: float, samples: int = 10,
                   nonlinear: bool = True) -> Tuple[NVState, List[dict]]:
    """Evolve and record invariants roughly `samples` times (plus t = 0 and t = T)."""
    solver = NVSolver(state.grid, state.E, dt, nonlinear)
    n_steps = max(1, int(round(T / dt)))
    rows: List[dict] = []
    final = solver.evolve(state, T, observer=lambda s: rows.append(invariants(s).to_row(s.t)),
                          observe_every=max(1, n_steps // max(1, samples)))
    return final, rows


# ============================================================================
# Conserved quantities
# ============================================================================

def hamiltonian_parts(state: NVState, conjugate_pairing: bool = False) -> HamiltonianParts:
    grid = state.grid
    v_hat = grid.fft(state.v.values)
    dz_w = grid.ifft(_dz(grid) * grid.fft(state.w))
    d_v = grid.ifft((_dzbar(grid) if conjugate_pairing else _dz(grid)) * v_hat)
    da = grid.cell_area
    w2 = state.w * state.w
    return HamiltonianParts(
        dispersive=complex(np.sum(6.0 * dz_w * d_v) * da),
        potential=complex(np.sum(state.E.E * w2) * da),
        cubic=complex(-np.sum(state.v.values * w2) * da),
    )


def invariants(state: NVState) -> InvariantReport:
    """∫v, M = ∫vw and H = ∫[6∂_z w ∂_z v + Ew² − vw²] by the periodic trapezoid rule."""
    parts = hamiltonian_parts(state)
    alt = hamiltonian_parts(state, conjugate_pairing=True)
    da = state.grid.cell_area
    return InvariantReport(
        l1_integral=float(state.v.values.sum() * da),
        mass=complex(np.sum(state.v.values * state.w) * da),
        energy=parts.total,
        parts=parts,
        energy_alt=alt.total,
    )


def invariant_drift(rows: Sequence[dict]) -> Dict[str, float]:
    """Largest relative change of each invariant against the first row."""
    first = rows[0]
    refs = {
        "l1": abs(first["l1"]),
        "mass": abs(complex(first["mass_re"], first["mass_im"])),
        "energy": abs(complex(first["energy_re"], first["energy_im"])),
    }
    drift = {key: 0.0 for key in refs}
    for row in rows[1:]:
        diffs = {
            "l1": abs(row["l1"] - first["l1"]),
            "mass": abs(complex(row["mass_re"] - first["mass_re"], row["mass_im"] - first["mass_im"])),
            "energy": abs(complex(row["energy_re"] - first["energy_re"], row["energy_im"] - first["energy_im"])),
        }
        for key, diff in diffs.items():
            rel = diff / refs[key] if refs[key] > 0 else diff
            drift[key] = max(drift[key], rel)
    return drift


# ============================================================================
# Initial data
# ============================================================================

def gaussian(grid: GridSpec, amplitude: float = 1.0, sigma: float = 1.0,
             x0: float = 0.0, y0: float = 0.0) -> RealField2D:
    X, Y = grid.mesh()
    return RealField2D(grid, amplitude * np.exp(-((X - x0) ** 2 + (Y - y0) ** 2) / (2.0 * sigma ** 2)))


def single_mode(grid: GridSpec, mx: int = 1, my: int = 1, amplitude: float = 1.0) -> RealField2D:
    """amplitude·cos(2π·mx·x/Lx + 2π·my·y/Ly)."""
    X, Y = grid.mesh()
    return RealField2D(grid, amplitude * np.cos(2 * np.pi * mx * X / grid.Lx + 2 * np.pi * my * Y / grid.Ly))


def _wrap(x: np.ndarray, length: float) -> np.ndarray:
    return (x + 0.5 * length) % length - 0.5 * length


def kdv_profile(grid: GridSpec, c: float, x0: float) -> RealField2D:
    """−(c/2)sech²(√c(x − x0)/2), y-independent."""
    if not c > 0:
        raise PreconditionError(f"soliton speed c must be positive, got {c!r}")
    X, _ = grid.mesh()
    xi = _wrap(X - x0, grid.Lx)
    return RealField2D(grid, -(c / 2.0) / np.cosh(0.5 * math.sqrt(c) * xi) ** 2)


def kdv_soliton_speed(c: float, E: float, mean: float) -> float:
    """Velocity −(6(E + v̄) + 2c) of the mapped soliton."""
    return -(6.0 * (E + mean) + 2.0 * c)


def kdv_reference(grid: GridSpec, c: float, x0: float, E: float, s: float, mean: float) -> RealField2D:
    """v(s, x) = −U(−2s, x + 6(E + v̄)s) with U the standard KdV soliton."""
    return kdv_profile(grid, c, x0 + kdv_soliton_speed(c, E, mean) * s)


def initial_data(preset: str, grid: GridSpec, **params) -> RealField2D:
    """Analytic presets: gaussian, kdv_soliton, single_mode, blowup."""
    if preset == "gaussian":
        return gaussian(grid, params.get("amplitude", 1.0), params.get("sigma", 1.0))
    if preset == "kdv_soliton":
        return kdv_profile(grid, params.get("c", 1.0), params.get("x0", -4.0))
    if preset == "single_mode":
        return single_mode(grid, int(params.get("kx", 1)), int(params.get("ky", 1)),
                           params.get("amplitude", 1.0))
    if preset == "blowup":
        p = BlowupParams(params.get("a", 1.0), params.get("c", 1.0), params.get("d", 1.0))
        X, Y = grid.mesh()
        fields = blowup_fields(p, X, Y)
        if not fields["phi"].min() > 0:
            raise PreconditionError("a - 24ct + c(x^3+y^3) + d(x^2+y^2)^2 must be positive on the grid")
        return RealField2D(grid, fields["v"])
    raise PreconditionError(f"unknown initial-data preset {preset!r}")


# ============================================================================
# Exact-solution batteries
# ============================================================================

# 8th-order central first derivative
_D1_STENCIL = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])


def _fd(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    return correlate1d(values, _D1_STENCIL / h, axis=axis, mode="nearest")


def blowup_fields(p: BlowupParams, X: np.ndarray, Y: np.ndarray, t: float = 0.0) -> Dict[str, np.ndarray]:
    """φ and its derivatives, v, w1, w2 and ∂_t v for the closed form."""
    a, c, d = p.a, p.c, p.d
    r2 = X * X + Y * Y
    phi = a - 24.0 * c * t + c * (X ** 3 + Y ** 3) + d * r2 * r2
    phi_x = 3.0 * c * X * X + 4.0 * d * X * r2
    phi_y = 3.0 * c * Y * Y + 4.0 * d * Y * r2
    phi_xx = 6.0 * c * X + 4.0 * d * (3.0 * X * X + Y * Y)
    phi_yy = 6.0 * c * Y + 4.0 * d * (X * X + 3.0 * Y * Y)
    phi_xy = 8.0 * d * X * Y
    L_xx = phi_xx / phi - phi_x ** 2 / phi ** 2
    L_yy = phi_yy / phi - phi_y ** 2 / phi ** 2
    L_xy = phi_xy / phi - phi_x * phi_y / phi ** 2
    lap_inv = -(phi_xx + phi_yy) / phi ** 2 + 2.0 * (phi_x ** 2 + phi_y ** 2) / phi ** 3
    return {
        "phi": phi,
        "v": -2.0 * (L_xx + L_yy),
        "w1": 6.0 * (L_xx - L_yy),
        "w2": -12.0 * L_xy,
        "v_t": 48.0 * c * lap_inv,
    }


def blowup_residual(p: BlowupParams, window: float = 5.0, h: float = 0.025, E: float = 0.0) -> float:
    """sup|∂_t v − RHS| / max term sup-norm on [−window, window]² at t = 0.

    RHS = 2∂_x(∂_x² − 3∂_y²)v + 2∇·(v w⃗) by 8th-order central differences on a
    haloed grid around the window.
    """
    if E != 0.0:
        raise PreconditionError("the blow-up closed form solves the E = 0 equation only")
    if not (window > 0 and h > 0):
        raise PreconditionError("window and spacing must be positive")
    halo = 16
    n = int(round(2.0 * window / h))
    coords = h * (np.arange(-halo, n + halo + 1)) - window
    X, Y = np.meshgrid(coords, coords, indexing="ij")
    if p.c == 0.0 and p.d == 0.0:
        if p.a <= 0:
            raise PreconditionError(f"a - 24ct + c(x^3+y^3) + d(x^2+y^2)^2 must be positive; got a = {p.a}")
        return 0.0
    fields = blowup_fields(p, X, Y)
    phi_min = float(fields["phi"].min())
    if not phi_min > 0:
        raise PreconditionError(
            f"a - 24ct + c(x^3+y^3) + d(x^2+y^2)^2 must be positive on the window (min {phi_min:.3e})")
    v, w1, w2 = fields["v"], fields["w1"], fields["w2"]
    v_x = _fd(v, h, 0)
    dispersive = 2.0 * (_fd(_fd(v_x, h, 0), h, 0) - 3.0 * _fd(_fd(v_x, h, 1), h, 1))
    nonlinear = 2.0 * (_fd(v * w1, h, 0) + _fd(v * w2, h, 1))
    inner = (slice(halo, halo + n + 1), slice(halo, halo + n + 1))
    v_t = fields["v_t"][inner]
    residual = v_t - (dispersive[inner] + nonlinear[inner])
    scale = max(np.abs(v_t).max(), np.abs(dispersive[inner]).max(), np.abs(nonlinear[inner]).max())
    if scale == 0:
        return 0.0
    return float(np.abs(residual).max() / scale)


def scaling_symmetry_check(v0: RealField2D, E: float, lambda_scale: float, T: float, dt: float,
                           tail_tol: float = 1e-10) -> float:
    """Relative L² gap between v_λ(T/λ³) and λ²·v(T) on grids related by x → λx."""
    if not lambda_scale > 0:
        raise PreconditionError(f"scaling factor must be positive, got {lambda_scale!r}")
    lam = float(lambda_scale)
    resolution_check(v0, tol=tail_tol)
    if lam == 1.0:
        return 0.0
    base = NVSolver(v0.grid, E, dt).evolve(NVState.from_v(v0, E), T)
    grid_l = v0.grid.scaled(lam)
    v0_l = RealField2D(grid_l, lam ** 2 * v0.values)
    resolution_check(v0_l, tol=tail_tol)
    E_l = E * lam ** 2
    solver_l = NVSolver(grid_l, E_l, dt / lam ** 3)
    n_steps = int(round(T / dt))
    scaled = solver_l.evolve(NVState.from_v(v0_l, E_l), n_steps * solver_l.dt)
    expected = lam ** 2 * base.v.values
    return float(np.linalg.norm(scaled.v.values - expected) / np.linalg.norm(expected))


def lifespan_probe(v0: RealField2D, energies: Sequence[float], T_max: float, dt: float,
                   blowup_factor: float = 1e3) -> List[dict]:
    """Time reached per E before non-finite values or amplitude growth by blowup_factor."""
    rows = []
    amp0 = float(np.abs(v0.values).max())
    for E in energies:
        solver = NVSolver(v0.grid, E, dt)
        state = NVState.from_v(v0, E)
        status = "OK"
        n_steps = int(round(T_max / dt))
        try:
            for _ in range(n_steps):
                state = solver.step(state)
                if np.abs(state.v.values).max() > blowup_factor * amp0:
                    status = "AMPLITUDE"
                    break
        except NaNDetectedError as exc:
            status = exc.code
            state = exc.state
        rows.append({"E": float(E), "t_reached": state.t, "status": status,
                     "max_amplitude": float(np.abs(state.v.values).max()),
                     "l2_norm": state.v.l2_norm()})
    return rows


def hermitian_drift(state: NVState, dt: float, n_steps: int = 1000, nonlinear: bool = True) -> float:
    """Hermitian residue of v̂ after n_steps ETDRK4 steps without the hermitian projection.

    Only the truncation mask is applied between stages, so the residue measures
    how far the scheme itself moves v away from a real field.
    """
    grid = state.grid
    mask = grid.dealias_mask()
    term = _NonlinearTerm(grid) if nonlinear else (lambda c: np.zeros_like(c))
    integrator = ETDRK4Integrator(linear_symbol(grid, state.E.E), term, dt, project=lambda c: mask * c)
    v_hat = integrator.forward_integrate(mask * enforce_hermitian(grid.fft(state.v.values)), n_steps)
    if not np.all(np.isfinite(v_hat)):
        raise NaNDetectedError(f"non-finite spectrum after {n_steps} steps", state=state, time=state.t)
    return hermitian_residue(v_hat)
