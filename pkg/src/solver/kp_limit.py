"""High-energy limit of NV: the KP ansatz, its residuals, and the limit flow.

With E = ±κ² and y = κY the NV system becomes

    (a) ∂_t v = 2∂_x³v − 6κ⁻²∂_xYY v + 2∂_x(vw1) + 2κ⁻¹∂_Y(vw2) − 2E∂_x w1 − 2Eκ⁻¹∂_Y w2,
    (b) ∂_x w1 − κ⁻¹∂_Y w2 = −3∂_x v,
    (c) ∂_x w2 + κ⁻¹∂_Y w1 = 3κ⁻¹∂_Y v,

and the ansatz

    w1 = −3E − 3v0 + 6κ⁻²∂_x⁻²∂_Y²v0,   w2 = 6κ⁻¹∂_x⁻¹∂_Y v0

solves (b) exactly, leaves 6κ⁻³∂_x⁻²∂_Y³v0 in (c), and leaves an O(κ⁻²) term
in (a) when v0 follows

    ∂_t v0 = 2∂_x³v0 − 12v0∂_x v0 ∓ 24∂_x⁻¹∂_Y²v0.

∂_x⁻¹ acts on fields whose x-mean vanishes on every Y-line.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from src.solver.etdrk4 import ETDRK4Integrator
from src.solver.grid import GridSpec, RealField2D, enforce_hermitian, resolution_check
from src.utils.error_handler import NaNDetectedError, PreconditionError


XMEAN_TOL = 1e-10


class KpSign(Enum):
    """PLUS: E = +κ², limit KPI. MINUS: E = −κ², limit KPII."""
    PLUS = "plus"
    MINUS = "minus"

    @classmethod
    def parse(cls, value) -> "KpSign":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        for member in cls:
            if text in (member.value, member.name.lower(), "+" if member is cls.PLUS else "-"):
                return member
        raise PreconditionError(f"unknown KP sign {value!r}; expected 'plus' or 'minus'")

    @property
    def energy_sign(self) -> int:
        return 1 if self is KpSign.PLUS else -1

    @property
    def kp_name(self) -> str:
        return "KPI" if self is KpSign.PLUS else "KPII"

    def energy(self, kappa: float) -> float:
        return self.energy_sign * kappa * kappa


# ============================================================================
# Spectral operators in (x, Y)
# ============================================================================

class _Ops:
    """Multipliers i·kx, i·kY and ∂_x⁻¹ (0 on the kx = 0 column)."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        kx, ky = grid.wavenumbers()
        self.dx = 1j * kx
        self.dy = 1j * ky
        nonzero = kx != 0
        self.xmask = nonzero
        self.dx_inv = np.zeros_like(self.dx)
        self.dx_inv[nonzero] = 1.0 / self.dx[nonzero]

    def fft(self, values: np.ndarray) -> np.ndarray:
        return self.grid.fft(values)

    def real(self, coeffs: np.ndarray) -> np.ndarray:
        return self.grid.ifft(coeffs).real


def x_mean_defect(v: RealField2D) -> float:
    """Largest |x-mean| over Y-lines relative to max|v| (0 for v ≡ 0)."""
    scale = float(np.abs(v.values).max())
    if scale == 0:
        return 0.0
    return float(np.abs(v.values.mean(axis=0)).max() / scale)


def _require_mean_free(v: RealField2D) -> None:
    defect = x_mean_defect(v)
    if defect > XMEAN_TOL:
        raise PreconditionError(
            f"v0 must have zero x-mean on every Y-line for the inverse x-derivative (defect {defect:.3e})")


def _rel(a: np.ndarray, scale: float) -> float:
    norm = float(np.linalg.norm(a))
    return norm / scale if scale > 0 else norm


# ============================================================================
# Ansatz and residuals
# ============================================================================

@dataclass
class KpAnsatz:
    """Assembled ansatz on the (x, Y) grid.

    Attributes:
        kappa: κ > 0 with E = ±κ²
        sign: PLUS or MINUS
        v: v0(x, Y)
        w1_loc: w1 + 3E = −3v0 + 6κ⁻²∂_x⁻²∂_Y²v0, the part that decays in x
        w2: 6κ⁻¹∂_x⁻¹∂_Y v0
    """
    kappa: float
    sign: KpSign
    v: RealField2D
    w1_loc: RealField2D
    w2: RealField2D

    @property
    def E(self) -> float:
        return self.sign.energy(self.kappa)

    @property
    def offset(self) -> float:
        return -3.0 * self.E

    @property
    def grid(self) -> GridSpec:
        return self.v.grid

    @property
    def w1(self) -> RealField2D:
        """w1 with the constant −3E offset."""
        return RealField2D(self.grid, self.w1_loc.values + self.offset)

    def w1_localized(self) -> np.ndarray:
        return self.w1_loc.values

    def construction_defect(self) -> float:
        """‖w1 + 3E + 3v0 − 6κ⁻²∂_x⁻²∂_Y²v0‖ / ‖v0‖."""
        ops = _Ops(self.grid)
        v_hat = ops.fft(self.v.values)
        correction = ops.real(6.0 * self.kappa ** -2 * ops.dx_inv ** 2 * ops.dy ** 2 * v_hat)
        gap = self.w1_localized() + 3.0 * self.v.values - correction
        return _rel(gap, float(np.linalg.norm(self.v.values)))


def build_ansatz(v0: RealField2D, kappa: float, sign) -> KpAnsatz:
    if not kappa > 0:
        raise PreconditionError(f"kappa must be positive, got {kappa!r}")
    sign = KpSign.parse(sign)
    _require_mean_free(v0)
    ops = _Ops(v0.grid)
    v_hat = ops.fft(v0.values)
    w1_loc = -3.0 * v0.values + ops.real(6.0 * kappa ** -2 * ops.dx_inv ** 2 * ops.dy ** 2 * v_hat)
    w2 = ops.real(6.0 / kappa * ops.dx_inv * ops.dy * v_hat)
    return KpAnsatz(float(kappa), sign, v0, RealField2D(v0.grid, w1_loc), RealField2D(v0.grid, w2))


@dataclass(frozen=True)
class ConstraintResiduals:
    """Residuals of the two constraint equations.

    Attributes:
        b2b: ‖residual of (b)‖ / ‖∂_x v0‖
        b2c: ‖residual of (c)‖ / ‖∂_x v0‖
        b2c_gap: ‖residual of (c) − 6κ⁻³∂_x⁻²∂_Y³v0‖ relative to the cancelling terms
        b2c_field: residual field of (c)
    """
    b2b: float
    b2c: float
    b2c_gap: float
    b2c_field: RealField2D


def residual_b2bc(a: KpAnsatz) -> ConstraintResiduals:
    ops = _Ops(a.grid)
    k = a.kappa
    v_hat = ops.fft(a.v.values)
    w1_hat = ops.fft(a.w1_localized())
    w2_hat = ops.fft(a.w2.values)
    scale = float(np.linalg.norm(ops.real(ops.dx * v_hat)))

    res_b = ops.dx * w1_hat - ops.dy * w2_hat / k + 3.0 * ops.dx * v_hat
    res_c = ops.dx * w2_hat + ops.dy * w1_hat / k - 3.0 * ops.dy * v_hat / k
    closed = 6.0 * k ** -3 * ops.dx_inv ** 2 * ops.dy ** 3 * v_hat
    c_field = ops.real(res_c)
    term_scale = max(float(np.linalg.norm(ops.real(ops.dy * v_hat))) * 3.0 / k,
                     float(np.linalg.norm(ops.real(closed))))
    return ConstraintResiduals(
        b2b=_rel(ops.real(res_b), scale),
        b2c=_rel(c_field, scale),
        b2c_gap=_rel(c_field - ops.real(closed), term_scale),
        b2c_field=RealField2D(a.grid, c_field),
    )


def b2c_closed_form(v0: RealField2D, kappa: float) -> RealField2D:
    """6κ⁻³∂_x⁻²∂_Y³v0."""
    ops = _Ops(v0.grid)
    return RealField2D(v0.grid, ops.real(6.0 * kappa ** -3 * ops.dx_inv ** 2 * ops.dy ** 3 * ops.fft(v0.values)))


def limit_rhs(v0: RealField2D, sign, dealias: bool = True) -> RealField2D:
    """2∂_x³v0 − 6∂_x(v0²) ∓ 24∂_x⁻¹∂_Y²v0."""
    sign = KpSign.parse(sign)
    ops = _Ops(v0.grid)
    v_hat = ops.fft(v0.values)
    square = ops.fft(v0.values * v0.values)
    if dealias:
        mask = v0.grid.dealias_mask()
        v_hat = mask * v_hat
        square = mask * square
    total = (2.0 * ops.dx ** 3 * v_hat - 6.0 * ops.dx * square
             - 24.0 * sign.energy_sign * ops.dx_inv * ops.dy ** 2 * v_hat)
    return RealField2D(v0.grid, ops.real(total))


def residual_b2a(a: KpAnsatz, dt_v: Optional[RealField2D] = None) -> RealField2D:
    """Residual field of (a) for the ansatz; ∂_t v0 defaults to the limit flow at v0.

    Products are taken without truncation, matching the default ∂_t v0, so the
    O(1) and O(κ²) parts cancel to rounding.
    """
    if dt_v is None:
        dt_v = limit_rhs(a.v, a.sign, dealias=False)
    ops = _Ops(a.grid)
    k, E = a.kappa, a.E
    v = a.v.values
    w1_loc = a.w1_localized()
    w2 = a.w2.values
    v_hat = ops.fft(v)
    rhs = (2.0 * ops.dx ** 3 * v_hat
           - 6.0 * k ** -2 * ops.dx * ops.dy ** 2 * v_hat
           + 2.0 * ops.dx * ops.fft(v * w1_loc) + 2.0 * a.offset * ops.dx * v_hat
           + 2.0 / k * ops.dy * ops.fft(v * w2)
           - 2.0 * E * ops.dx * ops.fft(w1_loc)
           - 2.0 * E / k * ops.dy * ops.fft(w2))
    return RealField2D(a.grid, dt_v.values - ops.real(rhs))


def b2a_closed_form(v0: RealField2D, kappa: float) -> RealField2D:
    """κ⁻²[6∂_xYY v0 − 12∂_x(v0∂_x⁻²∂_Y²v0) − 12∂_Y(v0∂_x⁻¹∂_Y v0)]."""
    ops = _Ops(v0.grid)
    v_hat = ops.fft(v0.values)
    p = ops.real(ops.dx_inv ** 2 * ops.dy ** 2 * v_hat)
    q = ops.real(ops.dx_inv * ops.dy * v_hat)
    total = (6.0 * ops.dx * ops.dy ** 2 * v_hat
             - 12.0 * ops.dx * ops.fft(v0.values * p)
             - 12.0 * ops.dy * ops.fft(v0.values * q))
    return RealField2D(v0.grid, kappa ** -2 * ops.real(total))


# ============================================================================
# Limit evolution
# ============================================================================

class KpLimitSolver:
    """ETDRK4 for the limit equation; the kx = 0 column is held at zero."""

    def __init__(self, grid: GridSpec, sign, dt: float):
        self.grid = grid
        self.sign = KpSign.parse(sign)
        self.dt = float(dt)
        self.ops = _Ops(grid)
        self.mask = grid.dealias_mask() & self.ops.xmask
        kx, ky = grid.wavenumbers()
        linear = np.zeros(grid.shape, dtype=complex)
        nz = self.ops.xmask
        linear[nz] = (-2j * kx[nz] ** 3
                      - 24j * self.sign.energy_sign * ky[nz] ** 2 / kx[nz])
        self.integrator = ETDRK4Integrator(linear, self._nonlinear, self.dt,
                                           project=lambda c: self.mask * enforce_hermitian(c))

    def _nonlinear(self, v_hat: np.ndarray) -> np.ndarray:
        v = self.grid.ifft(self.mask * v_hat).real
        return -6.0 * self.mask * self.ops.dx * self.grid.fft(v * v)

    def _prepare(self, v0: RealField2D) -> np.ndarray:
        _require_mean_free(v0)
        return self.mask * enforce_hermitian(self.grid.fft(v0.values))

    def _field(self, v_hat: np.ndarray) -> RealField2D:
        return RealField2D(self.grid, self.grid.ifft(v_hat).real)

    def advance(self, v_hat: np.ndarray, n_steps: int, t0: float = 0.0) -> np.ndarray:
        for n in range(1, n_steps + 1):
            nxt = self.integrator.step(v_hat)
            if not np.all(np.isfinite(nxt)):
                t = t0 + (n - 1) * self.dt
                raise NaNDetectedError(f"limit flow produced non-finite values after t = {t:g}",
                                       state=self._field(v_hat), time=t)
            v_hat = nxt
        return v_hat

    def evolve(self, v0: RealField2D, T: float) -> RealField2D:
        if T < 0:
            raise PreconditionError(f"evolution time must be non-negative, got {T!r}")
        return self._field(self.advance(self._prepare(v0), int(round(T / self.dt))))

    def snapshots(self, v0: RealField2D, times: Sequence[float]) -> List[RealField2D]:
        """States at increasing times, each a whole number of steps from 0."""
        out = []
        v_hat = self._prepare(v0)
        done = 0
        for t in times:
            target = int(round(t / self.dt))
            if target < done:
                raise PreconditionError("snapshot times must be non-decreasing")
            v_hat = self.advance(v_hat, target - done, done * self.dt)
            done = target
            out.append(self._field(v_hat))
        return out


def evolve_limit(v0: RealField2D, T: float, dt: float, sign, tail_tol: float = 1e-10) -> RealField2D:
    resolution_check(v0, tol=tail_tol)
    return KpLimitSolver(v0.grid, sign, dt).evolve(v0, T)


def evolve_limit_snapshots(v0: RealField2D, times: Sequence[float], dt: float, sign) -> List[RealField2D]:
    return KpLimitSolver(v0.grid, sign, dt).snapshots(v0, times)


def limit_soliton(grid: GridSpec, c: float, x0: float, t: float, mean: Optional[float] = None) -> RealField2D:
    """Zero-mean travelling wave of the y-independent limit equation.

    S(t, x) = −(c/2)sech²(√c(x − x0 + 2ct)/2) solves ∂_t S = 2∂_x³S − 12S∂_x S;
    v = S(t, x + 12mt) − m with m the x-mean of S(0) then solves it too.
    """
    if not c > 0:
        raise PreconditionError(f"soliton speed c must be positive, got {c!r}")
    X, _ = grid.mesh()

    def profile(shift: float) -> np.ndarray:
        xi = (X - x0 + shift + 0.5 * grid.Lx) % grid.Lx - 0.5 * grid.Lx
        return -(c / 2.0) / np.cosh(0.5 * math.sqrt(c) * xi) ** 2

    if mean is None:
        mean = float(profile(0.0).mean())
    return RealField2D(grid, profile((2.0 * c + 12.0 * mean) * t) - mean)


def kp_initial_data(preset: str, grid: GridSpec, amplitude: float = 0.5, sigma: float = 2.5,
                    c: float = 1.0) -> RealField2D:
    """Mean-free v0 presets: dx_gaussian (∂_x of a Gaussian) and soliton."""
    if preset == "dx_gaussian":
        if not sigma > 0:
            raise PreconditionError(f"sigma must be positive, got {sigma!r}")
        X, Y = grid.mesh()
        bump = amplitude * np.exp(-(X * X + Y * Y) / (2.0 * sigma ** 2))
        return RealField2D(grid, sigma * grid.derivative(bump, ox=1))
    if preset == "soliton":
        return limit_soliton(grid, c, 0.0, 0.0)
    raise PreconditionError(f"unknown KP preset {preset!r}; expected 'dx_gaussian' or 'soliton'")


# ============================================================================
# Sweeps and the KP map
# ============================================================================

@dataclass
class KappaSweep:
    rows: List[dict]
    slope: float

    def table(self) -> List[dict]:
        return [dict(row, slope_fit=self.slope) for row in self.rows]


def kappa_sweep(v0: RealField2D, kappas: Sequence[float], sign, T: float = 0.0,
                dt: float = 1e-3) -> KappaSweep:
    """Residuals of (a)-(c) per κ with v0 first evolved to T under the limit flow."""
    if len(kappas) < 2:
        raise PreconditionError("a slope fit needs at least two kappa values")
    sign = KpSign.parse(sign)
    state = evolve_limit(v0, T, dt, sign) if T > 0 else v0
    rows = []
    for kappa in kappas:
        ansatz = build_ansatz(state, kappa, sign)
        bc = residual_b2bc(ansatz)
        res_a = float(np.sqrt(np.sum(residual_b2a(ansatz).values ** 2) * state.grid.cell_area))
        rows.append({"kappa": float(kappa), "res_b2b": bc.b2b, "res_b2c": bc.b2c,
                     "res_b2c_gap": bc.b2c_gap, "res_b2a": res_a})
    usable = [r for r in rows if r["res_b2a"] > 0]
    if len(usable) < 2:
        slope = float("nan")
    else:
        slope = float(np.polyfit(np.log([r["kappa"] for r in usable]),
                                 np.log([r["res_b2a"] for r in usable]), 1)[0])
    return KappaSweep(rows, slope)


def kp_field(v0: RealField2D) -> RealField2D:
    """u(x, y) = −v0(−x, 2y) on the box of half the Y-length."""
    grid = v0.grid
    ugrid = GridSpec(grid.nx, grid.ny, grid.Lx, grid.Ly / 2.0, grid.dealias, grid.workers)
    idx = (-np.arange(grid.nx)) % grid.nx
    return RealField2D(ugrid, -v0.values[idx, :])


@dataclass(frozen=True)
class KpMapReport:
    """KP residual of the mapped snapshots with its time-difference error estimate."""
    residual: float
    residual_coarse: float
    estimate: float
    passed: bool
    equation: str

    def to_record(self) -> dict:
        return {"residual": self.residual, "residual_coarse": self.residual_coarse,
                "estimate": self.estimate, "passed": self.passed, "equation": self.equation}


def kp_map_check(snapshots: Sequence[RealField2D], h: float, sign, floor: float = 1e-9) -> KpMapReport:
    """Residual of ∂_t u + 6u∂_x u + ∂_x³u ∓ 3∂_x⁻¹∂_y²u at the middle snapshot.

    The snapshots are v0 at t0 + kh, k = −2..2. Since u(t) = −v0(−x, 2y, t/2)
    the u-samples are 2h apart; the time derivative is a central difference
    with step 2h and again with 4h, and their gap/3 estimates the error.
    """
    if len(snapshots) != 5:
        raise PreconditionError(f"kp_map_check needs five equally spaced snapshots, got {len(snapshots)}")
    if not h > 0:
        raise PreconditionError(f"snapshot spacing must be positive, got {h!r}")
    sign = KpSign.parse(sign)
    us = [kp_field(s) for s in snapshots]
    grid = us[2].grid
    ops = _Ops(grid)
    mask = grid.dealias_mask()
    u = us[2].values
    u_hat = ops.fft(u)
    spatial = (3.0 * ops.dx * mask * ops.fft(u * u) + ops.dx ** 3 * u_hat
               - 3.0 * sign.energy_sign * ops.dx_inv * ops.dy ** 2 * u_hat)
    spatial = ops.real(spatial)
    ut_fine = (us[3].values - us[1].values) / (2.0 * 2.0 * h)
    ut_coarse = (us[4].values - us[0].values) / (2.0 * 4.0 * h)
    scale = float(np.linalg.norm(ut_fine)) + float(np.linalg.norm(spatial))
    if scale == 0:
        return KpMapReport(0.0, 0.0, 0.0, True, sign.kp_name)
    r_fine = float(np.linalg.norm(ut_fine + spatial)) / scale
    r_coarse = float(np.linalg.norm(ut_coarse + spatial)) / scale
    estimate = abs(r_coarse - r_fine) / 3.0
    return KpMapReport(r_fine, r_coarse, estimate, r_fine <= 10.0 * estimate + floor, sign.kp_name)
