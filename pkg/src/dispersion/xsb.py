"""Discrete Bourgain-space toolbox at fixed energy E.

Space-time fields live on a periodic (nt × nx × ny) box. Temporal
frequencies are oriented so that a free wave U(t)v0, whose coefficients
evolve like e^{−itw(ξ)}, sits on the characteristic τ = w(ξ); the modulation
is σ = τ − w(ξ; E).

Dyadic cutoffs: φ̃ is a C² bump equal to 1 on [−1/2, 1/2] and 0 outside
(−1, 1); φ(s) = φ̃(s) − φ̃(2s), φ_N(s) = φ(s/N) for N ≥ 2 and φ_1 = φ̃, so the
shells telescope to 1.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.fft as sfft

from src.dispersion.symbol_core import as_energy, resonance_H_array, resonance_dH_array, symbol_array
from src.solver.grid import GridSpec
from src.utils.error_handler import PreconditionError


WINDOW_KINDS = ("bump", "periodic")


# ============================================================================
# Cutoffs
# ============================================================================

def smoothstep5(x: np.ndarray) -> np.ndarray:
    """6x⁵ − 15x⁴ + 10x³ clipped to [0, 1]."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x * x * x * (x * (6.0 * x - 15.0) + 10.0)


def cutoff_tilde(s) -> np.ndarray:
    """φ̃(s) = 1 − smoothstep5(2|s| − 1)."""
    return 1.0 - smoothstep5(2.0 * np.abs(np.asarray(s, dtype=float)) - 1.0)


def cutoff_ring(s) -> np.ndarray:
    """φ(s) = φ̃(s) − φ̃(2s), supported in 1/4 < |s| < 1."""
    s = np.asarray(s, dtype=float)
    return cutoff_tilde(s) - cutoff_tilde(2.0 * s)


def _check_dyadic(N) -> int:
    n = int(N)
    if n != N or n < 1 or (n & (n - 1)) != 0:
        raise PreconditionError(f"dyadic index must be a power of two >= 1, got {N!r}")
    return n


def shell_weight(s, N) -> np.ndarray:
    """φ_N(s): φ̃ for N = 1, φ(s/N) otherwise."""
    n = _check_dyadic(N)
    if n == 1:
        return cutoff_tilde(s)
    return cutoff_ring(np.asarray(s, dtype=float) / n)


def dyadic_range(max_value: float) -> List[int]:
    """Shells 1, 2, 4, ... whose partial sum is 1 on [0, max_value]."""
    shells = [1]
    while shells[-1] / 2.0 < max_value:
        shells.append(shells[-1] * 2)
    return shells


@dataclass(frozen=True)
class DyadicIndex:
    """Frequency shell N and modulation shell L."""
    N: int
    L: int

    def __post_init__(self):
        _check_dyadic(self.N)
        _check_dyadic(self.L)


@dataclass(frozen=True)
class XsbSpec:
    """Exponents of the X^{s,b} norm at energy E.

    Attributes:
        s: Sobolev exponent
        b: modulation exponent
        eps: small positive shift used by the bilinear probe
        E: energy, strictly negative
    """
    s: float
    b: float
    eps: float
    E: float

    def __post_init__(self):
        if not self.eps > 0:
            raise PreconditionError(f"eps must be positive, got {self.eps!r}")
        if not self.E < 0:
            raise PreconditionError(f"X^{{s,b}} toolbox requires E < 0, got {self.E!r}")


# ============================================================================
# Space-time fields
# ============================================================================

def time_window(nt: int, T: float, kind: str = "bump") -> np.ndarray:
    """Window samples on t_j = jT/nt.

    "bump" is φ̃(2t/T − 1), which vanishes with two derivatives at both ends;
    "periodic" is the identity and only suits exactly periodic data.
    """
    if kind not in WINDOW_KINDS:
        raise PreconditionError(f"unknown window kind {kind!r}; expected one of {WINDOW_KINDS}")
    t = T * np.arange(nt) / nt
    if kind == "periodic":
        return np.ones(nt)
    return cutoff_tilde(2.0 * t / T - 1.0)


@dataclass
class SpaceTimeField:
    """Windowed samples u(t_j, x, y) on [0, T) × box, shape (nt, nx, ny)."""
    grid: GridSpec
    T: float
    values: np.ndarray
    window: str = "bump"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 3 or self.values.shape[1:] != self.grid.shape:
            raise PreconditionError(
                f"space-time samples of shape {self.values.shape} do not match grid {self.grid.shape}")
        if not self.T > 0:
            raise PreconditionError(f"time window length must be positive, got {self.T!r}")
        if self.window not in WINDOW_KINDS:
            raise PreconditionError(f"unknown window kind {self.window!r}")

    @classmethod
    def from_samples(cls, grid: GridSpec, T: float, samples: np.ndarray,
                     kind: str = "bump") -> "SpaceTimeField":
        """Apply the time window to raw samples."""
        samples = np.asarray(samples, dtype=complex)
        chi = time_window(samples.shape[0], T, kind)
        return cls(grid, T, chi[:, None, None] * samples, kind)

    @property
    def nt(self) -> int:
        return self.values.shape[0]

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.nt)

    @property
    def cell_volume(self) -> float:
        return self.dt * self.grid.cell_area

    def tau(self) -> np.ndarray:
        return -2.0 * np.pi * sfft.fftfreq(self.nt, d=self.dt)

    def spectrum(self) -> np.ndarray:
        return sfft.fftn(self.values, workers=self.grid.workers)

    def with_spectrum(self, coeffs: np.ndarray) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.T, sfft.ifftn(coeffs, workers=self.grid.workers), self.window)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.cell_volume))


def free_wave(v0: np.ndarray, grid: GridSpec, E: float, nt: int, T: float,
              kind: str = "bump") -> SpaceTimeField:
    """χ(t)·U(t)v0 sampled on the space-time box."""
    kx, ky = grid.wavenumbers()
    p = symbol_array(kx, ky, E)
    v_hat = grid.fft(np.asarray(v0, dtype=complex))
    t = T * np.arange(nt) / nt
    samples = sfft.ifft2(np.exp(-1j * t[:, None, None] * p[None]) * v_hat[None],
                         axes=(1, 2), workers=grid.workers)
    return SpaceTimeField.from_samples(grid, T, samples, kind)


def _weights(f: SpaceTimeField, E: float):
    """(|ξ|, |σ|) on the space-time spectral grid."""
    kx, ky = f.grid.wavenumbers()
    tau = f.tau()[:, None, None]
    k_abs = np.hypot(kx, ky)[None]
    sig = np.abs(tau - symbol_array(kx, ky, E)[None])
    return k_abs, sig


# ============================================================================
# Projections and norms
# ============================================================================

def project_PN(f: SpaceTimeField, N: int, E: float) -> SpaceTimeField:
    """Spatial shell: multiply the spectrum by φ_N(|E|^{−1/2}|ξ|)."""
    scale = abs(as_energy(E).E) ** -0.5
    kx, ky = f.grid.wavenumbers()
    weight = shell_weight(scale * np.hypot(kx, ky), N)
    coeffs = sfft.fft2(f.values, axes=(1, 2), workers=f.grid.workers)
    values = sfft.ifft2(weight[None] * coeffs, axes=(1, 2), workers=f.grid.workers)
    return SpaceTimeField(f.grid, f.T, values, f.window)


def project_QL(f: SpaceTimeField, L: int, E: float) -> SpaceTimeField:
    """Modulation shell: multiply the space-time spectrum by φ_L(|E|^{−3/2}|σ|)."""
    energy = as_energy(E).E
    if energy == 0:
        raise PreconditionError("modulation shells need E != 0")
    _, sig = _weights(f, energy)
    weight = shell_weight(abs(energy) ** -1.5 * sig, L)
    return f.with_spectrum(weight * f.spectrum())


def _japanese(x: np.ndarray) -> np.ndarray:
    return np.sqrt(1.0 + x * x)


def _norm_from_spectrum(f: SpaceTimeField, coeffs: np.ndarray, s: float, b: float,
                        E: float, normalized: bool) -> float:
    k_abs, sig = _weights(f, E)
    if normalized:
        k_abs = abs(E) ** -0.5 * k_abs
        sig = abs(E) ** -1.5 * sig
    weight = _japanese(sig) ** (2.0 * b) * _japanese(k_abs) ** (2.0 * s)
    total = np.sum(weight * np.abs(coeffs) ** 2) * f.cell_volume / coeffs.size
    return float(math.sqrt(total))


def xsb_norm(f: SpaceTimeField, spec: XsbSpec, normalized: bool = False) -> float:
    """(∫⟨σ⟩^{2b}⟨|ξ|⟩^{2s}|f̂|²)^{1/2} by the discrete Parseval identity.

    With normalized=True the weights use |E|^{−1/2}|ξ| and |E|^{−3/2}|σ|.
    """
    return _norm_from_spectrum(f, f.spectrum(), spec.s, spec.b, spec.E, normalized)


def xsb_norm_report(f: SpaceTimeField, spec: XsbSpec) -> Dict[str, float]:
    coeffs = f.spectrum()
    return {
        "plain": _norm_from_spectrum(f, coeffs, spec.s, spec.b, spec.E, False),
        "energy_normalized": _norm_from_spectrum(f, coeffs, spec.s, spec.b, spec.E, True),
    }


# ============================================================================
# Bilinear estimate
# ============================================================================

def _pad_axis(coeffs: np.ndarray, axis: int) -> np.ndarray:
    n = coeffs.shape[axis]
    shifted = np.fft.fftshift(coeffs, axes=axis)
    widths = [(0, 0)] * coeffs.ndim
    widths[axis] = (n // 2, n // 2)
    return np.fft.ifftshift(np.pad(shifted, widths), axes=axis)


def refine(f: SpaceTimeField) -> SpaceTimeField:
    """Trigonometric interpolation onto the 2× finer space-time grid."""
    coeffs = f.spectrum()
    for axis in range(3):
        coeffs = _pad_axis(coeffs, axis)
    grid = f.grid
    fine = GridSpec(2 * grid.nx, 2 * grid.ny, grid.Lx, grid.Ly, grid.dealias, grid.workers)
    values = sfft.ifftn(8.0 * coeffs, workers=grid.workers)
    return SpaceTimeField(fine, f.T, values, f.window)


def dz_product(v: SpaceTimeField, w: SpaceTimeField) -> SpaceTimeField:
    """∂_z(v·w) on the refined grid, where the product is alias-free."""
    if v.grid != w.grid or v.T != w.T or v.nt != w.nt:
        raise PreconditionError("bilinear inputs must share the space-time box")
    vf, wf = refine(v), refine(w)
    kx, ky = vf.grid.wavenumbers()
    dz = 0.5 * (1j * kx + ky)
    coeffs = sfft.fft2(vf.values * wf.values, axes=(1, 2), workers=vf.grid.workers)
    values = sfft.ifft2(dz[None] * coeffs, axes=(1, 2), workers=vf.grid.workers)
    return SpaceTimeField(vf.grid, vf.T, values, v.window)


def bilinear_ratio(v: SpaceTimeField, w: SpaceTimeField, spec: XsbSpec,
                   normalized: bool = False) -> float:
    """‖∂_z(vw)‖_{X^{s,−1/2−2ε}} / (‖v‖_{X^{s,1/2+ε}}·‖w‖_{X^{s,1/2+ε}})."""
    if not spec.s > 0.5:
        raise PreconditionError(f"bilinear estimate needs s > 1/2, got {spec.s!r}")
    b_in = 0.5 + spec.eps
    b_out = -0.5 - 2.0 * spec.eps
    den = (_norm_from_spectrum(v, v.spectrum(), spec.s, b_in, spec.E, normalized)
           * _norm_from_spectrum(w, w.spectrum(), spec.s, b_in, spec.E, normalized))
    if not den > 0:
        raise PreconditionError("bilinear ratio undefined: an input has zero X^{s,b} norm")
    product = dz_product(v, w)
    num = _norm_from_spectrum(product, product.spectrum(), spec.s, b_out, spec.E, normalized)
    return num / den


def random_smooth_sample(grid: GridSpec, nt: int, T: float, E: float, rng: np.random.Generator,
                         modes: int = 6, band: int = 3, kind: str = "bump") -> SpaceTimeField:
    """Windowed sum of a few near-free waves with low integer wave indices.

    The sample is a fixed continuum function, so the same rng state gives the
    same function on any finer grid of the same box.
    """
    kx0 = 2.0 * np.pi / grid.Lx
    ky0 = 2.0 * np.pi / grid.Ly
    X, Y = grid.mesh()
    t = T * np.arange(nt) / nt
    total = np.zeros((nt,) + grid.shape, dtype=complex)
    for _ in range(modes):
        mx, my = rng.integers(-band, band + 1, size=2)
        amp = rng.normal() + 1j * rng.normal()
        k1, k2 = mx * kx0, my * ky0
        detune = rng.normal()
        tau = float(symbol_array(k1, k2, E)) + detune
        total += amp * np.exp(1j * (k1 * X + k2 * Y))[None] * np.exp(-1j * tau * t)[:, None, None]
    return SpaceTimeField.from_samples(grid, T, total, kind)


def _sample_pair(grid: GridSpec, nt: int, T: float, E: float, seed: int, sample_id: int):
    rng = np.random.default_rng([seed, sample_id])
    v = random_smooth_sample(grid, nt, T, E, rng)
    w = random_smooth_sample(grid, nt, T, E, rng)
    return v, w


def bilinear_probe(spec: XsbSpec, grid: GridSpec, nt: int, T: float, samples: int = 20,
                   seed: int = 0, workers: int = 1) -> List[dict]:
    """Ratios on seeded random samples, each also evaluated on the doubled grid.

    Rows: sample_id, s, eps, E, ratio, ratio_fine, drift, grid.
    """
    fine = GridSpec(2 * grid.nx, 2 * grid.ny, grid.Lx, grid.Ly, grid.dealias, grid.workers)

    def run(sample_id: int) -> dict:
        v, w = _sample_pair(grid, nt, T, spec.E, seed, sample_id)
        vf, wf = _sample_pair(fine, 2 * nt, T, spec.E, seed, sample_id)
        ratio = bilinear_ratio(v, w, spec)
        ratio_fine = bilinear_ratio(vf, wf, spec)
        return {"sample_id": sample_id, "s": spec.s, "eps": spec.eps, "E": spec.E,
                "ratio": ratio, "ratio_fine": ratio_fine,
                "drift": abs(ratio_fine - ratio) / ratio,
                "grid": f"{nt}x{grid.nx}x{grid.ny}"}

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(run, range(samples)))


def rescale(f: SpaceTimeField, lam: float) -> SpaceTimeField:
    """u_λ(t, x) = λ²u(λ³t, λx) as samples on the shrunken box."""
    return SpaceTimeField(f.grid.scaled(lam), f.T / lam ** 3, lam ** 2 * f.values, f.window)


def bilinear_energy_trend(E_values: Sequence[float], s: float, eps: float, grid: GridSpec,
                          nt: int, T: float, seed: int = 0) -> List[dict]:
    """Ratio of one profile pair rescaled from E = −1 to each E, next to |E|^{(3−4s)/8}."""
    v, w = _sample_pair(grid, nt, T, -1.0, seed, 0)
    rows = []
    for E in E_values:
        if not E < 0:
            raise PreconditionError(f"energy trend needs E < 0, got {E!r}")
        lam = math.sqrt(abs(E))
        ratio = bilinear_ratio(rescale(v, lam), rescale(w, lam), XsbSpec(s, 0.0, eps, E))
        envelope = abs(E) ** ((3.0 - 4.0 * s) / 8.0)
        rows.append({"E": float(E), "ratio": ratio, "envelope": envelope,
                     "ratio_over_envelope": ratio / envelope})
    return rows


# ============================================================================
# Resonance region
# ============================================================================

@dataclass
class ResonanceReport:
    """Monte-Carlo view of the near-resonant set in the low-high regime.

    Attributes:
        measure: largest sampled measure of {ξ : |σ̌ + H[ξ, ξ̌]| ≤ |E|^{3/2}(L ∨ Ľ)}
        bound_shape: |E|·N·Ň^{−2}·(L ∨ Ľ)
        min_derivative_ratio: min over samples of max(|∂ξ1 H|, |∂ξ2 H|)/(|E|Ň²)
        flagged: min_derivative_ratio below the 0.1 watch threshold
    """
    N: int
    Nhat: int
    L: int
    Lhat: int
    E: float
    samples: int
    trials: int
    measure: float
    bound_shape: float
    min_derivative_ratio: float
    flagged: bool

    @property
    def measure_ratio(self) -> float:
        return self.measure / self.bound_shape

    def to_record(self) -> dict:
        return {"N": self.N, "Nhat": self.Nhat, "L": self.L, "Lhat": self.Lhat, "E": self.E,
                "samples": self.samples, "trials": self.trials, "measure": self.measure,
                "bound_shape": self.bound_shape, "measure_ratio": self.measure_ratio,
                "min_derivative_ratio": self.min_derivative_ratio, "flagged": self.flagged}


def _annulus(rng: np.random.Generator, n: int, r_in: float, r_out: float) -> np.ndarray:
    """Uniform samples of r_in ≤ |ξ| ≤ r_out as (n, 2)."""
    r = np.sqrt(rng.uniform(r_in * r_in, r_out * r_out, size=n))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)


def _shell_radii(N: int, E: float):
    scale = math.sqrt(abs(E))
    inner = 0.0 if N == 1 else 0.25 * N * scale
    return inner, N * scale


def resonance_region_probe(N: int, Nhat: int, L: int, Lhat: int, E: float = -1.0,
                           samples: int = 200000, trials: int = 8, seed: int = 0,
                           watch_threshold: float = 0.1) -> ResonanceReport:
    """Sample the near-resonant set for fixed ξ̌ at the top of its shell.

    For each trial ξ̌ is drawn on |ξ̌| = |E|^{1/2}Ň and σ̌ is set to −H at a
    random point of the low shell, so the level set crosses the sampled region.
    """
    for value in (N, Nhat, L, Lhat):
        _check_dyadic(value)
    if Nhat < 4 * N:
        raise PreconditionError(f"low-high regime needs Nhat >= 4N, got N={N}, Nhat={Nhat}")
    if not E < 0:
        raise PreconditionError(f"resonance probe requires E < 0, got {E!r}")
    if samples < 1 or trials < 1:
        raise PreconditionError("samples and trials must be positive")
    rng = np.random.default_rng(seed)
    a = abs(E)
    r_in, r_out = _shell_radii(N, E)
    area = np.pi * (r_out ** 2 - r_in ** 2)
    threshold = a ** 1.5 * max(L, Lhat)
    best_measure = 0.0
    min_ratio = math.inf
    for _ in range(trials):
        theta = rng.uniform(0.0, 2.0 * np.pi)
        xh = math.sqrt(a) * Nhat * np.array([math.cos(theta), math.sin(theta)])
        anchor = _annulus(rng, 1, r_in, r_out)[0]
        sigma_hat = -float(resonance_H_array(anchor[0], anchor[1], xh[0], xh[1], E))
        pts = _annulus(rng, samples, r_in, r_out)
        keep = np.hypot(pts[:, 0], pts[:, 1]) > 0
        pts = pts[keep]
        H = resonance_H_array(pts[:, 0], pts[:, 1], xh[0], xh[1], E)
        inside = np.abs(sigma_hat + H) <= threshold
        best_measure = max(best_measure, float(inside.mean()) * area)
        d1 = resonance_dH_array(pts[:, 0], pts[:, 1], xh[0], xh[1], E, axis=1)
        d2 = resonance_dH_array(pts[:, 0], pts[:, 1], xh[0], xh[1], E, axis=2)
        ratio = np.maximum(np.abs(d1), np.abs(d2)) / (a * Nhat * Nhat)
        min_ratio = min(min_ratio, float(ratio.min()))
    return ResonanceReport(N, Nhat, L, Lhat, float(E), samples, trials, best_measure,
                           a * N * max(L, Lhat) / Nhat ** 2, min_ratio, min_ratio < watch_threshold)
