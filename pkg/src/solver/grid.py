"""Periodic 2D grids, real/spectral fields and the spectral-tail gate.

Fields are stored with shape (nx, ny), axis 0 along x. Fourier coefficients
use the full complex ``scipy.fft.fft2`` layout with e^{+i k·x} modes, so
∂_x ↔ i·kx and ∂_y ↔ i·ky.
"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import scipy.fft as sfft

from src.utils.error_handler import PreconditionError, ResolutionError


# ============================================================================
# Grid
# ============================================================================

@dataclass(frozen=True)
class GridSpec:
    """Periodic box [−Lx/2, Lx/2) × [−Ly/2, Ly/2) with nx × ny points.

    Attributes:
        nx, ny: point counts (powers of two, at least 8)
        Lx, Ly: side lengths
        dealias: retained fraction of each half-band (2/3 rule by default)
        workers: scipy.fft worker threads; not part of equality
    """
    nx: int
    ny: int
    Lx: float
    Ly: float
    dealias: float = 2.0 / 3.0
    workers: int = field(default=1, compare=False)

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or n < 8 or (int(n) & (int(n) - 1)) != 0:
                raise PreconditionError(f"grid {name} must be a power of two >= 8, got {n!r}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise PreconditionError(f"box sides must be positive, got Lx={self.Lx!r}, Ly={self.Ly!r}")
        if not 0 < self.dealias <= 1:
            raise PreconditionError(f"dealias fraction must be in (0, 1], got {self.dealias!r}")
        if self.workers < 1:
            raise PreconditionError(f"workers must be >= 1, got {self.workers!r}")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def x(self) -> np.ndarray:
        return -0.5 * self.Lx + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return -0.5 * self.Ly + self.dy * np.arange(self.ny)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def mode_indices(self) -> Tuple[np.ndarray, np.ndarray]:
        """Integer wave indices (mx, my) in fft order, shape (nx, ny)."""
        mx = np.rint(sfft.fftfreq(self.nx) * self.nx).astype(int)
        my = np.rint(sfft.fftfreq(self.ny) * self.ny).astype(int)
        return np.meshgrid(mx, my, indexing="ij")

    def wavenumbers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Physical wavenumbers (kx, ky), shape (nx, ny)."""
        kx = 2.0 * np.pi * sfft.fftfreq(self.nx, d=self.dx)
        ky = 2.0 * np.pi * sfft.fftfreq(self.ny, d=self.dy)
        return np.meshgrid(kx, ky, indexing="ij")

    def nyquist_mask(self) -> np.ndarray:
        """True away from the Nyquist row and column."""
        mx, my = self.mode_indices()
        return (np.abs(mx) != self.nx // 2) & (np.abs(my) != self.ny // 2)

    def dealias_mask(self) -> np.ndarray:
        """Modes kept by the truncation rule: |m| <= dealias·n/2 in each direction."""
        mx, my = self.mode_indices()
        return ((np.abs(mx) <= self.dealias * self.nx / 2)
                & (np.abs(my) <= self.dealias * self.ny / 2)
                & self.nyquist_mask())

    def scaled(self, lam: float) -> "GridSpec":
        """Same point counts on the box shrunk by λ (x → λx)."""
        if not lam > 0:
            raise PreconditionError(f"scaling factor must be positive, got {lam!r}")
        return GridSpec(self.nx, self.ny, self.Lx / lam, self.Ly / lam, self.dealias, self.workers)

    def to_record(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "Lx": self.Lx, "Ly": self.Ly, "dealias": self.dealias}

    # ------------------------------------------------------------------
    # transforms
    # ------------------------------------------------------------------

    def fft(self, values: np.ndarray) -> np.ndarray:
        return sfft.fft2(values, workers=self.workers)

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.ifft2(coeffs, workers=self.workers)

    def derivative(self, values: np.ndarray, ox: int = 0, oy: int = 0) -> np.ndarray:
        """Spectral ∂_x^ox ∂_y^oy of a real field (Nyquist modes dropped)."""
        kx, ky = self.wavenumbers()
        mult = (1j * kx) ** ox * (1j * ky) ** oy * self.nyquist_mask()
        return self.ifft(mult * self.fft(values)).real


# ============================================================================
# Fields
# ============================================================================

def conjugate_reflection(coeffs: np.ndarray) -> np.ndarray:
    """conj(c(−k)) in fft index order."""
    return np.conj(np.roll(np.flip(coeffs, axis=(0, 1)), 1, axis=(0, 1)))


def enforce_hermitian(coeffs: np.ndarray) -> np.ndarray:
    """Project onto spectra of real fields."""
    return 0.5 * (coeffs + conjugate_reflection(coeffs))


def hermitian_residue(coeffs: np.ndarray) -> float:
    """‖c − conj c(−k)‖ / ‖c‖ (0 for the zero spectrum)."""
    norm = np.linalg.norm(coeffs)
    if norm == 0:
        return 0.0
    return float(np.linalg.norm(coeffs - conjugate_reflection(coeffs)) / norm)


@dataclass
class RealField2D:
    """Real samples on a periodic grid."""
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if np.iscomplexobj(self.values):
            raise PreconditionError("RealField2D requires real samples")
        self.values = self.values.astype(float)
        if self.values.shape != self.grid.shape:
            raise PreconditionError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "RealField2D":
        return cls(grid, np.zeros(grid.shape))

    def spectrum(self) -> "SpectralField2D":
        return SpectralField2D(self.grid, self.grid.fft(self.values), hermitian=True)

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)

    def l2_norm(self) -> float:
        return float(np.sqrt((self.values ** 2).sum() * self.grid.cell_area))


@dataclass
class SpectralField2D:
    """Fourier coefficients on a periodic grid; hermitian marks a real field."""
    grid: GridSpec
    coeffs: np.ndarray
    hermitian: bool = True

    def residue(self) -> float:
        return hermitian_residue(self.coeffs)

    def to_real(self, tol: float = 1e-12) -> RealField2D:
        if not self.hermitian:
            raise PreconditionError("only hermitian spectra map to real fields")
        if self.residue() > tol:
            raise PreconditionError(f"spectrum is not hermitian (residue {self.residue():.3e})")
        return RealField2D(self.grid, self.grid.ifft(self.coeffs).real)


# ============================================================================
# Resolution gate
# ============================================================================

def tail_fraction(values: np.ndarray, grid: GridSpec, outer: float = 0.2) -> float:
    """Share of spectral energy in the outer band of the dealiased range or beyond."""
    coeffs = grid.fft(values)
    energy = np.abs(coeffs) ** 2
    total = energy.sum()
    if total == 0:
        return 0.0
    mx, my = grid.mode_indices()
    reach = np.maximum(np.abs(mx) / (grid.dealias * grid.nx / 2),
                       np.abs(my) / (grid.dealias * grid.ny / 2))
    return float(energy[reach > 1.0 - outer].sum() / total)


def resolution_check(field_or_values, grid: GridSpec = None, tol: float = 1e-10) -> float:
    """Raise ResolutionError when the spectral tail exceeds tol; return the tail share."""
    if isinstance(field_or_values, RealField2D):
        grid = field_or_values.grid
        values = field_or_values.values
    else:
        values = np.asarray(field_or_values)
    if grid is None:
        raise PreconditionError("resolution_check needs a grid for raw arrays")
    fraction = tail_fraction(values, grid)
    if not np.isfinite(fraction) or fraction > tol:
        raise ResolutionError(
            f"spectral tail {fraction:.3e} exceeds {tol:.1e}; refine the grid or enlarge the box",
            detail={"tail_fraction": fraction, "tol": tol, "grid": grid.to_record()},
        )
    return fraction
