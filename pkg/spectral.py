"""
Real and Fourier field containers and the normalized DFT pair.

The forward transform carries the 1/|N| factor, so coefficient 0 is the mean
and the inverse is a plain trigonometric sum over the grid.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from errors import GridError, HermitianSymmetryError
from grid import GridSpec

HERMITIAN_TOL = 1e-12
IMAGINARY_TOL = 1e-10


def _spatial_axes(grid: GridSpec) -> tuple:
    return tuple(range(1, grid.d + 1))


def _negated(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Array whose entry at k holds the input's entry at -k (mod N)."""
    out = coeffs
    for ax in _spatial_axes(grid):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


@dataclass(frozen=True, eq=False)
class TensorField:
    """Real d-vector field sampled on the grid, data shape (d, N_1, ..., N_d)."""

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        expected = (self.grid.d,) + self.grid.shape
        if data.shape != expected:
            raise GridError(f"field data has shape {data.shape}, expected {expected}")
        if not np.all(np.isfinite(data)):
            raise ValueError("field contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "TensorField":
        return cls(grid, np.zeros((grid.d,) + grid.shape))

    @classmethod
    def constant(cls, grid: GridSpec, value: Sequence[float]) -> "TensorField":
        value = np.asarray(value, dtype=float).reshape((grid.d,) + (1,) * grid.d)
        return cls(grid, np.broadcast_to(value, (grid.d,) + grid.shape))

    @classmethod
    def unit(cls, grid: GridSpec, axis: int) -> "TensorField":
        """Constant field e_axis."""
        value = np.zeros(grid.d)
        value[axis] = 1.0
        return cls.constant(grid, value)

    def _check(self, other: "TensorField"):
        if self.grid != other.grid:
            raise GridError(f"grid mismatch: {self.grid.N} vs {other.grid.N}")

    def __add__(self, other: "TensorField") -> "TensorField":
        self._check(other)
        return TensorField(self.grid, self.data + other.data)

    def __sub__(self, other: "TensorField") -> "TensorField":
        self._check(other)
        return TensorField(self.grid, self.data - other.data)

    def __mul__(self, scalar: float) -> "TensorField":
        return TensorField(self.grid, self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "TensorField":
        return TensorField(self.grid, -self.data)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients on Z^d_N; ``hermitian`` is validated, not assumed.

    ``scale`` is the magnitude the defect is measured against. It defaults to
    the largest coefficient; spectra derived from another one (a projection
    whose exact value is zero, say) pass the magnitude of their source.
    """

    grid: GridSpec
    coeffs: np.ndarray
    hermitian: bool = True
    scale: Optional[float] = field(default=None, repr=False)

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex)
        expected = (self.grid.d,) + self.grid.shape
        if coeffs.shape != expected:
            raise GridError(f"spectrum has shape {coeffs.shape}, expected {expected}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        if self.hermitian:
            defect = hermitian_defect(self)
            if defect > HERMITIAN_TOL:
                raise HermitianSymmetryError(f"spectrum flagged Hermitian has relative defect {defect:.3e}")


def hermitian_defect(s: SpectralField) -> float:
    """max |c(k) - conj(c(-k))| over indices whose negation is in the set, relative."""
    coeffs = np.asarray(s.coeffs)
    scale = max(np.max(np.abs(coeffs)) if coeffs.size else 0.0, s.scale or 0.0)
    if scale == 0.0:
        return 0.0
    diff = np.abs(coeffs - np.conj(_negated(coeffs, s.grid)))
    diff[:, s.grid.nyquist_mask] = 0.0
    return float(np.max(diff) / scale)


def forward_dft(f: TensorField) -> SpectralField:
    coeffs = np.fft.fftn(f.data, axes=_spatial_axes(f.grid)) / f.grid.size
    return SpectralField(f.grid, coeffs, hermitian=True)


def inverse_dft(s: SpectralField, scale: Optional[float] = None) -> TensorField:
    """Grid values of the trigonometric sum; ``scale`` bounds the residue test from below."""
    values = np.fft.ifftn(s.coeffs, axes=_spatial_axes(s.grid)) * s.grid.size
    return _real_part(s.grid, values, scale)


def _real_part(grid: GridSpec, values: np.ndarray, scale: Optional[float] = None) -> TensorField:
    scale = max(np.linalg.norm(values), scale or 0.0)
    residue = np.linalg.norm(values.imag)
    if scale > 0 and residue > IMAGINARY_TOL * scale:
        raise HermitianSymmetryError(
            f"imaginary residue {residue / scale:.3e} (relative) after inverse transform"
        )
    return TensorField(grid, values.real)


def inner_product(u: TensorField, v: TensorField) -> float:
    """(1/|N|) sum_k <u^k, v^k>."""
    if u.grid != v.grid:
        raise GridError(f"grid mismatch: {u.grid.N} vs {v.grid.N}")
    return float(np.vdot(u.data, v.data).real / u.grid.size)


def norm(u: TensorField) -> float:
    return float(np.sqrt(max(inner_product(u, u), 0.0)))


def spectral_inner_product(a: SpectralField, b: SpectralField) -> float:
    """Parseval pairing sum_k <a(k), conj b(k)>, equal to inner_product of the fields."""
    if a.grid != b.grid:
        raise GridError(f"grid mismatch: {a.grid.N} vs {b.grid.N}")
    return float(np.vdot(b.coeffs, a.coeffs).real)


def mean(u: TensorField) -> np.ndarray:
    return u.data.reshape(u.grid.d, -1).mean(axis=1)


def interpolate_to_grid(u: TensorField, M: GridSpec) -> TensorField:
    """Exact trigonometric interpolation of an N-grid field onto a finer M-grid."""
    g = u.grid
    if M.d != g.d or M.Y != g.Y:
        raise GridError(f"target grid {M.N} on cell {M.Y} incompatible with {g.N} on {g.Y}")
    if any(m < n for m, n in zip(M.N, g.N)):
        raise GridError(f"target grid {M.N} is smaller than source grid {g.N}")
    spectrum = forward_dft(u).coeffs
    if not g.is_odd:
        scale = np.linalg.norm(spectrum)
        nyquist = np.linalg.norm(spectrum[:, g.nyquist_mask])
        if scale > 0 and nyquist > IMAGINARY_TOL * scale:
            raise GridError("source field has Nyquist content and no unique trigonometric interpolant")
    src, dst = [], []
    for a in range(g.d):
        k = g.axis_indices(a)
        keep = np.flatnonzero(2 * k != -g.N[a])
        src.append(keep)
        dst.append(np.mod(k[keep], M.N[a]))
    padded = np.zeros((M.d,) + M.shape, dtype=complex)
    padded[(slice(None),) + np.ix_(*dst)] = spectrum[(slice(None),) + np.ix_(*src)]
    return inverse_dft(SpectralField(M, padded, hermitian=True))
