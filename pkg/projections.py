"""
Helmholtz projections as Fourier multipliers.

G_U keeps the mean, G_E the zero-mean curl-free part and G_J the zero-mean
divergence-free part. On even grids the Nyquist indices get either a zero or
an identity block, giving the two families G_{N,0} and G_{N,I}.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from grid import GridSpec
from spectral import SpectralField, TensorField, forward_dft, inverse_dft, norm

logger = logging.getLogger(__name__)


class Subspace(str, Enum):
    U = "U"
    E = "E"
    J = "J"


class NyquistVariant(str, Enum):
    ZERO = "zero"
    IDENTITY = "identity"


@dataclass(frozen=True)
class ProjectionKind:
    subspace: Subspace
    nyquist_variant: NyquistVariant = NyquistVariant.ZERO

    def __post_init__(self):
        object.__setattr__(self, "subspace", Subspace(self.subspace))
        object.__setattr__(self, "nyquist_variant", NyquistVariant(self.nyquist_variant))


PRIMAL_PROJECTION = ProjectionKind(Subspace.E, NyquistVariant.ZERO)
DUAL_PROJECTION = ProjectionKind(Subspace.J, NyquistVariant.ZERO)


def gamma_hat(subspace: Subspace, k: Sequence[int], Y: Sequence[float]) -> np.ndarray:
    """Continuous projection coefficient at frequency k."""
    subspace = Subspace(subspace)
    d = len(Y)
    k = np.asarray(k)
    eye = np.eye(d)
    if subspace is Subspace.U:
        return eye.copy() if not np.any(k) else np.zeros((d, d))
    if not np.any(k):
        return np.zeros((d, d))
    xi = k / np.asarray(Y, dtype=float)
    curl_free = np.outer(xi, xi) / xi.dot(xi)
    return curl_free if subspace is Subspace.E else eye - curl_free


def discrete_multiplier(pk: ProjectionKind, g: GridSpec, k: Sequence[int]) -> np.ndarray:
    """Fully discrete multiplier block at a member k of the full index set."""
    g.offset(k)
    k = np.asarray(k)
    if pk.subspace is not Subspace.U and np.any(2 * k == -np.array(g.N)):
        if pk.nyquist_variant is NyquistVariant.IDENTITY:
            return np.eye(g.d)
        return np.zeros((g.d, g.d))
    return gamma_hat(pk.subspace, k, g.Y)


@lru_cache(maxsize=32)
def _geometry(g: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """xi(k) and 1/|xi(k)|^2 (0 at k=0) on the grid."""
    xi = g.frequencies()
    norm2 = np.sum(xi * xi, axis=0)
    inv = np.zeros_like(norm2)
    np.divide(1.0, norm2, out=inv, where=norm2 > 0)
    xi.setflags(write=False)
    inv.setflags(write=False)
    return xi, inv


def project_spectrum(pk: ProjectionKind, coeffs: np.ndarray, g: GridSpec) -> np.ndarray:
    """Multiply each coefficient vector by its multiplier block."""
    d = g.d
    zero = (slice(None),) + (0,) * d
    if pk.subspace is Subspace.U:
        out = np.zeros_like(coeffs)
        out[zero] = coeffs[zero]
        return out
    xi, inv = _geometry(g)
    curl_free = xi * (np.sum(xi * coeffs, axis=0) * inv)
    out = curl_free if pk.subspace is Subspace.E else coeffs - curl_free
    out[zero] = 0.0
    if not g.is_odd:
        nyquist = g.nyquist_mask
        out[:, nyquist] = coeffs[:, nyquist] if pk.nyquist_variant is NyquistVariant.IDENTITY else 0.0
    return out


def apply_projection(pk: ProjectionKind, f: TensorField) -> TensorField:
    spectrum = forward_dft(f)
    projected = project_spectrum(pk, np.array(spectrum.coeffs), f.grid)
    # symmetry and realness are judged against the input, the output may vanish exactly
    source = float(np.max(np.abs(spectrum.coeffs)))
    return inverse_dft(SpectralField(f.grid, projected, scale=source), scale=float(np.linalg.norm(f.data)))


class HelmholtzSplit(NamedTuple):
    u_part: TensorField
    e_part: TensorField
    j_part: TensorField


def helmholtz_split(f: TensorField, variant: NyquistVariant = NyquistVariant.ZERO) -> HelmholtzSplit:
    """Orthogonal split f = u + e + j.

    ``variant`` names the Nyquist treatment of the curl-free part; the
    divergence-free part takes the complementary one so the three sum to f.
    """
    variant = NyquistVariant(variant)
    other = NyquistVariant.IDENTITY if variant is NyquistVariant.ZERO else NyquistVariant.ZERO
    return HelmholtzSplit(
        apply_projection(ProjectionKind(Subspace.U), f),
        apply_projection(ProjectionKind(Subspace.E, variant), f),
        apply_projection(ProjectionKind(Subspace.J, other), f),
    )


def conformity_defect(f: TensorField, subspace: Subspace) -> Tuple[float, float]:
    """(distance from the conforming subspace, Nyquist content), both relative to |f|.

    Conforming means lying in the range of G_{N,0} for E or J: no mean, no
    Nyquist coefficients and nothing outside the continuous subspace.
    """
    scale = norm(f)
    if scale == 0.0:
        return 0.0, 0.0
    off = norm(f - apply_projection(ProjectionKind(subspace, NyquistVariant.ZERO), f)) / scale
    nyquist = 0.0
    if not f.grid.is_odd:
        coeffs = forward_dft(f).coeffs
        nyquist = float(np.sqrt(np.sum(np.abs(coeffs[:, f.grid.nyquist_mask]) ** 2)) / scale)
    return off, nyquist
