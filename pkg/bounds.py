"""
Guaranteed upper-lower bounds on the homogenized matrix.

Conforming GaNi minimizers are trigonometric polynomials, so the exact
energies a(u_N, v_N) are evaluated without integration error on the
(2N-1)-grid, where the product u_N v_N is fully resolved.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import ConformityError, GridError, MaterialError
from grid import GridSpec, full_index_set
from material import Material, material_fourier, synthesize_blocks
from projections import Subspace, conformity_defect
from solver import AuxiliarySolution, Formulation
from spectral import TensorField, forward_dft, inner_product, interpolate_to_grid

logger = logging.getLogger(__name__)

CONFORMITY_TOL = 1e-10
LOEWNER_TOL = 1e-9
SYMMETRY_TOL = 1e-12
DENSE_MAX_POINTS = 512


@dataclass
class DoubleGridBlocks:
    """Coefficient blocks A_{2N-1} at the points of the (2N-1)-grid."""

    grid: GridSpec
    source_grid: GridSpec
    blocks: np.ndarray
    spd_violations: int = 0

    def apply(self, u: TensorField) -> TensorField:
        return TensorField(u.grid, np.einsum("ab...,b...->a...", self.blocks, u.data))


def double_grid_blocks(spec: Material, g: GridSpec) -> DoubleGridBlocks:
    """Inverse DFT over Z_{2N-1} of the truncated Fourier coefficients of A."""
    if not g.is_odd:
        raise GridError(f"bounds are evaluated on odd grids only, got N={g.N}")
    if tuple(spec.Y) != g.Y:
        raise MaterialError(f"material cell {spec.Y} differs from grid cell {g.Y}")
    M = g.double_grid()
    blocks = synthesize_blocks(spec, M)
    blocks = 0.5 * (blocks + np.swapaxes(blocks, 0, 1))
    flat = np.moveaxis(blocks.reshape(g.d, g.d, -1), -1, 0)
    violations = int(np.count_nonzero(np.linalg.eigvalsh(flat).min(axis=1) <= 0.0))
    if violations:
        # the quadrature stays exact; only pointwise positivity is lost
        logger.warning("%d of %d double-grid blocks on M=%s are not positive definite", violations, M.size, M.N)
    return DoubleGridBlocks(M, g, blocks, violations)


def _check_source(blocks: DoubleGridBlocks, *fields: TensorField):
    for f in fields:
        if f.grid != blocks.source_grid:
            raise GridError(f"field on N={f.grid.N} but blocks were built for N={blocks.source_grid.N}")


def exact_bilinear(blocks: DoubleGridBlocks, u: TensorField, v: TensorField) -> float:
    """<A u_N, v_N>_{L2} for trigonometric u_N, v_N, without integration error."""
    _check_source(blocks, u, v)
    u_fine = interpolate_to_grid(u, blocks.grid)
    v_fine = interpolate_to_grid(v, blocks.grid)
    return inner_product(blocks.apply(u_fine), v_fine)


def full_matrix_bilinear(
    spec: Material, u: TensorField, v: TensorField, max_points: int = DENSE_MAX_POINTS
) -> float:
    """Dense Galerkin oracle sum_{k,l} conj(v-hat(l)) A-hat(l - k) u-hat(k)."""
    g = u.grid
    if v.grid != g:
        raise GridError(f"grid mismatch: {u.grid.N} vs {v.grid.N}")
    if not g.is_odd:
        raise GridError(f"dense oracle needs an odd grid, got N={g.N}")
    if g.size > max_points:
        raise GridError(f"grid N={g.N} too large for dense assembly (limit {max_points} points)")
    idx = full_index_set(g)
    m = np.moveaxis(idx[:, None, :] - idx[None, :, :], -1, 0)
    A_full = sum(
        matrix[:, :, None, None] * coeff[None, None] for matrix, coeff in spec.fourier_terms(m)
    )
    u_hat = forward_dft(u).coeffs.reshape(g.d, -1)
    v_hat = forward_dft(v).coeffs.reshape(g.d, -1)
    return float(np.einsum("al,ablk,bk->", np.conj(v_hat), A_full, u_hat).real)


@dataclass
class BoundPair:
    """A_upper bounds A_H from above; B_bar bounds B_H = A_H^{-1} from above."""

    A_upper: np.ndarray
    B_bar: np.ndarray
    spd_violations: int = 0

    @property
    def B_lower_inv(self) -> np.ndarray:
        return np.linalg.inv(self.B_bar)


def _require_conforming(sols: Sequence[AuxiliarySolution], subspace: Subspace, tol: float):
    for sol in sols:
        off, nyquist = conformity_defect(sol.minimizer, subspace)
        if nyquist > tol:
            raise ConformityError(
                f"{sol.formulation.value} minimizer {sol.direction} has Nyquist content {nyquist:.3e}"
            )
        if off > tol:
            raise ConformityError(
                f"{sol.formulation.value} minimizer {sol.direction} lies {off:.3e} off its subspace"
            )


def _energy_matrix(blocks: DoubleGridBlocks, sols: Sequence[AuxiliarySolution]) -> np.ndarray:
    ordered = sorted(sols, key=lambda s: s.direction)
    _check_source(blocks, *(s.minimizer for s in ordered))
    fine = [interpolate_to_grid(s.total_field(), blocks.grid) for s in ordered]
    fluxes = [blocks.apply(f) for f in fine]
    d = len(fine)
    matrix = np.array([[inner_product(fluxes[b], fine[a]) for b in range(d)] for a in range(d)])
    return 0.5 * (matrix + matrix.T)


def evaluate_bounds(
    spec: Material,
    primal_sols: Sequence[AuxiliarySolution],
    dual_sols: Sequence[AuxiliarySolution],
    conformity_tol: float = CONFORMITY_TOL,
) -> BoundPair:
    """Exact energies of conforming minimizers: A_upper from A, B_bar from A^{-1}."""
    if not primal_sols or not dual_sols:
        raise ValueError("bounds need primal and dual minimizers")
    if any(s.formulation is not Formulation.PRIMAL for s in primal_sols):
        raise ValueError("primal_sols must hold primal minimizers")
    if any(s.formulation is not Formulation.DUAL for s in dual_sols):
        raise ValueError("dual_sols must hold dual minimizers")
    g = primal_sols[0].minimizer.grid
    _require_conforming(primal_sols, Subspace.E, conformity_tol)
    _require_conforming(dual_sols, Subspace.J, conformity_tol)
    blocks_A = double_grid_blocks(spec, g)
    blocks_A_inv = double_grid_blocks(spec.inverse(), g)
    A_upper = _energy_matrix(blocks_A, primal_sols)
    B_bar = _energy_matrix(blocks_A_inv, dual_sols)
    logger.info("bounds on N=%s: A_upper diag %s, B_bar diag %s", g.N, np.diag(A_upper), np.diag(B_bar))
    return BoundPair(A_upper, B_bar, blocks_A.spd_violations + blocks_A_inv.spd_violations)


@dataclass
class BoundsSummary:
    A_upper: np.ndarray
    B_lower_inv: np.ndarray
    mean: np.ndarray
    D: np.ndarray
    component_intervals: np.ndarray


def bounds_summary(A_upper: np.ndarray, B_bar: np.ndarray) -> BoundsSummary:
    """Mean of the bounds, guaranteed error D and componentwise intervals."""
    A_upper = np.asarray(A_upper, dtype=float)
    lower = np.linalg.inv(np.asarray(B_bar, dtype=float))
    mean = (A_upper + lower) / 2
    D = (A_upper - lower) / 2
    d = A_upper.shape[0]
    intervals = np.empty((d, d, 2))
    for a in range(d):
        for b in range(d):
            if a == b:
                intervals[a, b] = (lower[a, a], A_upper[a, a])
            else:
                radius = D[a, a] + D[b, b]
                intervals[a, b] = (mean[a, b] - radius, mean[a, b] + radius)
    return BoundsSummary(A_upper, lower, mean, D, intervals)


def voigt_reuss(spec: Material) -> Tuple[np.ndarray, np.ndarray]:
    """Arithmetic mean <A> and harmonic mean <A^{-1}>^{-1}."""
    zero = [0] * spec.d
    voigt = material_fourier(spec, zero).real
    reuss = np.linalg.inv(material_fourier(spec.inverse(), zero).real)
    return voigt, reuss


def loewner_leq(L: np.ndarray, M: np.ndarray, tol: float = LOEWNER_TOL) -> bool:
    """L <= M in the Loewner order, i.e. M - L is positive semidefinite up to tol."""
    L = np.asarray(L, dtype=float)
    M = np.asarray(M, dtype=float)
    for name, X in (("L", L), ("M", M)):
        if np.max(np.abs(X - X.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(X))):
            raise ValueError(f"{name} is not symmetric")
    return bool(np.linalg.eigvalsh(M - L).min() >= -tol)


def gap_eigenvalues(A_gani: np.ndarray, B_gani_inv: np.ndarray) -> np.ndarray:
    """Eigenvalues of A_H,N - B_H,N^{-1}; zero on odd grids, non-negative on even ones."""
    gap = np.asarray(A_gani) - np.asarray(B_gani_inv)
    return np.linalg.eigvalsh(0.5 * (gap + gap.T))


def _tolist(value):
    """JSON-ready copy: arrays to nested lists, numpy scalars to Python ones."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {k: _tolist(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_tolist(v) for v in value]
    return value


def _toarray(value):
    return None if value is None else np.asarray(value, dtype=float)


@dataclass
class BoundsReport:
    """Result of one grid of an experiment; matrix fields stay None when not computed."""

    name: str
    grid: Dict[str, Any]
    status: str = "ok"
    error: Optional[str] = None
    A_gani: Optional[np.ndarray] = None
    B_gani_inv: Optional[np.ndarray] = None
    A_upper: Optional[np.ndarray] = None
    B_lower_inv: Optional[np.ndarray] = None
    mean: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    component_intervals: Optional[np.ndarray] = None
    voigt: Optional[np.ndarray] = None
    reuss: Optional[np.ndarray] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    config_hash: str = ""

    MATRIX_FIELDS = ("A_gani", "B_gani_inv", "A_upper", "B_lower_inv", "mean", "D",
                     "component_intervals", "voigt", "reuss")

    def apply_summary(self, summary: BoundsSummary):
        self.A_upper = summary.A_upper
        self.B_lower_inv = summary.B_lower_inv
        self.mean = summary.mean
        self.D = summary.D
        self.component_intervals = summary.component_intervals

    def sandwich_checks(self, tol: float = LOEWNER_TOL) -> Dict[str, bool]:
        """Reuss <= B_lower_inv <= A_upper <= Voigt, for whatever is present."""
        chain = [("reuss", self.reuss), ("B_lower_inv", self.B_lower_inv),
                 ("A_upper", self.A_upper), ("voigt", self.voigt)]
        present = [(n, m) for n, m in chain if m is not None]
        return {
            f"{lo}<={hi}": loewner_leq(a, b, tol)
            for (lo, a), (hi, b) in zip(present, present[1:])
        }

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key in self.MATRIX_FIELDS:
            data[key] = _tolist(data[key])
        data["diagnostics"] = _tolist(self.diagnostics)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BoundsReport":
        data = dict(data)
        for key in cls.MATRIX_FIELDS:
            data[key] = _toarray(data.get(key))
        return cls(**data)


def gani_gap_summary(A_gani: np.ndarray, B_gani_inv: np.ndarray) -> Dict[str, Any]:
    eig = gap_eigenvalues(A_gani, B_gani_inv)
    return {
        "gap_eigenvalues": eig.tolist(),
        "gap_min_eigenvalue": float(eig.min()),
        "gap_frobenius": float(np.linalg.norm(np.asarray(A_gani) - np.asarray(B_gani_inv))),
    }


def iteration_counts(sols: List[AuxiliarySolution]) -> List[int]:
    return [s.iterations for s in sorted(sols, key=lambda s: s.direction)]
