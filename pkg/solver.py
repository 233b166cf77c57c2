"""
Matrix-free GaNi solver.

The primal corrector e in E_N solves G^E_{N,0} A_N (E + e) = 0 and the dual
corrector j in J_N solves G^J_{N,0} A_N^{-1} (J + j) = 0. Both systems are
symmetric on their subspace and are solved by scipy conjugate gradients
started from zero, so every iterate stays in the subspace.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from errors import ConvergenceError, GridError, SolverError
from material import MaterialGrid
from projections import (
    DUAL_PROJECTION,
    PRIMAL_PROJECTION,
    NyquistVariant,
    ProjectionKind,
    Subspace,
    apply_projection,
)
from spectral import TensorField, inner_product, norm

logger = logging.getLogger(__name__)


class Formulation(str, Enum):
    PRIMAL = "primal"
    DUAL = "dual"


@dataclass(frozen=True)
class SolveSettings:
    tol: float = 1e-8
    max_iter: int = 1000
    record_history: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class CGResult:
    x: TensorField
    history: List[float]
    iterations: int
    converged: bool


@dataclass
class AuxiliarySolution:
    """Discrete minimizer e^(a) or j^(a) for unit loading along ``direction``."""

    direction: int
    formulation: Formulation
    minimizer: TensorField
    residual_history: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    source: str = "cg"
    nonconformity: float = 0.0

    def total_field(self) -> TensorField:
        """Unit loading plus corrector, e_a + e^(a)."""
        return TensorField.unit(self.minimizer.grid, self.direction) + self.minimizer

    def to_dict(self) -> Dict[str, Any]:
        return {
            "direction": self.direction,
            "formulation": self.formulation.value,
            "iterations": self.iterations,
            "converged": self.converged,
            "final_residual": self.residual_history[-1] if self.residual_history else None,
            "source": self.source,
            "nonconformity": self.nonconformity,
        }


@dataclass
class GaNiMatrix:
    matrix: np.ndarray
    asymmetry: float


def projection_for(formulation: Formulation) -> ProjectionKind:
    return PRIMAL_PROJECTION if Formulation(formulation) is Formulation.PRIMAL else DUAL_PROJECTION


def gani_matvec(m: MaterialGrid, pk: ProjectionKind, x: TensorField) -> TensorField:
    """G[A_N x] for the curl-free projection, G[A_N^{-1} x] for the divergence-free one."""
    if m.grid != x.grid:
        raise GridError(f"grid mismatch: material on {m.grid.N}, field on {x.grid.N}")
    y = m.apply_inverse(x) if pk.subspace is Subspace.J else m.apply(x)
    return apply_projection(pk, y)


def conjugate_gradients(
    matvec: Callable[[TensorField], TensorField],
    b: TensorField,
    x0: TensorField,
    settings: SolveSettings,
    reference_norm: float = 1.0,
    callback: Optional[Callable[[int, TensorField], None]] = None,
) -> CGResult:
    """scipy CG on the flattened field; stops when |r_i| <= tol * reference_norm in the grid norm.

    The grid norm carries a 1/sqrt(|N|) weight, so the absolute tolerance
    handed to scipy is scaled by sqrt(|N|). ``history`` holds true residuals
    b - A x_i, recomputed per iterate when ``record_history`` is set.
    """
    g = b.grid
    shape = b.data.shape

    def as_field(v: np.ndarray) -> TensorField:
        return TensorField(g, v.reshape(shape))

    operator = LinearOperator(
        shape=(b.data.size, b.data.size), matvec=lambda v: matvec(as_field(v)).data.ravel(), dtype=float
    )
    history = [norm(b - matvec(x0))]
    iterations = 0

    def monitor(xk: np.ndarray):
        nonlocal iterations
        iterations += 1
        x = as_field(xk)
        if settings.record_history:
            history.append(norm(b - matvec(x)))
            logger.debug("CG iteration %d residual %.3e", iterations, history[-1])
        if callback is not None:
            callback(iterations, x)

    atol = settings.tol * reference_norm * np.sqrt(g.size)
    solution, info = cg(
        operator,
        np.array(b.data).ravel(),
        x0=np.array(x0.data).ravel(),
        rtol=0.0,
        atol=atol,
        maxiter=int(settings.max_iter),
        callback=monitor,
    )
    if info < 0:
        raise SolverError(f"CG rejected its input (info={info})")
    x = as_field(solution)
    if not settings.record_history and iterations > 0:
        history.append(norm(b - matvec(x)))
    return CGResult(x, history, iterations, info == 0)


def solve_auxiliary(
    m: MaterialGrid,
    alpha: int,
    formulation: Formulation,
    settings: SolveSettings,
    callback: Optional[Callable[[int, TensorField], None]] = None,
) -> AuxiliarySolution:
    """Corrector for unit loading e_alpha; raises ConvergenceError carrying the best iterate."""
    formulation = Formulation(formulation)
    if not 0 <= alpha < m.grid.d:
        raise SolverError(f"direction {alpha} outside 0..{m.grid.d - 1}")
    pk = projection_for(formulation)
    matvec = partial(gani_matvec, m, pk)
    loading = TensorField.unit(m.grid, alpha)
    b = -matvec(loading)
    result = conjugate_gradients(matvec, b, TensorField.zeros(m.grid), settings, 1.0, callback)
    solution = AuxiliarySolution(
        direction=alpha,
        formulation=formulation,
        minimizer=result.x,
        residual_history=result.history,
        iterations=result.iterations,
        converged=result.converged,
    )
    if not result.converged:
        raise ConvergenceError(
            f"{formulation.value} CG for direction {alpha} on N={m.grid.N} stopped after "
            f"{result.iterations} iterations (residual {result.history[-1]:.3e})",
            solution=solution,
        )
    logger.info(
        "%s direction %d on N=%s: %d iterations, residual %.3e",
        formulation.value, alpha, m.grid.N, result.iterations, result.history[-1],
    )
    return solution


def solve_all_directions(
    m: MaterialGrid,
    formulation: Formulation,
    settings: SolveSettings,
    threads: int = 1,
    strict: bool = True,
) -> List[AuxiliarySolution]:
    """The d auxiliary problems of one formulation, run concurrently up to ``threads``.

    With ``strict=False`` a non-converged solve keeps its best iterate.
    """

    def run(alpha: int) -> AuxiliarySolution:
        try:
            return solve_auxiliary(m, alpha, formulation, settings)
        except ConvergenceError as exc:
            if strict:
                raise
            logger.warning("%s; keeping the last iterate", exc)
            return exc.solution

    workers = max(1, min(int(threads), m.grid.d))
    if workers == 1:
        return [run(alpha) for alpha in range(m.grid.d)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(m.grid.d)))


def _ordered(sols: Sequence[AuxiliarySolution], d: int, formulation: Formulation) -> List[AuxiliarySolution]:
    by_direction = {}
    for sol in sols:
        if sol.formulation is not formulation:
            raise SolverError(f"expected {formulation.value} solutions, got {sol.formulation.value}")
        by_direction[sol.direction] = sol
    missing = [a for a in range(d) if a not in by_direction]
    if missing:
        raise SolverError(f"missing {formulation.value} solutions for directions {missing}")
    return [by_direction[a] for a in range(d)]


def gani_homogenized(m: MaterialGrid, sols: Sequence[AuxiliarySolution], formulation: Formulation) -> GaNiMatrix:
    """A_H,N (primal) or B_H,N (dual) from the discrete energies, symmetrized."""
    formulation = Formulation(formulation)
    d = m.grid.d
    totals = [sol.total_field() for sol in _ordered(sols, d, formulation)]
    apply = m.apply if formulation is Formulation.PRIMAL else m.apply_inverse
    fluxes = [apply(t) for t in totals]
    matrix = np.array([[inner_product(fluxes[b], totals[a]) for b in range(d)] for a in range(d)])
    asymmetry = float(np.max(np.abs(matrix - matrix.T)))
    return GaNiMatrix(0.5 * (matrix + matrix.T), asymmetry)


def reconstruct_dual(
    primal_sols: Sequence[AuxiliarySolution],
    m: MaterialGrid,
    A_H: np.ndarray,
) -> List[AuxiliarySolution]:
    """Dual correctors from primal ones on odd grids.

    e_b + j^(b) = A_N sum_a E_a (e_a + e^(a)) with E = A_H^{-1} e_b, followed
    by the divergence-free projection to remove the non-conformity left by
    inexact primal solves.
    """
    g = m.grid
    if not g.is_odd:
        raise GridError(f"dual reconstruction needs an odd grid, got N={g.N}")
    A_H = np.asarray(A_H, dtype=float)
    cond = np.linalg.cond(A_H) if np.all(np.isfinite(A_H)) else np.inf
    if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
        raise SolverError("homogenized matrix is singular; cannot reconstruct dual fields")
    totals = [sol.total_field() for sol in _ordered(primal_sols, g.d, Formulation.PRIMAL)]
    E = np.linalg.inv(A_H)
    duals = []
    for beta in range(g.d):
        combined = TensorField(g, sum(E[a, beta] * totals[a].data for a in range(g.d)))
        candidate = m.apply(combined) - TensorField.unit(g, beta)
        corrector = apply_projection(DUAL_PROJECTION, candidate)
        scale = norm(candidate)
        nonconformity = norm(candidate - corrector) / scale if scale > 0 else 0.0
        residual = norm(gani_matvec(m, DUAL_PROJECTION, TensorField.unit(g, beta) + corrector))
        logger.info(
            "reconstructed dual direction %d on N=%s: non-conformity %.3e, residual %.3e",
            beta, g.N, nonconformity, residual,
        )
        duals.append(
            AuxiliarySolution(
                direction=beta,
                formulation=Formulation.DUAL,
                minimizer=corrector,
                residual_history=[residual],
                source="reconstructed",
                nonconformity=nonconformity,
            )
        )
    return duals


def divergence_residual(m: MaterialGrid, sol: AuxiliarySolution) -> float:
    """Classical equilibrium check |G_{N,I}[flux]| with Nyquist content kept.

    For the primal field the flux A_N(e_a + e^(a)) should be divergence-free;
    for the dual field A_N^{-1}(e_a + j^(a)) should be curl-free.
    """
    total = sol.total_field()
    if sol.formulation is Formulation.PRIMAL:
        flux = m.apply(total)
        pk = ProjectionKind(Subspace.E, NyquistVariant.IDENTITY)
    else:
        flux = m.apply_inverse(total)
        pk = ProjectionKind(Subspace.J, NyquistVariant.IDENTITY)
    return norm(apply_projection(pk, flux))


def gani_energy(m: MaterialGrid, formulation: Formulation, alpha: int, corrector: TensorField) -> float:
    """Discrete quadratic objective <A_N(E + x), E + x> (A_N^{-1} for the dual)."""
    total = TensorField.unit(m.grid, alpha) + corrector
    apply = m.apply if Formulation(formulation) is Formulation.PRIMAL else m.apply_inverse
    return inner_product(apply(total), total)
