"""
Exception hierarchy shared by all homobound modules.
"""

from typing import Any, List, Optional


class HomoboundError(Exception):
    """Base class for every error raised by homobound."""


class GridError(HomoboundError, ValueError):
    """Invalid grid, index out of range, grid mismatch or parity violation."""


class HermitianSymmetryError(HomoboundError, ValueError):
    """A spectrum claimed Hermitian is not, or a real field came out complex."""


class MaterialError(HomoboundError, ValueError):
    """Invalid material description or a non-SPD coefficient sample."""


class ConformityError(HomoboundError):
    """A minimizer is not in its conforming subspace."""


class SolverError(HomoboundError, ValueError):
    """Solver misuse: missing directions, mixed formulations, singular matrices."""


class ConvergenceError(HomoboundError):
    """CG stopped at its iteration cap.

    The best iterate is kept in ``solution``; bounds evaluated from it are
    still guaranteed, only looser.
    """

    def __init__(self, message: str, solution: Optional[Any] = None):
        super().__init__(message)
        self.solution = solution


class ConfigError(HomoboundError):
    """Experiment configuration rejected; ``errors`` lists every violation."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        details = "\n".join(f"  - {e}" for e in self.errors)
        super().__init__(f"invalid configuration ({len(self.errors)} error(s)):\n{details}")
