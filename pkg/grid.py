"""
Cell geometry, multi-index sets, grid points and frequency vectors.

Fields on a grid are stored as arrays of shape ``(d, N_1, ..., N_d)``.
Multi-index ``k`` lives at offset ``k_a mod N_a`` along axis ``a``, which is
the ordering numpy's FFT produces, so transforms need no reshuffling.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Sequence, Tuple

import numpy as np

from errors import GridError


@dataclass(frozen=True)
class GridSpec:
    """Periodic cell with side lengths ``Y`` sampled by ``N`` points per axis."""

    Y: Tuple[float, ...]
    N: Tuple[int, ...]

    def __post_init__(self):
        Y = tuple(float(y) for y in self.Y)
        N = tuple(int(n) for n in self.N)
        if len(Y) != len(N):
            raise GridError(f"cell has {len(Y)} sides but grid has {len(N)} axes")
        if len(N) not in (1, 2, 3):
            raise GridError(f"dimension must be 1, 2 or 3, got {len(N)}")
        if any(n < 1 for n in N):
            raise GridError(f"grid points per axis must be >= 1, got {N}")
        if any(not np.isfinite(y) or y <= 0 for y in Y):
            raise GridError(f"cell side lengths must be positive, got {Y}")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "N", N)

    @property
    def d(self) -> int:
        return len(self.N)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.N

    @property
    def size(self) -> int:
        """|N|, the number of grid points."""
        return int(np.prod(self.N))

    @property
    def volume(self) -> float:
        """|Y|, the cell measure."""
        return float(np.prod(self.Y))

    @property
    def is_odd(self) -> bool:
        return all(n % 2 == 1 for n in self.N)

    @property
    def parity(self) -> str:
        return "odd" if self.is_odd else "even"

    def double_grid(self) -> "GridSpec":
        """The (2N-1)-grid carrying exact products of two N-grid polynomials."""
        return GridSpec(self.Y, tuple(2 * n - 1 for n in self.N))

    def axis_indices(self, axis: int) -> np.ndarray:
        """Integer k_a at each storage offset of one axis."""
        n = self.N[axis]
        return np.rint(np.fft.fftfreq(n, d=1.0 / n)).astype(np.int64)

    def index_arrays(self) -> np.ndarray:
        """Multi-indices as an int array of shape (d, N_1, ..., N_d)."""
        axes = [self.axis_indices(a) for a in range(self.d)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True at indices with some k_a = -N_a/2 (even axes only)."""
        mask = np.zeros(self.N, dtype=bool)
        for a, n in enumerate(self.N):
            if n % 2 == 0:
                sl = [slice(None)] * self.d
                sl[a] = n // 2
                mask[tuple(sl)] = True
        mask.setflags(write=False)
        return mask

    def coordinates(self) -> np.ndarray:
        """Grid points x^k as an array of shape (d, N_1, ..., N_d)."""
        k = self.index_arrays()
        Y = np.array(self.Y).reshape((self.d,) + (1,) * self.d)
        n = np.array(self.N).reshape((self.d,) + (1,) * self.d)
        return Y * k / n

    def frequencies(self) -> np.ndarray:
        """xi(k) = k / Y for every stored index, shape (d, N_1, ..., N_d)."""
        k = self.index_arrays()
        Y = np.array(self.Y).reshape((self.d,) + (1,) * self.d)
        return k / Y

    def offset(self, k: Sequence[int]) -> Tuple[int, ...]:
        """Storage offset of a member of the full index set."""
        k = _as_index(k, self.d)
        for a, (ka, n) in enumerate(zip(k, self.N)):
            if not (-n / 2 <= ka < n / 2):
                raise GridError(f"index {tuple(k)} outside the full index set of N={self.N} (axis {a})")
        return tuple(int(ka) % n for ka, n in zip(k, self.N))

    def to_dict(self) -> Dict[str, Any]:
        return {"Y": list(self.Y), "N": list(self.N), "parity": self.parity}


def _as_index(k: Sequence[int], d: int) -> np.ndarray:
    k = np.asarray(k)
    if k.shape != (d,):
        raise GridError(f"multi-index must have {d} components, got shape {k.shape}")
    if not np.all(np.equal(np.mod(k, 1), 0)):
        raise GridError(f"multi-index must be integer, got {k}")
    return k.astype(np.int64)


def full_index_set(g: GridSpec) -> np.ndarray:
    """Z^d_N in storage (row-major offset) order, shape (|N|, d)."""
    return g.index_arrays().reshape(g.d, -1).T.copy()


def reduced_index_set(g: GridSpec) -> np.ndarray:
    """Indices with every |k_a| < N_a/2; equals the full set on odd grids."""
    keep = ~g.nyquist_mask.reshape(-1)
    return full_index_set(g)[keep]


def nyquist_index_set(g: GridSpec) -> np.ndarray:
    """Full set minus reduced set."""
    return full_index_set(g)[g.nyquist_mask.reshape(-1)]


def grid_point(g: GridSpec, k: Sequence[int]) -> np.ndarray:
    g.offset(k)
    k = _as_index(k, g.d)
    return np.array([y * ka / n for y, ka, n in zip(g.Y, k, g.N)])


def frequency(g: GridSpec, k: Sequence[int]) -> np.ndarray:
    k = _as_index(k, g.d)
    return np.array([ka / y for ka, y in zip(k, g.Y)])
