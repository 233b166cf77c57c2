"""
Material coefficient models.

Two descriptions are supported: matrix-inclusion composites
``A(x) = A0 + sum_j f_j(x - x_j) A_j`` with rectangular topologies, and
pixel bitmaps with two scalar phases. Both give point samples for GaNi and
exact Fourier coefficients for the double-grid bounds.
"""

import logging
from dataclasses import dataclass, field, replace
from itertools import combinations, product
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from PIL import Image

from errors import MaterialError
from grid import GridSpec
from spectral import TensorField

logger = logging.getLogger(__name__)

SPD_TOL = 0.0
SYMMETRY_TOL = 1e-12
ARC_TOL = 1e-12

# 3x3 local average: centre, edge neighbours, corners
SMOOTHING_WEIGHTS = {
    (0, 0): 4 / 16,
    (1, 0): 2 / 16, (-1, 0): 2 / 16, (0, 1): 2 / 16, (0, -1): 2 / 16,
    (1, 1): 1 / 16, (-1, -1): 1 / 16, (-1, 1): 1 / 16, (1, -1): 1 / 16,
}

FourierTerm = Tuple[np.ndarray, np.ndarray]


def _as_matrix(value: Union[float, Sequence], d: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(d)
    if arr.shape != (d, d):
        raise MaterialError(f"{name} must be a scalar or a {d}x{d} matrix, got shape {arr.shape}")
    if not np.allclose(arr, arr.T, rtol=0.0, atol=SYMMETRY_TOL * max(1.0, np.abs(arr).max())):
        raise MaterialError(f"{name} must be symmetric")
    return 0.5 * (arr + arr.T)


def _is_spd(matrix: np.ndarray) -> bool:
    return bool(np.linalg.eigvalsh(matrix).min() > SPD_TOL)


def _wrap(disp: np.ndarray, Y: Sequence[float]) -> np.ndarray:
    """Periodic displacement folded into [-Y/2, Y/2)."""
    Y = np.asarray(Y, dtype=float).reshape((-1,) + (1,) * (disp.ndim - 1))
    return np.mod(disp + Y / 2, Y) - Y / 2


Arc = Tuple[float, float]


def _arc_intersection(a: Arc, b: Arc, y: float) -> List[Arc]:
    """Common part of two periodic intervals (start, length) on a circle of length y."""
    (a0, la), (b0, lb) = a, b
    if la >= y:
        return [(float(b0), float(min(lb, y)))]
    if lb >= y:
        return [a]
    shifted = a0 + np.mod(b0 - a0, y)
    pieces = []
    for start in (shifted, shifted - y):
        lo, hi = max(a0, start), min(a0 + la, start + lb)
        if hi - lo > ARC_TOL * y:
            pieces.append((float(lo), float(min(hi - lo, y))))
    return pieces


@dataclass(frozen=True)
class RectTopology:
    """Rectangle/cuboid of side lengths ``h``.

    ``strict`` selects the open set |x_a| < h_a/2; otherwise the closed set
    |x_a| <= h_a/2. Both share the same Fourier coefficients.
    """

    h: Tuple[float, ...]
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "h", tuple(float(x) for x in self.h))

    def validate(self, Y: Sequence[float]):
        if len(self.h) != len(Y):
            raise MaterialError(f"rectangle has {len(self.h)} sides in a {len(Y)}-d cell")
        for a, (h, y) in enumerate(zip(self.h, Y)):
            if not (0 < h <= y):
                raise MaterialError(f"rectangle side h[{a}]={h} must satisfy 0 < h <= Y[{a}]={y}")

    def contains(self, disp: np.ndarray, Y: Sequence[float]) -> np.ndarray:
        inside = np.ones(disp.shape[1:], dtype=bool)
        for a, (h, y) in enumerate(zip(self.h, Y)):
            if h >= y:
                continue
            dist = np.abs(disp[a])
            inside &= (dist < h / 2) if self.strict else (dist <= h / 2)
        return inside

    def fourier(self, m: np.ndarray, Y: Sequence[float]) -> np.ndarray:
        out = np.ones(m.shape[1:])
        for a, (h, y) in enumerate(zip(self.h, Y)):
            out = out * (h / y) * np.sinc(h * m[a] / y)
        return out


def rect_topology_fourier(h: Sequence[float], Y: Sequence[float], m: Sequence[int]) -> float:
    """(1/|Y|) prod_a h_a sinc(h_a m_a / Y_a) for a centred rectangle."""
    topo = RectTopology(tuple(h))
    topo.validate(Y)
    return float(topo.fourier(np.asarray(m, dtype=float).reshape(-1, 1), Y)[0])


@dataclass(frozen=True, eq=False)
class Inclusion:
    increment: np.ndarray
    topology: RectTopology
    center: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class InclusionSpec:
    """Matrix phase A0 plus rectangular inclusions inside the cell Y.

    ``signed`` marks increments that are corrections rather than phases (as
    in an inverse built from overlaps); they skip the positivity checks.
    """

    Y: Tuple[float, ...]
    A0: np.ndarray
    inclusions: Tuple[Inclusion, ...] = ()
    signed: bool = field(default=False, repr=False)

    def __post_init__(self):
        Y = tuple(float(y) for y in self.Y)
        d = len(Y)
        object.__setattr__(self, "Y", Y)
        A0 = _as_matrix(self.A0, d, "A0")
        if not self.signed and not _is_spd(A0):
            raise MaterialError("matrix-phase coefficients A0 are not positive definite")
        object.__setattr__(self, "A0", A0)
        checked = []
        for j, inc in enumerate(self.inclusions):
            if not isinstance(inc.topology, RectTopology):
                raise MaterialError(f"inclusion {j}: unsupported topology {type(inc.topology).__name__}")
            inc.topology.validate(Y)
            center = tuple(float(c) for c in inc.center)
            if len(center) != d:
                raise MaterialError(f"inclusion {j}: centre must have {d} coordinates")
            increment = _as_matrix(inc.increment, d, f"inclusion {j} increment")
            if not self.signed and not _is_spd(A0 + increment):
                raise MaterialError(f"inclusion {j}: phase A0 + A_j is not positive definite")
            checked.append(Inclusion(increment, inc.topology, center))
        object.__setattr__(self, "inclusions", tuple(checked))
        if len(checked) > 1 and not self.signed:
            self._check_overlaps()

    @property
    def d(self) -> int:
        return len(self.Y)

    def _check_overlaps(self):
        n = 64 if self.d <= 2 else 24
        probe = GridSpec(self.Y, (n,) * self.d)
        blocks = self.sample_points(probe.coordinates())
        _require_spd(blocks, "overlapping inclusions")

    def sample_points(self, points: np.ndarray) -> np.ndarray:
        blocks = np.broadcast_to(
            self.A0.reshape((self.d, self.d) + (1,) * (points.ndim - 1)),
            (self.d, self.d) + points.shape[1:],
        ).copy()
        for inc in self.inclusions:
            center = np.asarray(inc.center).reshape((-1,) + (1,) * (points.ndim - 1))
            inside = inc.topology.contains(_wrap(points - center, self.Y), self.Y)
            blocks += inc.increment[(slice(None), slice(None)) + (None,) * inside.ndim] * inside
        return blocks

    def fourier_terms(self, m: np.ndarray) -> List[FourierTerm]:
        """(matrix, scalar coefficient array) pairs whose sum is A-hat(m)."""
        terms = [(self.A0, np.all(m == 0, axis=0).astype(complex))]
        for inc in self.inclusions:
            phase = np.zeros(m.shape[1:])
            for a, (c, y) in enumerate(zip(inc.center, self.Y)):
                phase = phase + m[a] * c / y
            terms.append((inc.increment, inc.topology.fourier(m, self.Y) * np.exp(-2j * np.pi * phase)))
        return terms

    def inverse(self) -> "InclusionSpec":
        """Exact inclusion description of A^{-1}.

        Every set S of inclusions with a common intersection contributes
        sum_{T in S} (-1)^{|S|-|T|} (A0 + sum_T A_j)^{-1} on that intersection,
        a union of boxes. Disjoint inclusions reduce to one piece each.
        """
        phase_inverse = {}

        def inverse_of(members: Tuple[int, ...]) -> np.ndarray:
            if members not in phase_inverse:
                total = self.A0 + sum((self.inclusions[j].increment for j in members), np.zeros((self.d, self.d)))
                phase_inverse[members] = np.linalg.inv(total)
            return phase_inverse[members]

        pieces: List[Inclusion] = []

        def extend(members: Tuple[int, ...], arcs: List[List[Arc]]):
            for j in range(members[-1] + 1 if members else 0, len(self.inclusions)):
                inc = self.inclusions[j]
                narrowed = [
                    [piece for arc in axis for piece in _arc_intersection(arc, (c - h / 2, h), y)]
                    for axis, c, h, y in zip(arcs, inc.center, inc.topology.h, self.Y)
                ]
                if not all(narrowed):
                    continue
                subset = members + (j,)
                increment = sum(
                    (-1) ** (len(subset) - r) * inverse_of(T)
                    for r in range(len(subset) + 1)
                    for T in combinations(subset, r)
                )
                strict = any(self.inclusions[i].topology.strict for i in subset)
                for box in product(*narrowed):
                    h = tuple(length for _, length in box)
                    center = tuple(start + length / 2 for start, length in box)
                    pieces.append(Inclusion(increment, RectTopology(h, strict), center))
                extend(subset, narrowed)

        extend((), [[(-y / 2, y)] for y in self.Y])
        if len(pieces) > len(self.inclusions):
            logger.debug("inverse of %d overlapping inclusions uses %d pieces", len(self.inclusions), len(pieces))
        return InclusionSpec(self.Y, inverse_of(()), tuple(pieces), signed=True)


@dataclass(frozen=True, eq=False)
class PixelGridMaterial:
    """Pixel bitmap with A(x) = [a_m + (a_i - a_m) f(x)] I.

    Pixel p covers the half-open tile [-Y/2 + p h, -Y/2 + (p+1) h); array
    axis a of the bitmap runs along cell axis a. With ``reciprocal`` the
    pixel values are inverted, describing A^{-1}.
    """

    indicator: np.ndarray
    a_matrix: float
    a_inclusion: float
    Y: Tuple[float, ...]
    reciprocal: bool = False
    _spectrum: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        indicator = np.array(self.indicator, dtype=float)
        Y = tuple(float(y) for y in self.Y)
        if indicator.ndim != len(Y):
            raise MaterialError(f"bitmap is {indicator.ndim}-d but the cell is {len(Y)}-d")
        if indicator.size == 0 or not np.all(np.isfinite(indicator)):
            raise MaterialError("bitmap must be non-empty and finite")
        if indicator.min() < 0.0 or indicator.max() > 1.0:
            raise MaterialError("indicator values must lie in [0, 1]")
        if not (self.a_matrix > 0 and self.a_inclusion > 0):
            raise MaterialError("phase coefficients must be positive")
        indicator.setflags(write=False)
        object.__setattr__(self, "indicator", indicator)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "_spectrum", None)

    @property
    def d(self) -> int:
        return len(self.Y)

    @property
    def pixel_shape(self) -> Tuple[int, ...]:
        return self.indicator.shape

    def pixel_values(self) -> np.ndarray:
        values = self.a_matrix + (self.a_inclusion - self.a_matrix) * self.indicator
        return 1.0 / values if self.reciprocal else values

    def inverse(self) -> "PixelGridMaterial":
        return replace(self, reciprocal=not self.reciprocal)

    def pixel_of(self, g: GridSpec) -> Tuple[np.ndarray, ...]:
        """Pixel containing each grid point; points on a pixel edge take the pixel to their lower-left.

        The point at position t = (2k + N) M / (2N), in pixel widths from the
        cell corner, lies in pixel ceil(t) - 1, which is floor(t) off the edges.
        """
        k = g.index_arrays()
        return tuple(
            np.mod(-((-(2 * k[a] + n) * m) // (2 * n)) - 1, m)
            for a, (n, m) in enumerate(zip(g.N, self.pixel_shape))
        )

    def _pixel_spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            spectrum = np.fft.fftn(self.pixel_values()) / self.indicator.size
            object.__setattr__(self, "_spectrum", spectrum)
        return self._spectrum

    def fourier_terms(self, m: np.ndarray) -> List[FourierTerm]:
        spectrum = self._pixel_spectrum()
        coeff = spectrum[tuple(np.mod(m[a], n) for a, n in enumerate(self.pixel_shape))].astype(complex)
        for a, n in enumerate(self.pixel_shape):
            coeff *= np.sinc(m[a] / n) * np.exp(1j * np.pi * m[a] * (1.0 - 1.0 / n))
        return [(np.eye(self.d), coeff)]


Material = Union[InclusionSpec, PixelGridMaterial]


@dataclass(frozen=True, eq=False)
class MaterialGrid:
    """Per-point blocks A(x^k) and their inverses, shape (d, d, N_1, ..., N_d)."""

    grid: GridSpec
    blocks: np.ndarray
    inverse_blocks: np.ndarray

    def apply(self, x: TensorField) -> TensorField:
        return TensorField(x.grid, np.einsum("ab...,b...->a...", self.blocks, x.data))

    def apply_inverse(self, x: TensorField) -> TensorField:
        return TensorField(x.grid, np.einsum("ab...,b...->a...", self.inverse_blocks, x.data))


def _require_spd(blocks: np.ndarray, what: str):
    d = blocks.shape[0]
    flat = np.moveaxis(blocks.reshape(d, d, -1), -1, 0)
    eig = np.linalg.eigvalsh(flat)
    bad = int(np.count_nonzero(eig.min(axis=1) <= SPD_TOL))
    if bad:
        raise MaterialError(f"{what}: {bad} sample(s) not positive definite (min eigenvalue {eig.min():.3e})")


def sample_material(spec: Material, g: GridSpec) -> MaterialGrid:
    """Point samples A(x^k_N) of the coefficients, the GaNi material matrix."""
    if spec.Y != g.Y:
        raise MaterialError(f"material cell {spec.Y} differs from grid cell {g.Y}")
    if isinstance(spec, PixelGridMaterial):
        values = spec.pixel_values()[spec.pixel_of(g)]
        blocks = np.eye(g.d)[(slice(None), slice(None)) + (None,) * g.d] * values
    else:
        blocks = spec.sample_points(g.coordinates())
    _require_spd(blocks, "sampled material")
    flat = np.moveaxis(blocks.reshape(g.d, g.d, -1), -1, 0)
    inverse = np.moveaxis(np.linalg.inv(flat), 0, -1).reshape(blocks.shape)
    logger.debug("sampled material on N=%s", g.N)
    return MaterialGrid(g, blocks, inverse)


def material_fourier(spec: Material, m: Sequence[int]) -> np.ndarray:
    """A-hat(m) = (1/|Y|) int A(x) phi_{-m}(x) dx, a complex d x d matrix."""
    m = np.asarray(m, dtype=np.int64).reshape(-1, 1)
    if m.shape[0] != spec.d:
        raise MaterialError(f"index must have {spec.d} components")
    return sum(matrix * coeff[0] for matrix, coeff in spec.fourier_terms(m))


def synthesize_blocks(spec: Material, g: GridSpec, band: Optional[Sequence[int]] = None) -> np.ndarray:
    """Truncated Fourier series of A evaluated at the grid points.

    Coefficients with every |m_a| < band_a/2 are kept (default: the reduced
    index set of ``g``). One inverse FFT per Fourier term.
    """
    m = g.index_arrays()
    keep = ~g.nyquist_mask
    if band is not None:
        for a, b in enumerate(band):
            keep = keep & (2 * np.abs(m[a]) < b)
    blocks = np.zeros((g.d, g.d) + g.shape)
    axes = tuple(range(g.d))
    for matrix, coeff in spec.fourier_terms(m):
        values = np.fft.ifftn(np.where(keep, coeff, 0.0), axes=axes) * g.size
        blocks += matrix[(slice(None), slice(None)) + (None,) * g.d] * values.real
    return blocks


def smooth_pixels(p: PixelGridMaterial) -> PixelGridMaterial:
    """Periodic 3x3 local average of the indicator, weights 4/16, 2/16, 1/16."""
    if p.d != 2:
        raise MaterialError("pixel smoothing is defined for 2-d bitmaps only")
    smoothed = np.zeros_like(p.indicator)
    for shift, weight in SMOOTHING_WEIGHTS.items():
        smoothed += weight * np.roll(p.indicator, shift, axis=(0, 1))
    return replace(p, indicator=np.clip(smoothed, 0.0, 1.0))


# Pillow scales plain and binary PGM samples to the full range of the mode
_MODE_SCALE = {"1": 1.0, "L": 255.0, "I;16": 65535.0, "I": 65535.0, "F": 1.0}


def load_bitmap(path: Union[str, Path]) -> np.ndarray:
    """Phase indicator from an ASCII/binary PGM (Pillow) or a CSV of 0/1 values (pandas)."""
    path = Path(path)
    if not path.exists():
        raise MaterialError(f"bitmap not found: {path}")
    if path.suffix.lower() == ".csv":
        try:
            frame = pd.read_csv(path, header=None, skip_blank_lines=True)
            values = frame.to_numpy(dtype=float)
        except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as exc:
            raise MaterialError(f"{path}: cannot read bitmap ({exc})") from exc
        if np.isnan(values).any():
            raise MaterialError(f"{path}: rows have different lengths or non-numeric entries")
    else:
        try:
            with Image.open(path) as image:
                if image.mode not in _MODE_SCALE:
                    image = image.convert("L")
                values = np.asarray(image, dtype=float) / _MODE_SCALE[image.mode]
        except (OSError, ValueError) as exc:
            raise MaterialError(f"{path}: cannot read bitmap ({exc})") from exc
    if values.ndim != 2 or values.size == 0:
        raise MaterialError(f"{path}: expected a rectangular 2-d bitmap, got shape {values.shape}")
    if values.min() < 0.0 or values.max() > 1.0:
        raise MaterialError(f"{path}: indicator values must lie in [0, 1]")
    logger.info("loaded %dx%d bitmap from %s (phase fraction %.4f)", *values.shape, path, values.mean())
    return values


def synthetic_bitmap(shape: Sequence[int], fraction: float, seed: int = 0) -> np.ndarray:
    """Seeded two-phase bitmap: smoothed white noise thresholded at the given phase fraction."""
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(tuple(shape))
    for _ in range(4):
        noise = sum(w * np.roll(noise, s, axis=(0, 1)) for s, w in SMOOTHING_WEIGHTS.items())
    threshold = np.quantile(noise, 1.0 - fraction)
    return (noise > threshold).astype(float)
