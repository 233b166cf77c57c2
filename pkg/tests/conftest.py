import numpy as np
import pytest

from grid import GridSpec
from material import Inclusion, InclusionSpec, RectTopology
from spectral import TensorField

CELL = (2.0, 2.0)


def square_spec(rho: float = 10.0, h: float = 1.2, strict: bool = True) -> InclusionSpec:
    """Unit matrix with a centred square of contrast 1 + rho."""
    return InclusionSpec(CELL, 1.0, (Inclusion(rho, RectTopology((h, h), strict=strict), (0.0, 0.0)),))


def laminate_spec() -> InclusionSpec:
    """A = 1 for x_1 in (-1, 0), A = 10 for x_1 in (0, 1)."""
    return InclusionSpec(CELL, 1.0, (Inclusion(9.0, RectTopology((1.0, 2.0)), (0.5, 0.0)),))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def random_field(rng):
    def make(g: GridSpec) -> TensorField:
        return TensorField(g, rng.standard_normal((g.d,) + g.shape))

    return make


@pytest.fixture
def square():
    return square_spec()


@pytest.fixture
def laminate():
    return laminate_spec()
