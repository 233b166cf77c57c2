import numpy as np
import pytest

from grid import GridSpec
from projections import (
    DUAL_PROJECTION,
    PRIMAL_PROJECTION,
    NyquistVariant,
    ProjectionKind,
    Subspace,
    apply_projection,
    conformity_defect,
    discrete_multiplier,
    gamma_hat,
    helmholtz_split,
    project_spectrum,
)
from spectral import TensorField, forward_dft, hermitian_defect, inner_product, mean, norm

GRIDS = [(5, 5), (4, 4), (4, 5), (3, 3, 3), (4, 4, 4)]
CELLS = {2: (1.0, 2.5), 3: (1.0, 2.0, 0.5)}
ZERO, IDENTITY = NyquistVariant.ZERO, NyquistVariant.IDENTITY
ALL_KINDS = [ProjectionKind(Subspace.U)] + [
    ProjectionKind(s, v) for s in (Subspace.E, Subspace.J) for v in (ZERO, IDENTITY)
]


def make_grid(N):
    return GridSpec(CELLS[len(N)], N)


def test_gamma_hat_examples():
    Y = (1.0, 1.0)
    np.testing.assert_allclose(gamma_hat(Subspace.E, (1, 0), Y), [[1, 0], [0, 0]])
    np.testing.assert_allclose(gamma_hat(Subspace.J, (1, 0), Y), [[0, 0], [0, 1]])
    np.testing.assert_allclose(gamma_hat(Subspace.E, (1, 1), Y), [[0.5, 0.5], [0.5, 0.5]])
    np.testing.assert_allclose(gamma_hat(Subspace.U, (0, 0), Y), np.eye(2))
    np.testing.assert_allclose(gamma_hat(Subspace.E, (0, 0), Y), np.zeros((2, 2)))


def test_gamma_hat_uses_cell_scaled_frequencies():
    # xi = (1/1, 1/2) for k = (1, 1) on Y = (1, 2)
    expected = np.outer([1.0, 0.5], [1.0, 0.5]) / 1.25
    np.testing.assert_allclose(gamma_hat(Subspace.E, (1, 1), (1.0, 2.0)), expected)


def test_nyquist_blocks():
    g = GridSpec((1.0, 1.0), (4, 4))
    assert not discrete_multiplier(PRIMAL_PROJECTION, g, (-2, 1)).any()
    np.testing.assert_allclose(discrete_multiplier(ProjectionKind(Subspace.E, IDENTITY), g, (-2, 1)), np.eye(2))
    np.testing.assert_allclose(discrete_multiplier(DUAL_PROJECTION, g, (1, 1)), gamma_hat(Subspace.J, (1, 1), g.Y))


@pytest.mark.parametrize("pk", ALL_KINDS)
def test_vectorized_projection_matches_pointwise_blocks(pk):
    g = GridSpec((1.0, 2.0), (4, 5))
    for k in [(0, 0), (1, 2), (-1, -2), (-2, 1), (-2, 0)]:
        for b in range(g.d):
            coeffs = np.zeros((g.d,) + g.shape, dtype=complex)
            coeffs[(b,) + g.offset(k)] = 1.0
            out = project_spectrum(pk, coeffs, g)
            np.testing.assert_allclose(out[(slice(None),) + g.offset(k)], discrete_multiplier(pk, g, k)[:, b])
            assert np.count_nonzero(out) <= g.d


@pytest.mark.parametrize("N", GRIDS)
@pytest.mark.parametrize("pk", ALL_KINDS)
def test_idempotent(N, pk, random_field):
    f = random_field(make_grid(N))
    once = apply_projection(pk, f)
    twice = apply_projection(pk, once)
    assert norm(twice - once) <= 1e-10 * norm(f)


@pytest.mark.parametrize("N", GRIDS)
@pytest.mark.parametrize(
    "first, second",
    [
        (ProjectionKind(Subspace.E, ZERO), ProjectionKind(Subspace.J, ZERO)),
        (ProjectionKind(Subspace.E, ZERO), ProjectionKind(Subspace.J, IDENTITY)),
        (ProjectionKind(Subspace.E, IDENTITY), ProjectionKind(Subspace.J, ZERO)),
        (ProjectionKind(Subspace.U), ProjectionKind(Subspace.E, IDENTITY)),
        (ProjectionKind(Subspace.U), ProjectionKind(Subspace.J, IDENTITY)),
    ],
)
def test_mutually_orthogonal(N, first, second, random_field):
    g = make_grid(N)
    f, h = random_field(g), random_field(g)
    value = inner_product(apply_projection(first, f), apply_projection(second, h))
    assert abs(value) <= 1e-10 * norm(f) * norm(h)


@pytest.mark.parametrize("N", GRIDS)
@pytest.mark.parametrize("variant", [ZERO, IDENTITY])
def test_resolution_of_identity(N, variant, random_field):
    f = random_field(make_grid(N))
    split = helmholtz_split(f, variant)
    total = split.u_part + split.e_part + split.j_part
    assert norm(total - f) <= 1e-10 * norm(f)
    assert sum(norm(p) ** 2 for p in split) == pytest.approx(norm(f) ** 2, rel=1e-10)


@pytest.mark.parametrize("N", GRIDS)
@pytest.mark.parametrize("pk", ALL_KINDS)
def test_projection_of_real_field_stays_real(N, pk, random_field):
    projected = apply_projection(pk, random_field(make_grid(N)))
    assert np.isrealobj(projected.data)
    assert hermitian_defect(forward_dft(projected)) <= 1e-10


def test_mean_only_survives_u_projection(random_field):
    g = make_grid((5, 5))
    f = random_field(g)
    np.testing.assert_allclose(mean(apply_projection(ProjectionKind(Subspace.U), f)), mean(f), atol=1e-14)
    for pk in (PRIMAL_PROJECTION, DUAL_PROJECTION):
        np.testing.assert_allclose(mean(apply_projection(pk, f)), 0.0, atol=1e-14)


def test_gradient_is_curl_free():
    g = GridSpec((1.0, 1.0), (9, 9))
    x = g.coordinates()
    phase = 2 * np.pi * (x[0] + 2 * x[1])
    grad = TensorField(g, np.stack([np.cos(phase), 2 * np.cos(phase)]))
    assert norm(apply_projection(PRIMAL_PROJECTION, grad) - grad) < 1e-12
    assert norm(apply_projection(DUAL_PROJECTION, grad)) < 1e-12


@pytest.mark.parametrize("N", [(15, 15), (8, 8), (4, 5)])
def test_exactly_vanishing_projections_are_accepted(N):
    g = GridSpec((2.0, 2.0), N)
    x = g.coordinates()
    # gradient of a smooth periodic potential, several modes per axis
    dx = -np.pi * np.sin(np.pi * x[0]) + 0.6 * np.pi * np.cos(2 * np.pi * x[0] + 0.2)
    dy = np.pi * np.cos(np.pi * x[1])
    grad = TensorField(g, np.stack([dx, dy]))
    if g.is_odd:
        assert norm(apply_projection(DUAL_PROJECTION, grad)) < 1e-12 * norm(grad)
    layered = TensorField(g, np.stack([np.where(np.abs(x[0]) < 0.5, 10.0, 1.0), np.zeros(g.shape)]))
    # a field varying only along x_1 with values only in e_1 is curl-free plus a mean
    assert norm(apply_projection(DUAL_PROJECTION, layered)) < 1e-12 * norm(layered)
    assert norm(apply_projection(PRIMAL_PROJECTION, TensorField.constant(g, [3.0, -1.0]))) < 1e-14


def test_conformity_defect(random_field):
    g = make_grid((5, 5))
    f = random_field(g)
    off, nyquist = conformity_defect(apply_projection(PRIMAL_PROJECTION, f), Subspace.E)
    assert off < 1e-12 and nyquist == 0.0
    off, _ = conformity_defect(f, Subspace.E)
    assert off > 0.1


def test_conformity_defect_sees_nyquist_content(random_field):
    g = make_grid((4, 4))
    field = apply_projection(ProjectionKind(Subspace.E, IDENTITY), random_field(g))
    off, nyquist = conformity_defect(field, Subspace.E)
    assert nyquist > 1e-3
    assert off > 1e-3
    clean = apply_projection(PRIMAL_PROJECTION, field)
    assert conformity_defect(clean, Subspace.E) == pytest.approx((0.0, 0.0), abs=1e-12)
