import numpy as np
import pytest

from errors import GridError
from grid import (
    GridSpec,
    frequency,
    full_index_set,
    grid_point,
    nyquist_index_set,
    reduced_index_set,
)


def test_full_index_set_even_axis_includes_negative_half():
    g = GridSpec((1.0,), (4,))
    assert sorted(full_index_set(g)[:, 0].tolist()) == [-2, -1, 0, 1]


def test_full_index_set_odd_axis_is_symmetric():
    g = GridSpec((1.0,), (5,))
    assert sorted(full_index_set(g)[:, 0].tolist()) == [-2, -1, 0, 1, 2]


def test_index_sets_follow_storage_order():
    g = GridSpec((1.0, 1.0), (3, 4))
    idx = full_index_set(g)
    assert idx.shape == (12, 2)
    for row, k in enumerate(idx):
        assert np.ravel_multi_index(g.offset(k), g.N) == row


@pytest.mark.parametrize("N", [(5, 5), (3, 3, 3), (7,)])
def test_reduced_equals_full_on_odd_grids(N):
    g = GridSpec((1.0,) * len(N), N)
    assert np.array_equal(reduced_index_set(g), full_index_set(g))
    assert len(nyquist_index_set(g)) == 0


def test_nyquist_indices_on_even_grid():
    g = GridSpec((1.0, 1.0), (4, 4))
    nyq = nyquist_index_set(g)
    assert len(nyq) == 7
    assert all(-2 in k for k in nyq.tolist())
    assert len(reduced_index_set(g)) == 9


def test_nyquist_mask_mixed_parity():
    g = GridSpec((1.0, 1.0), (4, 5))
    assert g.nyquist_mask.sum() == 5
    assert not g.is_odd
    assert g.parity == "even"


def test_grid_point_scales_with_cell():
    g = GridSpec((2.0, 2.0), (5, 5))
    np.testing.assert_allclose(grid_point(g, (1, -2)), [0.4, -0.8])
    np.testing.assert_allclose(g.coordinates()[:, 1, 3], [0.4, -0.8])


def test_frequency_is_index_over_cell():
    g = GridSpec((2.0, 4.0), (5, 5))
    np.testing.assert_allclose(frequency(g, (1, 2)), [0.5, 0.5])
    np.testing.assert_allclose(g.frequencies()[:, 1, 2], [0.5, 0.5])


def test_offset_wraps_negative_indices():
    g = GridSpec((1.0, 1.0), (4, 4))
    assert g.offset((-2, 0)) == (2, 0)
    assert g.offset((-1, 1)) == (3, 1)


@pytest.mark.parametrize("k", [(2, 0), (0, -3), (1, 1, 1)])
def test_offset_rejects_indices_outside_the_set(k):
    g = GridSpec((1.0, 1.0), (4, 4))
    with pytest.raises(GridError):
        g.offset(k)


def test_double_grid():
    g = GridSpec((1.0, 2.0), (5, 3))
    M = g.double_grid()
    assert M.N == (9, 5)
    assert M.Y == g.Y


@pytest.mark.parametrize(
    "Y, N",
    [
        ((1.0, 1.0), (0, 3)),
        ((1.0,) * 4, (3,) * 4),
        ((1.0, -1.0), (3, 3)),
        ((1.0,), (3, 3)),
    ],
)
def test_invalid_grids_raise(Y, N):
    with pytest.raises(GridError):
        GridSpec(Y, N)


def test_grid_is_hashable_and_comparable():
    assert GridSpec((1, 1), (3, 3)) == GridSpec((1.0, 1.0), (3, 3))
    assert len({GridSpec((1, 1), (3, 3)), GridSpec((1.0, 1.0), (3, 3))}) == 1


def test_to_dict():
    assert GridSpec((2.0, 2.0), (4, 4)).to_dict() == {"Y": [2.0, 2.0], "N": [4, 4], "parity": "even"}
