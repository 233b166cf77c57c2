import json

import numpy as np
import pytest

from bounds import (
    BoundsReport,
    bounds_summary,
    double_grid_blocks,
    evaluate_bounds,
    exact_bilinear,
    full_matrix_bilinear,
    gap_eigenvalues,
    loewner_leq,
    voigt_reuss,
)
from conftest import CELL
from errors import ConformityError, GridError
from grid import GridSpec
from material import Inclusion, InclusionSpec, RectTopology, sample_material
from projections import NyquistVariant, ProjectionKind, Subspace, apply_projection
from solver import AuxiliarySolution, Formulation, SolveSettings, solve_all_directions
from spectral import TensorField, inner_product, interpolate_to_grid, norm

REUSS_S = 1.0 / (0.36 / 11.0 + 0.64)


def random_inclusions(rng, Y, count):
    d = len(Y)
    return InclusionSpec(
        Y,
        2.0,
        tuple(
            Inclusion(
                np.diag(rng.uniform(0.5, 5.0, d)),
                RectTopology(tuple(rng.uniform(0.2, 0.9) * y for y in Y)),
                tuple(rng.uniform(-0.5, 0.5) * y for y in Y),
            )
            for _ in range(count)
        ),
    )


def zero_solutions(g, formulation):
    return [AuxiliarySolution(a, formulation, TensorField.zeros(g)) for a in range(g.d)]


def solved(spec, N, tol=1e-10):
    m = sample_material(spec, GridSpec(spec.Y, N))
    settings = SolveSettings(tol=tol, max_iter=2000)
    return (
        solve_all_directions(m, Formulation.PRIMAL, settings),
        solve_all_directions(m, Formulation.DUAL, settings),
    )


@pytest.mark.parametrize("N, Y", [((3, 3), (1.0, 2.0)), ((5, 5), (2.0, 2.0)), ((3, 3, 3), (1.0, 1.5, 2.0))])
@pytest.mark.parametrize("count", [1, 2, 3])
def test_double_grid_quadrature_equals_dense_galerkin(N, Y, count, rng, random_field):
    spec = random_inclusions(rng, Y, count)
    g = GridSpec(Y, N)
    blocks = double_grid_blocks(spec, g)
    for _ in range(20):
        u, v = random_field(g), random_field(g)
        exact = exact_bilinear(blocks, u, v)
        dense = full_matrix_bilinear(spec, u, v)
        scale = norm(u) * norm(v) * 10.0
        assert abs(exact - dense) <= 1e-12 * scale


def test_exact_bilinear_is_symmetric(rng, random_field):
    spec = random_inclusions(rng, (2.0, 2.0), 2)
    g = GridSpec(spec.Y, (7, 7))
    blocks = double_grid_blocks(spec, g)
    u, v = random_field(g), random_field(g)
    assert exact_bilinear(blocks, u, v) == pytest.approx(exact_bilinear(blocks, v, u), abs=1e-12)


def test_homogeneous_bilinear_is_scaled_inner_product(random_field):
    spec = InclusionSpec(CELL, 3.0)
    g = GridSpec(CELL, (5, 5))
    u, v = random_field(g), random_field(g)
    value = exact_bilinear(double_grid_blocks(spec, g), u, v)
    assert value == pytest.approx(3.0 * inner_product(u, v), abs=1e-12)


def test_double_grid_blocks_need_odd_grid(square):
    with pytest.raises(GridError):
        double_grid_blocks(square, GridSpec(CELL, (4, 4)))


def test_bilinear_rejects_foreign_fields(square, random_field):
    blocks = double_grid_blocks(square, GridSpec(CELL, (5, 5)))
    u = random_field(GridSpec(CELL, (3, 3)))
    with pytest.raises(GridError):
        exact_bilinear(blocks, u, u)


def test_dense_oracle_size_cap(square, random_field):
    u = random_field(GridSpec(CELL, (9, 9)))
    with pytest.raises(GridError):
        full_matrix_bilinear(square, u, u, max_points=50)


def test_voigt_reuss_closed_form(square):
    voigt, reuss = voigt_reuss(square)
    np.testing.assert_allclose(voigt, 4.6 * np.eye(2), atol=1e-14)
    np.testing.assert_allclose(reuss, REUSS_S * np.eye(2), rtol=1e-12)
    assert reuss[0, 0] == pytest.approx(1.48649, abs=1e-5)


def test_homogeneous_voigt_equals_reuss():
    voigt, reuss = voigt_reuss(InclusionSpec(CELL, 2.0))
    np.testing.assert_allclose(voigt, 2.0 * np.eye(2))
    np.testing.assert_allclose(reuss, 2.0 * np.eye(2))


def test_zero_correctors_give_voigt_and_reuss(square):
    g = GridSpec(CELL, (5, 5))
    pair = evaluate_bounds(square, zero_solutions(g, Formulation.PRIMAL), zero_solutions(g, Formulation.DUAL))
    np.testing.assert_allclose(pair.A_upper, 4.6 * np.eye(2), atol=1e-12)
    np.testing.assert_allclose(pair.B_lower_inv, REUSS_S * np.eye(2), atol=1e-12)


def test_homogeneous_bounds_are_tight():
    spec = InclusionSpec(CELL, 1.7)
    primal, dual = solved(spec, (5, 5))
    pair = evaluate_bounds(spec, primal, dual)
    summary = bounds_summary(pair.A_upper, pair.B_bar)
    np.testing.assert_allclose(summary.mean, 1.7 * np.eye(2), atol=1e-12)
    np.testing.assert_allclose(summary.D, 0.0, atol=1e-12)


def test_bounds_sandwich_square_inclusion(square):
    primal, dual = solved(square, (15, 15))
    pair = evaluate_bounds(square, primal, dual)
    voigt, reuss = voigt_reuss(square)
    assert loewner_leq(reuss, pair.B_lower_inv)
    assert loewner_leq(pair.B_lower_inv, pair.A_upper)
    assert loewner_leq(pair.A_upper, voigt)
    np.testing.assert_allclose(pair.A_upper, pair.A_upper.T)


def test_better_corrector_lowers_upper_bound(square):
    g = GridSpec(CELL, (9, 9))
    primal, dual = solved(square, g.N)
    zero = evaluate_bounds(square, zero_solutions(g, Formulation.PRIMAL), dual)
    good = evaluate_bounds(square, primal, dual)
    assert good.A_upper[0, 0] < zero.A_upper[0, 0]


def test_refining_a_coarse_minimizer_cannot_raise_the_upper_bound(square):
    coarse, fine = GridSpec(CELL, (5, 5)), GridSpec(CELL, (15, 15))
    coarse_primal, _ = solved(square, coarse.N)
    fine_primal, _ = solved(square, fine.N)
    blocks_coarse, blocks_fine = double_grid_blocks(square, coarse), double_grid_blocks(square, fine)
    for alpha in range(2):
        coarse_total = coarse_primal[alpha].total_field()
        fine_total = fine_primal[alpha].total_field()
        lifted = interpolate_to_grid(coarse_total, fine)
        bound = exact_bilinear(blocks_coarse, coarse_total, coarse_total)
        # E_5 sits inside E_15 and the quadrature is exact on both
        assert exact_bilinear(blocks_fine, lifted, lifted) == pytest.approx(bound, rel=1e-10)
        step = fine_total - lifted
        t = -exact_bilinear(blocks_fine, lifted, step) / exact_bilinear(blocks_fine, step, step)
        refined = lifted + t * step
        refined_bound = exact_bilinear(blocks_fine, refined, refined)
        assert refined_bound <= bound * (1 + 1e-12)
        assert refined_bound <= exact_bilinear(blocks_fine, fine_total, fine_total) * (1 + 1e-12)


def test_bounds_for_overlapping_inclusions():
    spec = InclusionSpec(
        CELL,
        1.0,
        (
            Inclusion(5.0, RectTopology((1.0, 1.0)), (0.0, 0.0)),
            Inclusion(5.0, RectTopology((1.0, 1.0)), (0.4, 0.0)),
        ),
    )
    voigt, reuss = voigt_reuss(spec)
    # phases 1, 6, 11 on areas 2.6, 0.8, 0.6 of the cell 4
    np.testing.assert_allclose(voigt, 3.5 * np.eye(2), atol=1e-14)
    np.testing.assert_allclose(reuss, 33.0 / 23.0 * np.eye(2), rtol=1e-12)
    primal, dual = solved(spec, (9, 9))
    pair = evaluate_bounds(spec, primal, dual)
    assert loewner_leq(reuss, pair.B_lower_inv)
    assert loewner_leq(pair.B_lower_inv, pair.A_upper)
    assert loewner_leq(pair.A_upper, voigt)


def test_non_conforming_minimizers_rejected(square, random_field):
    g = GridSpec(CELL, (5, 5))
    bad = [AuxiliarySolution(a, Formulation.PRIMAL, random_field(g)) for a in range(2)]
    with pytest.raises(ConformityError):
        evaluate_bounds(square, bad, zero_solutions(g, Formulation.DUAL))


def test_nyquist_content_rejected(square, random_field):
    g = GridSpec(CELL, (4, 4))
    field = apply_projection(ProjectionKind(Subspace.E, NyquistVariant.IDENTITY), random_field(g))
    primal = [AuxiliarySolution(a, Formulation.PRIMAL, field) for a in range(2)]
    with pytest.raises(ConformityError):
        evaluate_bounds(square, primal, zero_solutions(g, Formulation.DUAL))


def test_mixed_up_formulations_rejected(square):
    g = GridSpec(CELL, (5, 5))
    with pytest.raises(ValueError):
        evaluate_bounds(square, zero_solutions(g, Formulation.DUAL), zero_solutions(g, Formulation.DUAL))


def test_summary_intervals():
    summary = bounds_summary(np.diag([2.0, 2.0]), np.eye(2))
    np.testing.assert_allclose(summary.mean, np.diag([1.5, 1.5]))
    np.testing.assert_allclose(summary.D, np.diag([0.5, 0.5]))
    np.testing.assert_allclose(summary.component_intervals[0, 0], [1.0, 2.0])
    np.testing.assert_allclose(summary.component_intervals[0, 1], [-1.0, 1.0])


def test_equal_bounds_collapse_intervals():
    A = np.array([[2.0, 0.3], [0.3, 1.0]])
    summary = bounds_summary(A, np.linalg.inv(A))
    np.testing.assert_allclose(summary.D, 0.0, atol=1e-14)
    np.testing.assert_allclose(summary.component_intervals[..., 0], summary.component_intervals[..., 1], atol=1e-14)


def test_loewner_order():
    I = np.eye(2)
    assert loewner_leq(I, I, tol=0.0)
    assert loewner_leq(I, 2 * I)
    assert not loewner_leq(2 * I, I)
    with pytest.raises(ValueError):
        loewner_leq(np.array([[1.0, 0.1], [0.0, 1.0]]), I)


def test_gap_eigenvalues():
    np.testing.assert_allclose(gap_eigenvalues(np.diag([3.0, 2.0]), np.diag([1.0, 2.0])), [0.0, 2.0])


def test_report_json_round_trip():
    report = BoundsReport(
        name="square",
        grid=GridSpec(CELL, (5, 5)).to_dict(),
        A_upper=np.array([[4.1, 0.0], [0.0, 4.1]]),
        B_lower_inv=np.array([[1.9, 0.0], [0.0, 1.9]]),
        diagnostics={"iterations_primal": [3, 4], "gap_min_eigenvalue": np.float64(0.0)},
        config_hash="abc",
    )
    restored = BoundsReport.from_dict(json.loads(json.dumps(report.to_dict())))
    np.testing.assert_array_equal(restored.A_upper, report.A_upper)
    np.testing.assert_array_equal(restored.B_lower_inv, report.B_lower_inv)
    assert restored.D is None
    assert restored.diagnostics == {"iterations_primal": [3, 4], "gap_min_eigenvalue": 0.0}
    assert restored.grid == {"Y": [2.0, 2.0], "N": [5, 5], "parity": "odd"}


def test_sandwich_checks_skip_missing_matrices():
    report = BoundsReport(name="x", grid={}, A_upper=2 * np.eye(2), voigt=3 * np.eye(2))
    assert report.sandwich_checks() == {"A_upper<=voigt": True}
