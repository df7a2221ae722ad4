"""Solution-space solver, closure checks, and leaf structure."""

import math

import numpy as np
import pytest

from igh.foliation import (
    ClosureReport,
    PolyVectorBasis,
    PolyVectorField,
    SolutionBasis,
    leaf_hessian_check,
    leaf_rank,
    nabla2_apply,
    product_closure_check,
    refine_degree,
    solve_solution_space,
    trace_leaf,
)
from igh.tensor import (
    ChartSpec,
    ConnectionField,
    GeometryError,
    MetricField,
    curvature,
    levi_civita,
    xi_statistical,
)


def square_chart(half=1.0, periodic=False):
    flags = (True, True) if periodic else ()
    return ChartSpec(("x", "y"), ((-half, half), (-half, half)), periodic=flags)


def zero_connection(chart):
    n = chart.dim
    grid = [[["0"] * n for _ in range(n)] for _ in range(n)]
    return ConnectionField.from_grid(chart, grid, torsion_free=True)


def euclid_metric(chart):
    n = chart.dim
    rows = [["1" if i == j else "0" for j in range(n)] for i in range(n)]
    return MetricField.from_grid(chart, rows)


def xi_pair():
    chart = square_chart()
    g = euclid_metric(chart)
    return g, xi_statistical(g, ("1", "0"), eps=1.0)


def warped_product_metric():
    """3 (dt^2 + dr^2 + sinh(r)^2 da^2) on a boundary-free chart."""
    chart = ChartSpec(("t", "r", "a"), ((-1.0, 1.0), (0.2, 2.0), (0.2, 6.0)))
    rows = [["3", "0", "0"], ["0", "3", "0"], ["0", "0", "3*sinh(r)^2"]]
    return MetricField.from_grid(chart, rows)


def unit_field(basis, exponents, direction, scale=1.0):
    c = np.zeros(basis.size)
    c[basis.index_of(exponents, direction)] = scale
    return PolyVectorField(basis, c)


# ---------------------------------------------------------------------------
# Polynomial basis


def test_basis_size_formula():
    for n, names in ((2, ("x", "y")), (3, ("x", "y", "z"))):
        chart = ChartSpec(names, ((-1.0, 1.0),) * n)
        for d in range(5):
            basis = PolyVectorBasis(chart, d)
            assert basis.size == n * math.comb(n + d, d)
            assert basis.monomial_count == math.comb(n + d, d)


def test_basis_rejects_negative_degree():
    with pytest.raises(ValueError):
        PolyVectorBasis(square_chart(), -1)


def test_monomial_tables_match_finite_differences():
    chart = warped_product_metric().chart
    basis = PolyVectorBasis(chart, 3)
    pts = chart.sample(6, seed=4, shrink=0.2)
    mono, dmono, ddmono = basis.monomial_tables(pts, 2)
    h = 1e-5
    for j in range(chart.dim):
        e = np.zeros(chart.dim)
        e[j] = h
        up, = basis.monomial_tables(pts + e, 0)
        dn, = basis.monomial_tables(pts - e, 0)
        fd = (up - dn) / (2 * h)
        assert np.max(np.abs(fd - dmono[:, :, j])) < 1e-6
        dup = basis.monomial_tables(pts + e, 1)[1]
        ddn = basis.monomial_tables(pts - e, 1)[1]
        fd2 = (dup - ddn) / (2 * h)
        assert np.max(np.abs(fd2 - ddmono[:, :, :, j])) < 1e-6


def test_monomial_second_derivatives_symmetric():
    basis = PolyVectorBasis(square_chart(), 4)
    pts = square_chart().sample(5, seed=1)
    _, _, ddmono = basis.monomial_tables(pts, 2)
    assert np.array_equal(ddmono, np.swapaxes(ddmono, 2, 3))


def test_index_of_and_unit_field_values():
    basis = PolyVectorBasis(square_chart(), 2)
    X = unit_field(basis, (2, 0), 1)
    v = X.values(np.array([0.5, -0.3]))
    assert np.allclose(v, [0.0, 0.25])
    with pytest.raises(ValueError):
        basis.index_of((3, 0), 0)
    with pytest.raises(ValueError):
        basis.index_of((1, 0), 2)


def test_field_needs_full_coefficient_vector():
    basis = PolyVectorBasis(square_chart(), 1)
    with pytest.raises(ValueError):
        PolyVectorField(basis, np.zeros(basis.size - 1))


# ---------------------------------------------------------------------------
# The operator


def test_flat_affine_fields_annihilated():
    chart = square_chart()
    conn = zero_connection(chart)
    basis = PolyVectorBasis(chart, 1)
    pts = chart.sample(10, seed=2)
    for b in range(basis.size):
        c = np.zeros(basis.size)
        c[b] = 1.0
        th = nabla2_apply(conn, PolyVectorField(basis, c), pts)
        assert np.max(np.abs(th)) == 0.0


def test_flat_quadratic_component():
    chart = square_chart()
    conn = zero_connection(chart)
    basis = PolyVectorBasis(chart, 2)
    X = unit_field(basis, (2, 0), 0)   # X^1 = x^2
    th = nabla2_apply(conn, X, np.array([0.3, -0.2]))
    expected = np.zeros((2, 2, 2))
    expected[0, 0, 0] = 2.0
    assert np.allclose(th, expected, atol=1e-14)


def test_operator_batched_shape():
    chart = square_chart()
    conn = zero_connection(chart)
    basis = PolyVectorBasis(chart, 2)
    X = unit_field(basis, (1, 1), 0)
    pts = chart.sample(5, seed=0)
    th = nabla2_apply(conn, X, pts)
    assert th.shape == (5, 2, 2, 2)


def test_xi_construction_annihilates_second_coordinate_field():
    _, (plus, _minus) = xi_pair()
    basis = PolyVectorBasis(plus.chart, 2)
    th = nabla2_apply(plus, unit_field(basis, (0, 0), 1), np.array([0.3, 0.4]))
    assert np.max(np.abs(th)) < 1e-14


def test_xi_construction_first_coordinate_field():
    # Gamma^1_11 = 1 makes theta(d_1) vanish through the quadratic block.
    _, (plus, _minus) = xi_pair()
    basis = PolyVectorBasis(plus.chart, 2)
    th = nabla2_apply(plus, unit_field(basis, (0, 0), 0), np.array([0.1, -0.5]))
    assert np.max(np.abs(th)) < 1e-14


def fd_second_covariant(conn, X, p, h=1e-5):
    """Finite-difference nabla(nabla X) through the (1,1) tensor H = nabla X."""
    n = conn.chart.dim

    def H(q):
        Xv, dX, _ = X.tables(q[None])
        G = conn.values(q[None])[0]
        return dX[0] + np.einsum("ljk,k->lj", G, Xv[0])

    G0 = conn.values(p[None])[0]
    H0 = H(p)
    out = np.zeros((n, n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        dH = (H(p + e) - H(p - e)) / (2 * h)
        out[:, i, :] = (dH + np.einsum("lm,mj->lj", G0[:, i, :], H0)
                        - np.einsum("mj,lm->lj", G0[:, i, :], H0))
    return out


def test_operator_matches_fd_covariant_oracle():
    g = warped_product_metric()
    conn = levi_civita(g)
    basis = PolyVectorBasis(g.chart, 3)
    rng = np.random.default_rng(3)
    X = PolyVectorField(basis, rng.standard_normal(basis.size))
    for p in g.chart.sample(4, seed=9, shrink=0.25):
        th = nabla2_apply(conn, X, p)
        fd = fd_second_covariant(conn, X, p)
        assert np.max(np.abs(th - fd)) < 1e-6


# ---------------------------------------------------------------------------
# Solver


def test_flat_solution_space_has_dimension_six_at_every_degree():
    chart = square_chart()
    conn = zero_connection(chart)
    for d in (1, 2, 3, 4):
        S = solve_solution_space(conn, degree=d, points=32)
        assert S.k == 6
        assert np.max(S.residuals, initial=0.0) <= 1e-6


def test_flat_three_dimensional_chart():
    chart = ChartSpec(("x", "y", "z"), ((-1.0, 1.0),) * 3)
    conn = zero_connection(chart)
    for d in (1, 2):
        assert solve_solution_space(conn, degree=d, points=32).k == 12


def test_flat_periodic_chart_same_dimension():
    two_pi = 2.0 * math.pi
    chart = ChartSpec(("x", "y"), ((0.0, two_pi), (0.0, two_pi)),
                      periodic=(True, True))
    conn = zero_connection(chart)
    assert solve_solution_space(conn, degree=3, points=32).k == 6


def test_solution_rows_orthonormal():
    chart = square_chart()
    S = solve_solution_space(zero_connection(chart), degree=3, points=32)
    gram = S.coeffs @ S.coeffs.T
    assert np.allclose(gram, np.eye(S.k), atol=1e-12)


def test_solver_deterministic_and_seed_stable():
    chart = square_chart()
    conn = zero_connection(chart)
    a = solve_solution_space(conn, degree=2, points=32, seed=0)
    b = solve_solution_space(conn, degree=2, points=32, seed=0)
    assert np.array_equal(a.coeffs, b.coeffs)
    c = solve_solution_space(conn, degree=2, points=32, seed=5)
    assert c.k == a.k


def test_solver_rejects_underdetermined_collocation():
    chart = square_chart()
    with pytest.raises(ValueError, match="rows"):
        solve_solution_space(zero_connection(chart), degree=4, points=3)


def test_xi_construction_solution_space():
    _, (plus, minus) = xi_pair()
    S = solve_solution_space(plus, degree=3, points=48)
    assert S.k == 3
    # d_2 is a member: its coefficient vector lies in the solved span.
    e = np.zeros(S.basis.size)
    e[S.basis.index_of((0, 0), 1)] = 1.0
    proj = S.coeffs.T @ (S.coeffs @ e)
    assert np.max(np.abs(proj - e)) < 1e-8
    # the construction is a dual pair; the mirror branch solves the same way
    assert solve_solution_space(minus, degree=3, points=48).k == 3


def test_xi_membership_spans_y_weighted_field():
    _, (plus, _minus) = xi_pair()
    S = solve_solution_space(plus, degree=3, points=48)
    e = np.zeros(S.basis.size)
    e[S.basis.index_of((0, 1), 1)] = 1.0   # y d_2
    proj = S.coeffs.T @ (S.coeffs @ e)
    assert np.max(np.abs(proj - e)) < 1e-8


def test_warped_product_solution_space():
    conn = levi_civita(warped_product_metric())
    S = solve_solution_space(conn, degree=3, points=64)
    assert S.k == 2
    for expo in ((0, 0, 0), (1, 0, 0)):
        e = np.zeros(S.basis.size)
        e[S.basis.index_of(expo, 0)] = 1.0
        proj = S.coeffs.T @ (S.coeffs @ e)
        assert np.max(np.abs(proj - e)) < 1e-7
    assert S.condition > 1.0


def test_refinement_reports_stability():
    chart = square_chart()
    rep = refine_degree(zero_connection(chart), degrees=(1, 2, 3, 4), points=32)
    assert rep.dimensions == (6, 6, 6, 6)
    assert rep.stable and rep.stable_from == 1

    conn = levi_civita(warped_product_metric())
    rep = refine_degree(conn, degrees=(1, 2, 3), points=64)
    assert rep.dimensions == (2, 2, 2)
    assert rep.stable_from == 1


# ---------------------------------------------------------------------------
# Closure


def test_closure_flat():
    chart = square_chart()
    conn = zero_connection(chart)
    S = solve_solution_space(conn, degree=3, points=32)
    rep = product_closure_check(conn, S)
    assert rep.pairs == 36
    assert rep.product_residual <= 1e-5
    assert rep.bracket_residual <= 1e-5
    assert rep.associativity_residual <= 1e-5
    assert rep.passed


def test_closure_xi_construction():
    _, (plus, _minus) = xi_pair()
    S = solve_solution_space(plus, degree=3, points=48)
    rep = product_closure_check(plus, S)
    assert rep.passed


def test_closure_warped_product():
    conn = levi_civita(warped_product_metric())
    S = solve_solution_space(conn, degree=3, points=64)
    rep = product_closure_check(conn, S)
    assert rep.passed


def test_closure_single_field_basis():
    # Gamma(d_2, d_2) = 0 for the construction, so {d_2} closes on itself.
    _, (plus, _minus) = xi_pair()
    basis = PolyVectorBasis(plus.chart, 1)
    row = np.zeros(basis.size)
    row[basis.index_of((0, 0), 1)] = 1.0
    S = SolutionBasis.from_fields(basis, row)
    rep = product_closure_check(plus, S)
    assert rep.pairs == 1
    assert rep.passed


def test_closure_empty_basis():
    chart = square_chart()
    conn = zero_connection(chart)
    S = SolutionBasis(PolyVectorBasis(chart, 1), np.zeros((0, 6)),
                      np.zeros(0), np.zeros(0), 1.0)
    rep = product_closure_check(conn, S)
    assert rep.pairs == 0 and rep.passed


# ---------------------------------------------------------------------------
# Leaf rank


def test_leaf_rank_flat_full():
    chart = square_chart()
    S = solve_solution_space(zero_connection(chart), degree=2, points=32)
    pts = chart.sample(10, seed=3)
    assert np.all(leaf_rank(S, pts) == 2)


def test_leaf_rank_singular_radial_field():
    basis = PolyVectorBasis(square_chart(), 1)
    row = np.zeros(basis.size)
    row[basis.index_of((1, 0), 0)] = 1.0   # x d_x
    S = SolutionBasis.from_fields(basis, row)
    assert leaf_rank(S, np.array([0.5, 0.2])) == 1
    assert leaf_rank(S, np.array([0.0, 0.3])) == 0


def test_leaf_rank_invariant_under_basis_mixing():
    chart = square_chart()
    S = solve_solution_space(zero_connection(chart), degree=2, points=32)
    rng = np.random.default_rng(11)
    Q, _ = np.linalg.qr(rng.standard_normal((S.k, S.k)))
    mixed = SolutionBasis.from_fields(S.basis, Q @ S.coeffs)
    pts = chart.sample(8, seed=6)
    assert np.array_equal(leaf_rank(S, pts), leaf_rank(mixed, pts))


def test_leaf_rank_empty_basis():
    chart = square_chart()
    S = SolutionBasis(PolyVectorBasis(chart, 1), np.zeros((0, 6)),
                      np.zeros(0), np.zeros(0), 1.0)
    assert leaf_rank(S, np.array([0.1, 0.1])) == 0


# ---------------------------------------------------------------------------
# Tracing


def test_trace_vertical_line():
    _, (plus, _minus) = xi_pair()
    basis = PolyVectorBasis(plus.chart, 1)
    row = np.zeros(basis.size)
    row[basis.index_of((0, 0), 1)] = 1.0
    S = SolutionBasis.from_fields(basis, row)
    sample = trace_leaf(S, np.array([0.25, -0.5]), steps=40, h=0.02)
    assert not sample.exited
    assert sample.points.shape == (41, 2)
    assert np.max(np.abs(sample.points[:, 0] - 0.25)) < 1e-12
    assert np.all(np.diff(sample.points[:, 1]) > 0)


def test_trace_reports_domain_exit():
    _, (plus, _minus) = xi_pair()
    basis = PolyVectorBasis(plus.chart, 1)
    row = np.zeros(basis.size)
    row[basis.index_of((0, 0), 1)] = 1.0
    S = SolutionBasis.from_fields(basis, row)
    sample = trace_leaf(S, np.array([0.0, 0.0]), steps=100, h=0.1)
    assert sample.exited
    assert sample.points.shape[0] < 101
    for p in sample.points:
        assert plus.chart.contains(p, margin=1e-9)


def test_trace_periodic_chart_wraps():
    two_pi = 2.0 * math.pi
    chart = ChartSpec(("x", "y"), ((0.0, two_pi), (0.0, two_pi)),
                      periodic=(True, True))
    conn = zero_connection(chart)
    S = solve_solution_space(conn, degree=1, points=32)
    sample = trace_leaf(S, np.array([0.1, 0.1]), steps=400, h=0.5)
    assert not sample.exited
    assert sample.points.shape == (401, 2)
    assert np.all(sample.points >= 0.0) and np.all(sample.points <= two_pi)


def test_trace_rank_constant_along_leaf():
    chart = square_chart()
    S = solve_solution_space(zero_connection(chart), degree=2, points=32)
    sample = trace_leaf(S, np.array([0.0, 0.0]), steps=48, h=0.02)
    assert sample.rank == 2
    assert np.all(sample.ranks == 2)

    basis = PolyVectorBasis(chart, 1)
    row = np.zeros(basis.size)
    row[basis.index_of((1, 0), 0)] = 1.0
    radial = SolutionBasis.from_fields(basis, row)
    sample = trace_leaf(radial, np.array([0.4, 0.1]), steps=20, h=0.02)
    assert np.all(sample.ranks == 1)
    assert np.max(np.abs(sample.points[:, 1] - 0.1)) < 1e-12


def test_trace_refuses_rank_zero_seed():
    basis = PolyVectorBasis(square_chart(), 1)
    row = np.zeros(basis.size)
    row[basis.index_of((1, 0), 0)] = 1.0
    S = SolutionBasis.from_fields(basis, row)
    with pytest.raises(GeometryError, match="rank 0"):
        trace_leaf(S, np.array([0.0, 0.0]))


def test_trace_fills_hessian_residuals_on_request():
    g, (plus, _minus) = xi_pair()
    S = solve_solution_space(plus, degree=2, points=48)
    sample = trace_leaf(S, np.array([0.1, 0.2]), steps=10, h=0.01,
                        g=g, conn=plus)
    assert sample.curvature_residual is not None
    assert sample.curvature_residual < 1e-10
    assert sample.metric_symmetry_residual < 1e-10


# ---------------------------------------------------------------------------
# Leaf Hessian structure


def test_leaf_hessian_flat():
    chart = square_chart()
    g = euclid_metric(chart)
    conn = zero_connection(chart)
    S = solve_solution_space(conn, degree=2, points=32)
    curv, sym = leaf_hessian_check(g, conn, S, np.array([0.2, -0.4]))
    assert curv < 1e-12 and sym < 1e-12


def test_leaf_hessian_xi_construction():
    g, (plus, _minus) = xi_pair()
    S = solve_solution_space(plus, degree=3, points=48)
    curv, sym = leaf_hessian_check(g, plus, S, np.array([0.3, 0.1]))
    assert curv < 1e-5
    assert sym < 1e-6


def test_leaf_hessian_warped_product_kills_ambient_curvature():
    g = warped_product_metric()
    conn = levi_civita(g)
    S = solve_solution_space(conn, degree=3, points=64)
    p = np.array([0.3, 0.8, 1.2])
    # the ambient space is genuinely curved ...
    assert np.max(np.abs(curvature(conn, p))) > 1e-2
    # ... yet the one-dimensional leaf carries none of it
    curv, sym = leaf_hessian_check(g, conn, S, p)
    assert curv < 1e-5
    assert sym < 1e-6


def test_leaf_hessian_rank_zero_error():
    chart = square_chart()
    g = euclid_metric(chart)
    conn = zero_connection(chart)
    basis = PolyVectorBasis(chart, 1)
    row = np.zeros(basis.size)
    row[basis.index_of((1, 0), 0)] = 1.0
    S = SolutionBasis.from_fields(basis, row)
    with pytest.raises(GeometryError, match="rank 0"):
        leaf_hessian_check(g, conn, S, np.array([0.0, 0.5]))


def test_closure_report_failure_flag():
    rep = ClosureReport(4, 2e-3, 0.0, 0.0, 1e-5)
    assert not rep.passed
