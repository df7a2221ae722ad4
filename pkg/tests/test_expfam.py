"""Statistical-model checks: log-partition jets vs score-moment expectations."""

import numpy as np
import pytest

from igh.expr import EvalDomainError
from igh.expfam import (
    ExpFamilySpec,
    GeneralModelSpec,
    NormalizationError,
    SampleSpace,
    alpha_christoffel,
    alpha_connection_field,
    cubic_from_expectation,
    cubic_from_psi,
    discrete_space,
    fisher_from_expectation,
    fisher_from_psi,
    fisher_metric_field,
    gauss_legendre_space,
    gaussian_natural_inverse,
    gaussian_natural_map,
    log_partition,
    log_partition_jet,
)
from igh.tensor import (
    ChartSpec,
    ConnectionField,
    hessian_criteria,
    levi_civita,
    lower_connection,
)

# ---------------------------------------------------------------------------
# Fixtures


def bernoulli():
    chart = ChartSpec(("t",), ((-4.0, 4.0),))
    return ExpFamilySpec(discrete_space([0.0, 1.0]), "0", ("x",), chart)


def gauss_natural():
    chart = ChartSpec(("t1", "t2"), ((-1.5, 1.5), (-2.0, -0.3)))
    grid = gauss_legendre_space(-15.0, 15.0, 400)
    return ExpFamilySpec(grid, "0", ("x", "x^2"), chart)


def gauss_musigma():
    chart = ChartSpec(("m", "s"), ((-2.0, 2.0), (0.5, 1.6)))
    grid = gauss_legendre_space(-15.0, 15.0, 400)
    ell = "-(x - m)^2/(2*s^2) - log(s) - 0.5*log(2*pi)"
    return GeneralModelSpec(grid, ell, chart)


def gauss_psi_exact(t1, t2):
    return -t1 ** 2 / (4.0 * t2) + 0.5 * np.log(np.pi / (-t2))


def gauss_cubic_exact(t1, t2):
    T = np.zeros((2, 2, 2))
    T[0, 0, 1] = T[0, 1, 0] = T[1, 0, 0] = 1.0 / (2.0 * t2 ** 2)
    T[0, 1, 1] = T[1, 0, 1] = T[1, 1, 0] = -t1 / t2 ** 3
    T[1, 1, 1] = -1.0 / t2 ** 3 + 1.5 * t1 ** 2 / t2 ** 4
    return T


def interior(spec, count=8, seed=5):
    return spec.chart.sample(count, seed=seed, shrink=0.2)


# ---------------------------------------------------------------------------
# Sample spaces


def test_discrete_space_defaults():
    sp = discrete_space([0.0, 1.0, 2.0])
    assert sp.kind == "discrete"
    assert sp.size == 3 and sp.dim == 1
    assert np.all(sp.weights == 1.0)
    assert sp.var_names == ("x",)


def test_gauss_legendre_space_integrates_polynomials():
    sp = gauss_legendre_space(-1.0, 2.0, 12)
    assert sp.kind == "grid"
    x = sp.points[:, 0]
    assert np.sum(sp.weights) == pytest.approx(3.0, abs=1e-13)
    assert np.sum(sp.weights * x ** 2) == pytest.approx(3.0, abs=1e-12)


def test_weights_must_be_positive():
    with pytest.raises(ValueError):
        SampleSpace("discrete", [0.0, 1.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        SampleSpace("discrete", [0.0, 1.0], [1.0, -2.0])


def test_points_must_be_distinct():
    with pytest.raises(ValueError):
        discrete_space([0.0, 1.0, 1.0])


def test_empty_space_rejected():
    with pytest.raises(ValueError):
        discrete_space([])


def test_weight_count_mismatch():
    with pytest.raises(ValueError):
        SampleSpace("grid", [0.0, 1.0], [1.0, 1.0, 1.0])


def test_bad_kind_rejected():
    with pytest.raises(ValueError):
        SampleSpace("continuous", [0.0], [1.0])


def test_var_names_match_point_dimension():
    pts = np.array([[0.0, 1.0], [1.0, 0.0]])
    sp = SampleSpace("discrete", pts, [1.0, 1.0], ("u", "v"))
    assert sp.dim == 2
    with pytest.raises(ValueError):
        SampleSpace("discrete", pts, [1.0, 1.0], ("u",))


# ---------------------------------------------------------------------------
# Declaration validation


def test_stat_count_must_match_chart():
    chart = ChartSpec(("t1", "t2"), ((-1.0, 1.0), (-1.0, -0.1)))
    with pytest.raises(ValueError):
        ExpFamilySpec(discrete_space([0.0, 1.0]), "0", ("x",), chart)


def test_unknown_sample_variable_rejected():
    chart = ChartSpec(("t",), ((-1.0, 1.0),))
    with pytest.raises(ValueError):
        ExpFamilySpec(discrete_space([0.0, 1.0]), "y", ("x",), chart)
    with pytest.raises(ValueError):
        GeneralModelSpec(discrete_space([0.0, 1.0]), "x + q - t", chart)


def test_sample_parameter_name_collision_rejected():
    chart = ChartSpec(("x",), ((-1.0, 1.0),))
    with pytest.raises(ValueError):
        ExpFamilySpec(discrete_space([0.0, 1.0]), "0", ("x",), chart)


def test_string_declarations_are_parsed():
    fam = bernoulli()
    from igh.expr import variables

    assert variables(fam.carrier) == set()
    assert variables(fam.stats[0]) == {"x"}


# ---------------------------------------------------------------------------
# Log-partition function


def test_bernoulli_psi_at_origin():
    assert log_partition(bernoulli(), [0.0]) == pytest.approx(np.log(2.0), abs=1e-14)


def test_bernoulli_psi_closed_form():
    fam = bernoulli()
    for t in (-3.0, -0.7, 0.0, 1.1, 3.9):
        assert log_partition(fam, [t]) == pytest.approx(np.log1p(np.exp(t)), abs=1e-12)


def test_gaussian_psi_standard_normal_value():
    val = log_partition(gauss_natural(), [0.0, -0.5])
    assert val == pytest.approx(0.5 * np.log(2.0 * np.pi), abs=1e-10)


def test_gaussian_psi_closed_form_across_domain():
    fam = gauss_natural()
    pts = interior(fam, count=6)
    got = log_partition(fam, pts)
    want = [gauss_psi_exact(t1, t2) for t1, t2 in pts]
    assert np.max(np.abs(got - want)) < 1e-9


def test_carrier_shift_moves_psi_by_constant():
    fam = gauss_natural()
    shifted = ExpFamilySpec(fam.sample, "0.75", fam.stats, fam.chart)
    th = np.array([0.4, -0.8])
    assert log_partition(shifted, th) - log_partition(fam, th) == pytest.approx(0.75, abs=1e-12)


def test_psi_batch_matches_loop():
    fam = gauss_natural()
    pts = interior(fam, count=5)
    batch = log_partition(fam, pts)
    single = [log_partition(fam, p) for p in pts]
    assert np.max(np.abs(batch - single)) < 1e-14


def test_parameter_outside_domain_rejected():
    with pytest.raises(ValueError, match="outside"):
        log_partition(bernoulli(), [7.0])


def test_partition_overflow_after_shift():
    huge = SampleSpace("discrete", [0.0, 1.0], [1e308, 1e308])
    fam = ExpFamilySpec(huge, "0", ("x",), ChartSpec(("t",), ((-1.0, 1.0),)))
    with pytest.raises(EvalDomainError):
        log_partition(fam, [0.0])


# ---------------------------------------------------------------------------
# Fisher metric


def test_bernoulli_fisher_quarter():
    got = fisher_from_psi(bernoulli(), [0.0])
    assert got.shape == (1, 1)
    assert got[0, 0] == pytest.approx(0.25, abs=1e-13)


def test_gaussian_fisher_at_standard_point():
    got = fisher_from_psi(gauss_natural(), [0.0, -0.5])
    assert np.max(np.abs(got - np.diag([1.0, 2.0]))) < 1e-10


def test_fisher_symmetric_positive_definite():
    fam = gauss_natural()
    g = fisher_from_psi(fam, interior(fam))
    assert np.max(np.abs(g - np.swapaxes(g, 1, 2))) < 1e-12
    assert np.min(np.linalg.eigvalsh(g)) > 0.0


def test_fisher_routes_agree():
    for fam in (bernoulli(), gauss_natural()):
        pts = interior(fam)
        a = fisher_from_psi(fam, pts)
        b = fisher_from_expectation(fam, pts)
        assert np.max(np.abs(a - b)) < 1e-6


# ---------------------------------------------------------------------------
# Cubic form


def test_bernoulli_cubic_vanishes_at_origin():
    assert abs(cubic_from_psi(bernoulli(), [0.0])[0, 0, 0]) < 1e-13


def test_gaussian_cubic_closed_form():
    fam = gauss_natural()
    for t1, t2 in interior(fam, count=4):
        got = cubic_from_psi(fam, [t1, t2])
        assert np.max(np.abs(got - gauss_cubic_exact(t1, t2))) < 1e-8


def test_cubic_routes_agree():
    for fam in (bernoulli(), gauss_natural()):
        pts = interior(fam)
        a = cubic_from_psi(fam, pts)
        b = cubic_from_expectation(fam, pts)
        assert np.max(np.abs(a - b)) < 1e-5


def test_cubic_total_symmetry():
    fam = gauss_natural()
    pts = interior(fam)
    for T in (cubic_from_psi(fam, pts), cubic_from_expectation(fam, pts)):
        for perm in ((0, 2, 1, 3), (0, 3, 2, 1), (0, 1, 3, 2)):
            assert np.max(np.abs(T - np.transpose(T, perm))) < 1e-10


# ---------------------------------------------------------------------------
# General models in non-natural coordinates


def test_musigma_fisher_matrix():
    model = gauss_musigma()
    for m, s in interior(model, count=6, seed=11):
        g = fisher_from_expectation(model, [m, s])
        want = np.diag([1.0 / s ** 2, 2.0 / s ** 2])
        assert np.max(np.abs(g - want)) < 1e-5


def test_one_point_sample_space_gives_zero_matrix():
    sp = discrete_space([0.0])
    model = GeneralModelSpec(sp, "0*t", ChartSpec(("t",), ((-1.0, 1.0),)))
    assert np.max(np.abs(fisher_from_expectation(model, [0.3]))) == 0.0


def test_unnormalized_model_rejected():
    model = gauss_musigma()
    broken = GeneralModelSpec(model.sample, "-(x - m)^2/(2*s^2) - log(s)", model.chart)
    with pytest.raises(NormalizationError):
        fisher_from_expectation(broken, [0.0, 1.0])


def test_tiny_normalization_drift_is_renormalized():
    model = gauss_musigma()
    c = 5e-7
    drifted = GeneralModelSpec(
        model.sample, f"-(x - m)^2/(2*s^2) - log(s) - 0.5*log(2*pi) + {c!r}", model.chart)
    a = fisher_from_expectation(model, [0.3, 1.1])
    b = fisher_from_expectation(drifted, [0.3, 1.1])
    assert np.max(np.abs(a - b)) < 1e-9


def test_musigma_quantities_transform_from_natural():
    fam = gauss_natural()
    model = gauss_musigma()
    for m, s in ((0.0, 1.0), (0.7, 1.2), (-0.9, 0.9)):
        th = gaussian_natural_map(m, s)
        J = np.array([[1.0 / s ** 2, -2.0 * m / s ** 3], [0.0, 1.0 / s ** 3]])
        g_nat = fisher_from_psi(fam, th)
        g_ms = fisher_from_expectation(model, [m, s])
        assert np.max(np.abs(g_ms - J.T @ g_nat @ J)) < 1e-8
        T_nat = cubic_from_psi(fam, th)
        T_ms = cubic_from_expectation(model, [m, s])
        pulled = np.einsum("ia,jb,kc,ijk->abc", J, J, J, T_nat)
        assert np.max(np.abs(T_ms - pulled)) < 1e-8


def test_linear_reparametrization_congruence():
    fam = gauss_natural()
    A = np.array([[1.0, 0.4], [-0.3, 0.8]])
    stats = (
        f"{float(A[0, 0])!r}*x + {float(A[1, 0])!r}*x^2",
        f"{float(A[0, 1])!r}*x + {float(A[1, 1])!r}*x^2",
    )
    theta0 = np.array([0.2, -0.6])
    eta0 = np.linalg.solve(A, theta0)
    chart = ChartSpec(("e1", "e2"), tuple((v - 0.05, v + 0.05) for v in eta0))
    refam = ExpFamilySpec(fam.sample, "0", stats, chart)
    assert log_partition(refam, eta0) == pytest.approx(log_partition(fam, theta0), abs=1e-12)
    g_eta = fisher_from_psi(refam, eta0)
    g_theta = fisher_from_psi(fam, theta0)
    assert np.max(np.abs(g_eta - A.T @ g_theta @ A)) < 1e-6


# ---------------------------------------------------------------------------
# Alpha connections


def test_natural_coordinates_are_one_flat():
    for fam in (bernoulli(), gauss_natural()):
        G = alpha_christoffel(fam, interior(fam), 1.0)
        assert np.max(np.abs(G)) < 1e-6


def test_alpha_zero_matches_levi_civita():
    for spec in (bernoulli(), gauss_natural(), gauss_musigma()):
        pts = interior(spec)
        field = fisher_metric_field(spec)
        g0, = field.jets(pts, 0)
        lc = lower_connection(levi_civita(field).values(pts), g0)
        got = alpha_christoffel(spec, pts, 0.0)
        assert np.max(np.abs(got - lc)) < 1e-6


def test_alpha_family_is_affine_in_alpha():
    fam = gauss_natural()
    pts = interior(fam, count=4)
    T = cubic_from_expectation(fam, pts)
    for a, b in ((-1.0, 1.0), (0.3, -0.7), (0.0, 2.0)):
        Ga = alpha_christoffel(fam, pts, a)
        Gb = alpha_christoffel(fam, pts, b)
        assert np.max(np.abs(Ga - Gb - 0.5 * (b - a) * T)) < 1e-10


def test_alpha_duality_reproduces_metric_derivative():
    for spec in (gauss_natural(), gauss_musigma()):
        pts = interior(spec, count=4)
        _, dg = fisher_metric_field(spec).jets(pts, 1)
        for alpha in (0.0, 0.5, 1.0):
            Ga = alpha_christoffel(spec, pts, alpha)
            Gm = alpha_christoffel(spec, pts, -alpha)
            pair = np.einsum("pkij->pijk", Ga) + np.einsum("pkji->pijk", Gm)
            assert np.max(np.abs(pair - dg)) < 1e-8


# ---------------------------------------------------------------------------
# Field adapters


def test_fisher_field_derivative_matches_finite_differences():
    for spec in (gauss_natural(), gauss_musigma()):
        field = fisher_metric_field(spec)
        pts = interior(spec, count=4)
        g0, dg = field.jets(pts, 1)
        h = 1e-5
        for k in range(2):
            step = np.zeros(2)
            step[k] = h
            fd = (field.values(pts + step) - field.values(pts - step)) / (2.0 * h)
            assert np.max(np.abs(fd - dg[..., k])) < 1e-6


def test_alpha_connection_field_consistency():
    fam = gauss_natural()
    field = alpha_connection_field(fam, 0.4)
    pts = interior(fam, count=4)
    g0, = fisher_metric_field(fam).jets(pts, 0)
    low = alpha_christoffel(fam, pts, 0.4)
    raised = np.einsum("plk,pijk->plij", np.linalg.inv(g0), low)
    assert np.max(np.abs(field.values(pts) - raised)) < 1e-12
    _, dG = field.jets(pts, 1)
    h = 1e-5
    for k in range(2):
        step = np.zeros(2)
        step[k] = h
        fd = (field.values(pts + step) - field.values(pts - step)) / (2.0 * h)
        assert np.max(np.abs(fd - dG[..., k])) < 1e-6


def test_quadrature_fisher_metric_is_hessian_in_natural_coordinates():
    fam = gauss_natural()
    field = fisher_metric_field(fam)
    zero = [[["0", "0"], ["0", "0"]], [["0", "0"], ["0", "0"]]]
    flat = ConnectionField.from_grid(fam.chart, zero, torsion_free=True)
    report = hessian_criteria(field, flat, interior(fam, count=12))
    assert report.is_hessian
    assert report.agree


# ---------------------------------------------------------------------------
# Gaussian natural-coordinate map


def test_natural_map_known_values():
    assert np.allclose(gaussian_natural_map(0.0, 1.0), [0.0, -0.5])
    assert np.allclose(gaussian_natural_map(2.0, 1.0), [2.0, -0.5])


def test_natural_map_round_trip():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m = rng.uniform(-5.0, 5.0)
        s = rng.uniform(0.1, 4.0)
        t1, t2 = gaussian_natural_map(m, s)
        back = gaussian_natural_inverse(t1, t2)
        assert np.max(np.abs(back - [m, s])) < 1e-12


def test_natural_map_domain_errors():
    with pytest.raises(ValueError):
        gaussian_natural_map(0.0, 0.0)
    with pytest.raises(ValueError):
        gaussian_natural_map(0.0, -1.0)
    with pytest.raises(ValueError):
        gaussian_natural_inverse(0.0, 0.5)


def test_log_partition_jet_orders():
    fam = gauss_natural()
    jet = log_partition_jet(fam, [0.1, -0.7], order=3)
    assert jet.val.shape == ()
    assert jet.d1.shape == (2,)
    assert jet.d2.shape == (2, 2)
    assert jet.d3.shape == (2, 2, 2)
    grad = jet.d1
    h = 1e-6
    fd = (log_partition(fam, [0.1 + h, -0.7]) - log_partition(fam, [0.1 - h, -0.7])) / (2 * h)
    assert grad[0] == pytest.approx(fd, abs=1e-7)
