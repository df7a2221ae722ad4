"""Acceptance gate: one test per shipped guarantee, one verdict line each.

Every test prints ``acceptance N (label): PASS/FAIL`` and enforces the
stated tolerances and runtime budgets.  These are the headline numbers;
unit-level coverage lives in the per-module test files.
"""

import time

import numpy as np
import pytest

from igh.analyses import render_json, render_text, run_analyses
from igh.cone import (
    char_closed,
    char_numeric,
    chi0,
    cone_fisher,
    cone_fisher_explicit,
    cone_koszul,
    cone_metric_field,
    density_normalization,
    flat_cone_connection,
    isometry_residual_grid,
    koszul_norm,
    koszul_parallelism_residual,
    sample_cone_points,
)
from igh.expfam import (
    alpha_christoffel,
    alpha_connection_field,
    cubic_from_expectation,
    cubic_from_psi,
    fisher_from_expectation,
    fisher_from_psi,
    fisher_metric_field,
    log_partition,
)
from igh.foliation import (
    leaf_hessian_check,
    product_closure_check,
    solve_solution_space,
)
from igh.specfile import fixture_names, fixture_path, load_spec
from igh.tensor import (
    ChartSpec,
    ConnectionField,
    MetricField,
    cubic_form,
    koszul_routes,
    levi_civita,
    xi_statistical,
)
from igh.topo import (
    InconsistentLeafError,
    MonodromyMatrix,
    NonPeriodicMonodromyError,
    classify_dichotomy,
    is_periodic,
    mapping_torus_betti,
    parity_check,
    sl2_bounded,
)


def verdict(number: int, label: str, checks: dict) -> None:
    bad = {k: v for k, v in checks.items() if not v[0]}
    ok = not bad
    print(f"acceptance {number} ({label}): {'PASS' if ok else 'FAIL'}")
    assert ok, f"failed checks: { {k: v[1] for k, v in bad.items()} }"


def load(name):
    return load_spec(fixture_path(name))


ZERO2 = [[["0", "0"], ["0", "0"]], [["0", "0"], ["0", "0"]]]


def flat_plane():
    chart = ChartSpec(("x", "y"), ((-1.0, 1.0), (-1.0, 1.0)))
    return chart, ConnectionField.from_grid(chart, ZERO2, torsion_free=True)


def flat_torus():
    width = 2.0 * np.pi
    chart = ChartSpec(("x", "y"), ((0.0, width), (0.0, width)), (True, True))
    return chart, ConnectionField.from_grid(chart, ZERO2, torsion_free=True)


def xi_plane():
    chart = ChartSpec(("x", "y"), ((-1.0, 1.0), (-1.0, 1.0)))
    g = MetricField.from_grid(chart, [["1", "0"], ["0", "1"]])
    plus, _ = xi_statistical(g, ("1", "0"), 1.0)
    return chart, g, plus


def curved_product():
    chart = ChartSpec(("t", "r", "a"), ((-1.0, 1.0), (0.2, 2.0), (0.2, 6.0)))
    rows = [["3", "0", "0"], ["0", "3", "0"], ["0", "0", "3*sinh(r)^2"]]
    g = MetricField.from_grid(chart, rows)
    return chart, g, levi_civita(g)


def test_acceptance_1_gaussian_closed_form():
    start = time.perf_counter()
    spec = load("gaussian.spec")
    model = spec.model
    theta = spec.chart.sample(20, seed=5, shrink=0.1)
    psi = log_partition(model, theta)
    closed = (-theta[:, 0] ** 2 / (4.0 * theta[:, 1])
              + 0.5 * np.log(np.pi) - 0.5 * np.log(-theta[:, 1]))
    psi_dev = float(np.max(np.abs(psi - closed)))
    g = fisher_from_psi(model, np.array([[0.0, -0.5]]))[0]
    fisher_dev = float(np.max(np.abs(g - np.diag([1.0, 2.0]))))
    elapsed = time.perf_counter() - start
    verdict(1, "gaussian closed form", {
        "psi matches closed form at 20 interior points":
            (psi_dev <= 1e-4, psi_dev),
        "fisher is diag(1, 2) at (0, -0.5)": (fisher_dev <= 1e-5, fisher_dev),
        "runs in under a second": (elapsed < 1.0, elapsed),
    })


def test_acceptance_2_dual_route_agreement():
    checks = {}
    for name in ("gaussian.spec", "bernoulli.spec"):
        spec = load(name)
        pts = spec.chart.sample(12, seed=2, shrink=0.2)
        g_dev = float(np.max(np.abs(fisher_from_psi(spec.model, pts)
                                    - fisher_from_expectation(spec.model, pts))))
        t_dev = float(np.max(np.abs(cubic_from_psi(spec.model, pts)
                                    - cubic_from_expectation(spec.model, pts))))
        checks[f"{name}: fisher routes agree"] = (g_dev <= 1e-6, g_dev)
        checks[f"{name}: cubic routes agree"] = (t_dev <= 1e-5, t_dev)
    verdict(2, "dual-route agreement", checks)


def test_acceptance_3_alpha_family():
    spec = load("gaussian.spec")
    model = spec.model
    pts = spec.chart.sample(10, seed=3, shrink=0.2)
    g_field = fisher_metric_field(model)
    lc = levi_civita(g_field).values(pts)
    zero_dev = float(np.max(np.abs(
        alpha_connection_field(model, 0.0).values(pts) - lc)))
    checks = {"alpha = 0 recovers Levi-Civita": (zero_dev <= 1e-6, zero_dev)}

    _, dg = g_field.jets(pts, 1)
    T = cubic_from_expectation(model, pts)
    for alpha in (1.0, 0.5):
        Ga = alpha_christoffel(model, pts, alpha)
        Gm = alpha_christoffel(model, pts, -alpha)
        pair = np.einsum("pkij->pijk", Ga) + np.einsum("pkji->pijk", Gm)
        dev = float(np.max(np.abs(pair - dg)))
        checks[f"+-{alpha:g} pair is metric-dual"] = (dev <= 1e-6, dev)
    for alpha in (-1.0, -0.5, 0.5, 1.0):
        conn = alpha_connection_field(model, alpha)
        dev = float(np.max(np.abs(cubic_form(g_field, conn).values(pts)
                                  - alpha * T)))
        checks[f"covariant dg = alpha T at alpha = {alpha:g}"] = (dev <= 1e-8, dev)
    verdict(3, "alpha-connection family", checks)


def test_acceptance_4_cone_battery():
    start = time.perf_counter()
    checks = {}

    chi_dev = abs(chi0() - 2.0 * np.pi)
    checks["characteristic at the axis is 2 pi"] = (chi_dev <= 1e-3, chi_dev)

    pts50 = sample_cone_points(50, seed=1)
    char_dev = max(abs(char_numeric(p) - char_closed(p)) for p in pts50)
    checks["homogeneous closed form at 50 points"] = (char_dev <= 1e-3, char_dev)

    pts100 = sample_cone_points(100, seed=2)
    hess_dev = float(np.max(np.abs(cone_fisher(pts100)
                                   - cone_fisher_explicit(pts100))))
    checks["log-Hessian equals explicit matrix at 100 points"] = (
        hess_dev <= 1e-10, hess_dev)

    norm_dev = max(abs(density_normalization(p) - 1.0) for p in pts50[:5])
    checks["density mass is unity"] = (norm_dev <= 1e-3, norm_dev)

    _, residuals, _ = isometry_residual_grid()
    iso_dev = float(np.max(residuals))
    checks["cylindrical pullback is an isometry"] = (iso_dev <= 1e-6, iso_dev)

    par_dev = float(koszul_parallelism_residual(pts100))
    checks["koszul form is parallel"] = (par_dev <= 1e-5, par_dev)

    norms = koszul_norm(pts100)
    spread = float(np.max(norms) - np.min(norms))
    checks["koszul norm is constant"] = (spread <= 1e-6, spread)
    sqrt3_dev = float(np.max(np.abs(norms - np.sqrt(3.0))))
    checks["koszul norm equals sqrt(3)"] = (sqrt3_dev <= 1e-6, sqrt3_dev)

    g = cone_metric_field()
    conn = flat_cone_connection()
    sample = sample_cone_points(30, seed=3)
    trace_route, logdet_route = koszul_routes(g, conn, sample)
    route_dev = float(np.max(np.abs(trace_route - logdet_route)))
    checks["koszul two-route agreement"] = (route_dev <= 1e-8, route_dev)
    beta_dev = float(np.max(np.abs(trace_route - cone_koszul(sample))))
    checks["field koszul matches cone closed form"] = (beta_dev <= 1e-8, beta_dev)

    elapsed = time.perf_counter() - start
    checks["runs in under thirty seconds"] = (elapsed < 30.0, elapsed)
    verdict(4, "cone exponential family", checks)


def test_acceptance_5_foliation_battery():
    start = time.perf_counter()
    checks = {}

    for label, (chart, conn) in (("plane", flat_plane()),
                                 ("torus", flat_torus())):
        for degree in (1, 2, 3, 4):
            S = solve_solution_space(conn, chart, degree=degree, points=48,
                                     seed=0)
            checks[f"flat {label} degree {degree} dimension"] = (S.k == 6, S.k)
            val = float(np.max(S.residuals, initial=0.0))
            checks[f"flat {label} degree {degree} validation"] = (
                val <= 1e-6, val)

    xi_chart, xi_g, xi_conn = xi_plane()
    prod_chart, prod_g, prod_conn = curved_product()
    solved = {}
    for label, (chart, conn, degree) in (
            ("plane", (*flat_plane(), 4)),
            ("torus", (*flat_torus(), 4)),
            ("xi", (xi_chart, xi_conn, 3)),
            ("product", (prod_chart, prod_conn, 3))):
        S = solve_solution_space(conn, chart, degree=degree, points=64, seed=0)
        solved[label] = S
        closure = product_closure_check(conn, S, seed=0)
        worst = max(closure.product_residual, closure.bracket_residual,
                    closure.associativity_residual)
        checks[f"{label} closure"] = (worst <= 1e-5, worst)

    euclid = MetricField.from_grid(flat_plane()[0], [["1", "0"], ["0", "1"]])
    for label, g, conn, S, p in (
            ("plane", euclid, flat_plane()[1], solved["plane"],
             np.array([0.3, -0.4])),
            ("xi", xi_g, xi_conn, solved["xi"], np.array([0.25, 0.4]))):
        curv, sym = leaf_hessian_check(g, conn, S, p)
        checks[f"{label} leaf curvature"] = (curv <= 1e-5, curv)
        checks[f"{label} leaf metric symmetry"] = (sym <= 1e-6, sym)

    elapsed = time.perf_counter() - start
    checks["runs in under twenty seconds"] = (elapsed < 20.0, elapsed)
    verdict(5, "hessian foliation solver", checks)


def test_acceptance_6_topology_census():
    start = time.perf_counter()
    checks = {}

    family = sl2_bounded(3)
    periodic = [A for A in family if is_periodic(A)]
    all_odd = all(parity_check(mapping_torus_betti(A)) for A in periodic)
    checks["every periodic mapping torus has all-odd Betti numbers"] = (
        all_odd and len(periodic) > 0, len(periodic))

    betti = mapping_torus_betti(MonodromyMatrix.from_flat(1, 0, 0, 1))
    checks["identity gives the 3-torus numbers"] = (
        betti == (1, 3, 3, 1), betti)

    rejected = []
    for entries in ((1, 1, 0, 1), (1, -3, 0, 1)):
        try:
            mapping_torus_betti(MonodromyMatrix.from_flat(*entries))
            rejected.append(False)
        except NonPeriodicMonodromyError:
            rejected.append(True)
    checks["trace-2 shears are rejected"] = (all(rejected), rejected)

    elapsed = time.perf_counter() - start
    checks["runs in under a second"] = (elapsed < 1.0, elapsed)
    verdict(6, "mapping-torus census", checks)


def test_acceptance_7_leaf_dichotomy():
    checks = {}

    checks["vanishing koszul and curvature mean flat"] = (
        classify_dichotomy(1e-12, 1e-12) == "Flat", None)

    beta = float(np.mean(koszul_norm(sample_cone_points(20, seed=4))))
    checks["cone koszul norm is macroscopic"] = (beta > 1e-6, beta)
    checks["cone classifies as a mapping torus"] = (
        classify_dichotomy(beta, 0.0) == "MappingTorus", beta)

    try:
        classify_dichotomy(1e-9, 0.5)
        raised = False
    except InconsistentLeafError:
        raised = True
    checks["flat koszul with curvature is rejected"] = (raised, None)

    verdict(7, "leaf dichotomy", checks)


def test_acceptance_8_report_determinism():
    checks = {}
    for name in fixture_names():
        spec = load(name)
        first = run_analyses(spec, seed=0)
        second = run_analyses(spec, seed=0)
        same = (render_text(first) == render_text(second)
                and render_json(first) == render_json(second))
        checks[f"{name} renders byte-identically"] = (same, name)
        checks[f"{name} passes"] = (first.passed, name)
    verdict(8, "report determinism", checks)
