"""Analysis registry and deterministic report documents.

Every analysis consumes a loaded spec plus a sampling seed and returns one
report block of residual rows, each row carrying its tolerance and verdict.
Reports render as plain text and as a JSON twin; with a fixed seed both are
byte-identical across runs (timing is kept out of the rendered forms and
only surfaces on stderr in the CLI).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import __version__
from .cone import cone_verify, isometry_residual_grid
from .expfam import (
    ExpFamilySpec,
    alpha_christoffel,
    alpha_connection_field,
    cubic_from_expectation,
    cubic_from_psi,
    fisher_from_expectation,
    fisher_from_psi,
    fisher_metric_field,
)
from .foliation import (
    LeafSample,
    leaf_hessian_check,
    leaf_rank,
    product_closure_check,
    refine_degree,
    solve_solution_space,
    trace_leaf,
)
from .specfile import ManifoldSpecFile
from .tensor import cubic_form, koszul_routes, levi_civita, hessian_criteria
from .topo import (
    MonodromyMatrix,
    is_periodic,
    mapping_torus_betti,
    parity_check,
    periodic_order,
    sl2_bounded,
)

__all__ = [
    "Row",
    "ReportBlock",
    "ReportDocument",
    "run_analyses",
    "render_text",
    "render_json",
    "cone_verify_block",
    "topo_betti_block",
    "foliate_traces",
    "export_plot_data",
    "DEFAULT_TOLERANCES",
]

DEFAULT_TOLERANCES = {
    "fisher": 1e-6,
    "cubic": 1e-5,
    "duality": 1e-6,
    "alpha-family": 1e-8,
    "hessian-criteria": 1e-8,
    "koszul": 1e-8,
    "cone-verify": None,
    "foliate": 1e-5,
    "topo-betti": None,
}


@dataclass(frozen=True)
class Row:
    """One report line: a value, an optional tolerance, an optional verdict."""

    label: str
    value: object
    tol: Optional[float] = None
    ok: Optional[bool] = None


def _residual_row(label: str, value: float, tol: float) -> Row:
    value = float(value)
    return Row(label, value, tol, value <= tol)


@dataclass(frozen=True)
class ReportBlock:
    name: str
    inputs: tuple[tuple[str, str], ...]
    rows: tuple[Row, ...]
    passed: bool
    error: Optional[str] = None
    wall_time: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class ReportDocument:
    version: str
    spec_name: str
    digest: str
    blocks: tuple[ReportBlock, ...]

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.blocks)


def _finish(name: str, inputs: list[tuple[str, str]], rows: list[Row]) -> ReportBlock:
    passed = all(r.ok for r in rows if r.ok is not None)
    return ReportBlock(name, tuple(inputs), tuple(rows), passed)


def _sample_params(spec: ManifoldSpecFile, count: int, seed: int,
                   shrink: float = 0.2) -> np.ndarray:
    return spec.chart.sample(count, seed=seed, shrink=shrink)


# ---------------------------------------------------------------------------
# Model analyses


def _run_fisher(spec: ManifoldSpecFile, seed: int, tol: float) -> ReportBlock:
    pts = _sample_params(spec, 12, seed)
    model = spec.model
    rows = []
    g = fisher_from_expectation(model, pts)
    if isinstance(model, ExpFamilySpec):
        g_psi = fisher_from_psi(model, pts)
        rows.append(_residual_row("psi route vs expectation route",
                                  np.max(np.abs(g_psi - g)), tol))
    rows.append(_residual_row("symmetry defect",
                              np.max(np.abs(g - np.swapaxes(g, 1, 2))), tol))
    min_eig = float(np.min(np.linalg.eigvalsh(g)))
    rows.append(Row("smallest eigenvalue", min_eig, None, min_eig > 0.0))
    return _finish("fisher", [("points", "12"), ("seed", str(seed))], rows)


def _run_cubic(spec: ManifoldSpecFile, seed: int, tol: float) -> ReportBlock:
    pts = _sample_params(spec, 12, seed)
    model = spec.model
    rows = []
    T = cubic_from_expectation(model, pts)
    if isinstance(model, ExpFamilySpec):
        T_psi = cubic_from_psi(model, pts)
        rows.append(_residual_row("psi route vs expectation route",
                                  np.max(np.abs(T_psi - T)), tol))
    sym = 0.0
    for perm in ((0, 2, 1, 3), (0, 3, 2, 1), (0, 1, 3, 2)):
        sym = max(sym, float(np.max(np.abs(T - np.transpose(T, perm)))))
    rows.append(_residual_row("total symmetry defect", sym, 1e-10))
    return _finish("cubic", [("points", "12"), ("seed", str(seed))], rows)


def _run_duality(spec: ManifoldSpecFile, seed: int, tol: float) -> ReportBlock:
    pts = _sample_params(spec, 8, seed)
    model = spec.model
    _, dg = fisher_metric_field(model).jets(pts, 1)
    rows = []
    for alpha in (1.0, 0.5):
        Ga = alpha_christoffel(model, pts, alpha)
        Gm = alpha_christoffel(model, pts, -alpha)
        pair = np.einsum("pkij->pijk", Ga) + np.einsum("pkji->pijk", Gm)
        rows.append(_residual_row(
            f"dual pair rebuilds dg (alpha = {alpha:g})",
            np.max(np.abs(pair - dg)), tol))
    return _finish("duality", [("points", "8"), ("seed", str(seed))], rows)


def _run_alpha_family(spec: ManifoldSpecFile, seed: int, tol: float) -> ReportBlock:
    pts = _sample_params(spec, 8, seed)
    model = spec.model
    g_field = fisher_metric_field(model)
    lc = levi_civita(g_field)
    conn0 = alpha_connection_field(model, 0.0)
    rows = [_residual_row("alpha = 0 vs Levi-Civita",
                          np.max(np.abs(conn0.values(pts) - lc.values(pts))), 1e-6)]
    T = cubic_from_expectation(model, pts)
    for alpha in (-1.0, -0.5, 0.5, 1.0):
        nabla_g = cubic_form(g_field, alpha_connection_field(model, alpha)).values(pts)
        rows.append(_residual_row(
            f"covariant dg equals alpha T (alpha = {alpha:g})",
            np.max(np.abs(nabla_g - alpha * T)), tol))
    return _finish("alpha-family", [("points", "8"), ("seed", str(seed))], rows)


# ---------------------------------------------------------------------------
# Geometry analyses


def _run_hessian_criteria(spec: ManifoldSpecFile, seed: int, tol: float) -> ReportBlock:
    g = spec.effective_metric()
    pts = _sample_params(spec, 16, seed, shrink=0.1)
    rep = hessian_criteria(g, spec.connection, pts, tol)
    rows = [
        _residual_row("flat premise: curvature", rep.flatness_residual, 1e-6),
        _residual_row("flat premise: torsion", rep.torsion_residual, 1e-6),
    ]
    rows += [_residual_row(name.replace("_", " "), value, tol)
             for name, value in rep.residuals.items()]
    rows.append(Row("criteria agree", "yes" if rep.agree else "no", None, rep.agree))
    return _finish("hessian-criteria",
                   [("points", "16"), ("seed", str(seed))], rows)


def _run_koszul(spec: ManifoldSpecFile, seed: int, tol: float) -> ReportBlock:
    g = spec.effective_metric()
    pts = _sample_params(spec, 16, seed, shrink=0.1)
    trace_route, logdet_route = koszul_routes(g, spec.connection, pts)
    rows = [_residual_row("trace route vs half-log-det route",
                          np.max(np.abs(trace_route - logdet_route)), tol)]
    ginv = g.inverse_values(pts)
    norms = np.sqrt(np.einsum("pij,pi,pj->p", ginv, trace_route, trace_route))
    rows.append(Row("mean Koszul norm", float(np.mean(norms)), None, None))
    return _finish("koszul", [("points", "16"), ("seed", str(seed))], rows)


def cone_verify_block(seed: int = 0) -> ReportBlock:
    """Full certified battery for the Lorentz-cone family as one block."""
    rep = cone_verify(seed=seed)
    rows = [
        Row("chi at the axis point", rep.chi0, None, None),
        _residual_row("truncation doubling shift", rep.chi0_shift, 1e-4),
        _residual_row("closed form vs quadrature", rep.char_cross_residual, 1e-3),
        _residual_row("metric: log-Hessian vs explicit matrix",
                      rep.metric_route_residual, 1e-10),
        _residual_row("metric: family route", rep.family_route_residual, 1e-3),
        _residual_row("density normalization defect", rep.normalization_error, 1e-3),
        Row("isometry grid points", rep.isometry_evaluated, None,
            rep.isometry_evaluated > 0),
        Row("isometry points excluded", rep.isometry_excluded, None, None),
        _residual_row("cylindrical isometry residual", rep.isometry_residual, 1e-6),
        _residual_row("Koszul parallelism residual", rep.koszul_parallelism, 1e-5),
        Row("Koszul norm mean", rep.koszul_norm_mean, None, None),
        _residual_row("Koszul norm spread", rep.koszul_norm_std, 1e-6),
        _residual_row("Koszul two-route residual", rep.koszul_route_residual, 1e-8),
        Row("Hessian criteria", "pass" if rep.hessian_passed else "fail",
            None, rep.hessian_passed),
    ]
    block = _finish("cone-verify",
                    [("truncation", "40"), ("grid", "64"), ("seed", str(seed))],
                    rows)
    return block


def _run_cone_verify(spec: ManifoldSpecFile, seed: int, tol) -> ReportBlock:
    return cone_verify_block(seed)


def _run_foliate(spec: ManifoldSpecFile, seed: int, tol: float,
                 degree: int | None = None, points: int | None = None) -> ReportBlock:
    conn, chart = spec.connection, spec.chart
    degree = spec.foliate_degree if degree is None else degree
    points = spec.foliate_points if points is None else points
    S = solve_solution_space(conn, chart, degree, points, seed)
    ref = refine_degree(conn, chart, degrees=tuple(range(1, degree + 1)),
                        points=points, seed=seed)
    rows = [
        Row("solution dimension", S.k, None, None),
        Row("dimension by degree",
            " ".join(f"{d}:{k}" for d, k in zip(ref.degrees, ref.dimensions)),
            None, None),
        Row("stable from degree",
            str(ref.stable_from) if ref.stable else "unstable", None, ref.stable),
        _residual_row("validation residual",
                      float(np.max(S.residuals, initial=0.0)), S.validation_tol),
        Row("collocation condition", S.condition, None, None),
    ]
    closure = product_closure_check(conn, S, seed=seed, tol=tol)
    rows += [
        _residual_row("product closure residual", closure.product_residual, tol),
        _residual_row("bracket closure residual", closure.bracket_residual, tol),
        _residual_row("associativity residual", closure.associativity_residual, tol),
    ]
    if spec.metric is not None and S.k > 0:
        p0 = chart.sample(1, seed=seed + 3, shrink=0.3)[0]
        if leaf_rank(S, p0) > 0:
            curv, sym = leaf_hessian_check(spec.metric, conn, S, p0)
            rows.append(_residual_row("leaf-projected curvature", curv, 1e-5))
            rows.append(_residual_row("leaf covariant-metric symmetry", sym, 1e-6))
    return _finish("foliate", [("degree", str(degree)), ("points", str(points)),
                               ("seed", str(seed))], rows)


def topo_betti_block(matrix: MonodromyMatrix | None,
                     batch_range: int | None) -> ReportBlock:
    """Betti/parity arithmetic for one matrix and/or a bounded family."""
    rows = []
    inputs = []
    if matrix is not None:
        (a, b), (c, d) = matrix.entries
        inputs.append(("matrix", f"{a},{b},{c},{d}"))
        periodic = is_periodic(matrix)
        rows.append(Row("periodic", "yes" if periodic else "no", None, periodic))
        if periodic:
            rows.append(Row("order", periodic_order(matrix), None, None))
            betti = mapping_torus_betti(matrix)
            rows.append(Row("Betti numbers", " ".join(str(v) for v in betti),
                            None, None))
            rows.append(Row("all Betti numbers odd",
                            "yes" if parity_check(betti) else "no",
                            None, parity_check(betti)))
    if batch_range is not None:
        inputs.append(("batch_range", str(batch_range)))
        family = sl2_bounded(batch_range)
        periodic_family = [A for A in family if is_periodic(A)]
        all_odd = all(parity_check(mapping_torus_betti(A)) for A in periodic_family)
        rows.append(Row("unimodular matrices in range", len(family), None, None))
        rows.append(Row("periodic members", len(periodic_family), None, None))
        rows.append(Row("all periodic Betti tuples odd",
                        "yes" if all_odd else "no", None, all_odd))
    if not rows:
        rows.append(Row("nothing to check", "no matrix, no batch range",
                        None, False))
    return _finish("topo-betti", inputs, rows)


def _run_topo_betti(spec: ManifoldSpecFile, seed: int, tol) -> ReportBlock:
    return topo_betti_block(spec.topo_matrix, spec.topo_batch_range)


_RUNNERS: dict[str, Callable] = {
    "fisher": _run_fisher,
    "cubic": _run_cubic,
    "duality": _run_duality,
    "alpha-family": _run_alpha_family,
    "hessian-criteria": _run_hessian_criteria,
    "koszul": _run_koszul,
    "cone-verify": _run_cone_verify,
    "foliate": _run_foliate,
    "topo-betti": _run_topo_betti,
}


def run_analyses(spec: ManifoldSpecFile, analyses=None, seed: int = 0,
                 tol_overrides: dict[str, float] | None = None,
                 foliate_degree: int | None = None,
                 foliate_points: int | None = None) -> ReportDocument:
    """Execute analyses in order and assemble the report document.

    An analysis that raises is recorded as a failed block with the error
    message; later analyses still run.
    """
    names = spec.analyses if analyses is None else tuple(analyses)
    overrides = tol_overrides or {}
    for key in overrides:
        if key not in DEFAULT_TOLERANCES:
            raise ValueError(f"unknown analysis {key!r} in tolerance override")
    blocks = []
    for name in names:
        if name not in _RUNNERS:
            raise ValueError(f"unknown analysis {name!r}")
        tol = overrides.get(name, DEFAULT_TOLERANCES[name])
        start = time.perf_counter()
        kwargs = {}
        if name == "foliate":
            kwargs = {"degree": foliate_degree, "points": foliate_points}
        try:
            block = _RUNNERS[name](spec, seed, tol, **kwargs)
        except Exception as err:  # noqa: BLE001 - recorded, not swallowed
            block = ReportBlock(name, (("seed", str(seed)),), (),
                                passed=False,
                                error=f"{type(err).__name__}: {err}")
        blocks.append(ReportBlock(block.name, block.inputs, block.rows,
                                  block.passed, block.error,
                                  time.perf_counter() - start))
    return ReportDocument(__version__, spec.name, spec.digest, tuple(blocks))


# ---------------------------------------------------------------------------
# Rendering


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return "%.6e" % value
    return str(value)


def render_text(doc: ReportDocument) -> str:
    """Human-readable report; byte-identical across runs at a fixed seed."""
    out = [f"igh {doc.version}",
           f"spec: {doc.spec_name}",
           f"sha256: {doc.digest}"]
    for block in doc.blocks:
        out.append("")
        out.append(f"== {block.name} ==")
        for key, value in block.inputs:
            out.append(f"input {key} = {value}")
        if block.error is not None:
            out.append(f"error: {block.error}")
        for row in block.rows:
            line = f"{row.label} = {_fmt(row.value)}"
            if row.tol is not None:
                line += f"  [tol {_fmt(row.tol)}]"
            if row.ok is not None:
                line += "  PASS" if row.ok else "  FAIL"
            out.append(line)
        out.append(f"block result: {'PASS' if block.passed else 'FAIL'}")
    out.append("")
    out.append(f"overall: {'PASS' if doc.passed else 'FAIL'}")
    return "\n".join(out) + "\n"


def render_json(doc: ReportDocument) -> str:
    """Structured twin of render_text with identical content."""
    payload = {
        "tool": "igh",
        "version": doc.version,
        "spec": doc.spec_name,
        "sha256": doc.digest,
        "overall": "PASS" if doc.passed else "FAIL",
        "blocks": [
            {
                "name": b.name,
                "inputs": {k: v for k, v in b.inputs},
                "error": b.error,
                "rows": [
                    {
                        "label": r.label,
                        "value": _fmt(r.value),
                        "tol": None if r.tol is None else _fmt(r.tol),
                        "verdict": None if r.ok is None
                        else ("PASS" if r.ok else "FAIL"),
                    }
                    for r in b.rows
                ],
                "result": "PASS" if b.passed else "FAIL",
            }
            for b in doc.blocks
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Plot-data export


def foliate_traces(spec: ManifoldSpecFile, seed: int = 0,
                   degree: int | None = None, points: int | None = None,
                   count: int = 3, steps: int = 120,
                   h: float = 0.02) -> list[LeafSample]:
    """Leaf traces from a few interior seeds, for CSV export."""
    conn, chart = spec.connection, spec.chart
    degree = spec.foliate_degree if degree is None else degree
    points = spec.foliate_points if points is None else points
    S = solve_solution_space(conn, chart, degree, points, seed)
    samples = []
    for start in chart.sample(count, seed=seed + 13, shrink=0.4):
        if leaf_rank(S, start) > 0:
            samples.append(trace_leaf(S, start, steps=steps, h=h))
    return samples


def export_plot_data(obj, path, coord_names=None) -> None:
    """Write CSV plot data: leaf traces, or the cone isometry grid.

    Accepts a LeafSample, a list of LeafSamples, or a ReportDocument whose
    blocks include cone-verify (exports the default isometry residual grid).
    """
    if isinstance(obj, LeafSample):
        obj = [obj]
    if isinstance(obj, list) and all(isinstance(s, LeafSample) for s in obj):
        dim = obj[0].points.shape[1] if obj else (len(coord_names) if coord_names else 0)
        names = list(coord_names) if coord_names else [f"x{i + 1}" for i in range(dim)]
        lines = [",".join(names + ["leaf_id"])]
        for leaf_id, sample in enumerate(obj):
            for point in sample.points:
                lines.append(",".join("%.17g" % v for v in point) + f",{leaf_id}")
        _write_lines(path, lines)
        return
    if isinstance(obj, ReportDocument):
        if any(b.name == "cone-verify" for b in obj.blocks):
            pts, residuals, _ = isometry_residual_grid()
            lines = [",".join(["t", "r", "a", "residual"])]
            for point, res in zip(pts, residuals):
                lines.append(",".join("%.17g" % v for v in point)
                             + ",%.17g" % res)
            _write_lines(path, lines)
            return
        raise ValueError("no plottable block in this report; "
                         "export leaf traces via foliate_traces instead")
    raise TypeError(f"cannot export plot data from {type(obj).__name__}")


def _write_lines(path, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
