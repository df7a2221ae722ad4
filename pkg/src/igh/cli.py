"""Command-line front end: spec ingestion, analyses, reports, CSV export.

Exit codes: 0 all analyses pass, 1 any failure, 2 bad usage or a spec that
does not load.  Reports go to stdout and are byte-identical across runs at
a fixed seed; wall-clock timings go to stderr only.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import __version__
from .analyses import (
    DEFAULT_TOLERANCES,
    ReportDocument,
    cone_verify_block,
    export_plot_data,
    foliate_traces,
    render_json,
    render_text,
    run_analyses,
)
from .specfile import ANALYSIS_NAMES, SpecError, load_spec
from .topo import MonodromyMatrix

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="igh",
        description="statistical/Hessian geometry verification toolkit")
    parser.add_argument("--version", action="version",
                        version=f"igh {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="run a spec file's analyses")
    check.add_argument("spec", help="path to a manifold spec file")
    check.add_argument("--analysis", default=None,
                       help="comma-separated subset to run instead of the "
                            "spec's list")
    check.add_argument("--seed", type=int, default=0,
                       help="sampling seed (default 0)")
    check.add_argument("--tol-override", action="append", default=[],
                       metavar="NAME=VALUE",
                       help="override one analysis tolerance, repeatable")
    check.add_argument("--export-csv", default=None, metavar="PATH",
                       help="write plot data (leaf traces or isometry grid)")
    check.add_argument("--json", default=None, metavar="PATH",
                       help="write the structured report twin")

    cone = sub.add_parser("cone", help="cone-family commands")
    cone_sub = cone.add_subparsers(dest="verb", required=True)
    cone_verify_p = cone_sub.add_parser(
        "verify", help="run the certified Lorentz-cone battery")
    cone_verify_p.add_argument("--seed", type=int, default=0)
    cone_verify_p.add_argument("--json", default=None, metavar="PATH")

    foliate = sub.add_parser("foliate", help="solve a spec's solution space")
    foliate.add_argument("spec")
    foliate.add_argument("--degree", type=int, default=None,
                         help="polynomial degree (default: spec or 4)")
    foliate.add_argument("--points", type=int, default=None,
                         help="collocation points (default: spec or 64)")
    foliate.add_argument("--seed", type=int, default=0)
    foliate.add_argument("--seed-point", default=None, metavar="c1,c2,...",
                         help="chart point to trace the exported leaf from "
                              "(default: a few sampled interior seeds)")
    foliate.add_argument("--export-csv", default=None, metavar="PATH",
                         help="write traced leaf points")
    foliate.add_argument("--json", default=None, metavar="PATH")

    topo = sub.add_parser("topo", help="leaf-topology arithmetic")
    topo_sub = topo.add_subparsers(dest="verb", required=True)
    betti = topo_sub.add_parser("betti", help="mapping-torus Betti numbers")
    betti.add_argument("--matrix", default=None, metavar="a,b,c,d",
                       help="integer monodromy matrix entries")
    betti.add_argument("--batch-range", type=int, default=None, metavar="N",
                       help="exhaustive parity table over entries in [-N, N]")
    betti.add_argument("--json", default=None, metavar="PATH")
    return parser


def _parse_overrides(pairs: list[str]) -> dict[str, float]:
    out = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep:
            raise SpecError("--tol-override", f"expected NAME=VALUE, got {pair!r}")
        if name not in DEFAULT_TOLERANCES:
            raise SpecError("--tol-override",
                            f"unknown analysis {name!r}; valid: "
                            + ", ".join(ANALYSIS_NAMES))
        try:
            out[name] = float(value)
        except ValueError as err:
            raise SpecError("--tol-override", f"bad number {value!r}") from err
    return out


def _parse_seed_point(text: str, chart) -> np.ndarray:
    try:
        values = np.array([float(v) for v in text.split(",")])
    except ValueError as err:
        raise SpecError("--seed-point",
                        f"entries must be numbers: {text!r}") from err
    if values.shape != (chart.dim,):
        raise SpecError("--seed-point",
                        f"expected {chart.dim} coordinates, got {len(values)}")
    if not chart.contains(values):
        raise SpecError("--seed-point", "point lies outside the chart box")
    return values


def _parse_analyses(text: str | None):
    if text is None:
        return None
    names = tuple(n.strip() for n in text.split(",") if n.strip())
    for n in names:
        if n not in ANALYSIS_NAMES:
            raise SpecError("--analysis",
                            f"unknown analysis {n!r}; valid: "
                            + ", ".join(ANALYSIS_NAMES))
    return names


def _emit(doc: ReportDocument, json_path: str | None) -> int:
    sys.stdout.write(render_text(doc))
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(render_json(doc))
    for block in doc.blocks:
        print(f"[time] {block.name}: {block.wall_time:.2f}s", file=sys.stderr)
    return 0 if doc.passed else 1


def _cmd_check(args) -> int:
    spec = load_spec(args.spec)
    doc = run_analyses(spec, analyses=_parse_analyses(args.analysis),
                       seed=args.seed,
                       tol_overrides=_parse_overrides(args.tol_override))
    code = _emit(doc, args.json)
    if args.export_csv is not None:
        names = list(spec.chart.coord_names) if spec.chart is not None else None
        ran = {b.name for b in doc.blocks}
        if "cone-verify" in ran:
            export_plot_data(doc, args.export_csv)
        elif "foliate" in ran:
            export_plot_data(foliate_traces(spec, seed=args.seed),
                             args.export_csv, coord_names=names)
        else:
            raise SpecError("--export-csv",
                            "nothing to export: needs a foliate or "
                            "cone-verify analysis")
    return code


def _cmd_cone_verify(args) -> int:
    start = time.perf_counter()
    block = cone_verify_block(seed=args.seed)
    block = type(block)(block.name, block.inputs, block.rows, block.passed,
                        block.error, time.perf_counter() - start)
    doc = ReportDocument(__version__, "cone", "-", (block,))
    return _emit(doc, args.json)


def _cmd_foliate(args) -> int:
    spec = load_spec(args.spec)
    if spec.connection is None:
        raise SpecError("[connection]", "foliate needs a [connection] section")
    start = None
    if args.seed_point is not None:
        start = _parse_seed_point(args.seed_point, spec.chart)
    doc = run_analyses(spec, analyses=("foliate",), seed=args.seed,
                       foliate_degree=args.degree, foliate_points=args.points)
    code = _emit(doc, args.json)
    if args.export_csv is not None:
        names = list(spec.chart.coord_names)
        if start is not None:
            from .foliation import solve_solution_space, trace_leaf
            from .tensor import GeometryError

            S = solve_solution_space(
                spec.connection, spec.chart,
                spec.foliate_degree if args.degree is None else args.degree,
                spec.foliate_points if args.points is None else args.points,
                args.seed)
            try:
                samples = [trace_leaf(S, start)]
            except GeometryError as err:
                raise SpecError("--seed-point", str(err)) from err
        else:
            samples = foliate_traces(spec, seed=args.seed, degree=args.degree,
                                     points=args.points)
        export_plot_data(samples, args.export_csv, coord_names=names)
    return code


def _cmd_topo_betti(args) -> int:
    matrix = None
    if args.matrix is not None:
        parts = args.matrix.split(",")
        try:
            entries = [int(p) for p in parts]
        except ValueError as err:
            raise SpecError("--matrix", f"entries must be integers: {args.matrix!r}") from err
        if len(entries) != 4:
            raise SpecError("--matrix", "expected four entries a,b,c,d")
        try:
            matrix = MonodromyMatrix.from_flat(*entries)
        except ValueError as err:
            raise SpecError("--matrix", str(err)) from err
    if matrix is None and args.batch_range is None:
        raise SpecError("--matrix", "give --matrix a,b,c,d and/or --batch-range N")
    from .analyses import topo_betti_block

    block = topo_betti_block(matrix, args.batch_range)
    doc = ReportDocument(__version__, "topo", "-", (block,))
    return _emit(doc, args.json)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        if args.command == "check":
            code = _cmd_check(args)
        elif args.command == "cone":
            code = _cmd_cone_verify(args)
        elif args.command == "foliate":
            code = _cmd_foliate(args)
        else:
            code = _cmd_topo_betti(args)
    except SpecError as err:
        print(f"igh: error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"igh: error: {err}", file=sys.stderr)
        return 2
    print(f"[time] total: {time.perf_counter() - start:.2f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
