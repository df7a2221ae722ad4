"""Declarative manifold-spec files: schema-1 TOML loader and validation.

A spec file declares a chart, optionally a metric (expression matrix), one
connection source, optionally a likelihood model, and the analyses to run.
Validation failures raise SpecError carrying the offending key path, e.g.
``[connection].eps``.  The documented schema lives in docs/specfile.md.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

try:
    import tomllib
except ImportError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from .expfam import (
    ExpFamilySpec,
    GeneralModelSpec,
    SampleSpace,
    alpha_connection_field,
    discrete_space,
    fisher_metric_field,
    gauss_legendre_space,
)
from .tensor import ChartSpec, ConnectionField, MetricField, levi_civita, xi_statistical
from .topo import MonodromyMatrix

__all__ = [
    "SCHEMA_VERSION",
    "SpecError",
    "ManifoldSpecFile",
    "load_spec",
    "loads_spec",
    "fixture_path",
    "fixture_names",
]

SCHEMA_VERSION = 1

ANALYSIS_NAMES = (
    "fisher",
    "cubic",
    "duality",
    "alpha-family",
    "hessian-criteria",
    "koszul",
    "cone-verify",
    "foliate",
    "topo-betti",
)

# analyses that can run without a [chart] section
_CHARTLESS = {"cone-verify", "topo-betti"}

_MODEL_REQUIRED = {"fisher", "cubic", "duality", "alpha-family"}
_CONNECTION_REQUIRED = {"hessian-criteria", "foliate", "koszul"}


class SpecError(ValueError):
    """Schema violation; ``key`` is the offending key path."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


def _get(table: dict, key: str, kind, where: str, required: bool = True,
         default: Any = None):
    if key not in table:
        if required:
            raise SpecError(f"{where}.{key}", "required key is missing")
        return default
    value = table[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise SpecError(f"{where}.{key}", f"expected an integer, got {value!r}")
    elif not isinstance(value, kind):
        raise SpecError(f"{where}.{key}", f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _string_list(table: dict, key: str, where: str, required: bool = True):
    value = _get(table, key, list, where, required)
    if value is None:
        return None
    if not all(isinstance(v, str) for v in value):
        raise SpecError(f"{where}.{key}", "expected a list of strings")
    return list(value)


def _known_keys(table: dict, allowed: set[str], where: str) -> None:
    for key in table:
        if key not in allowed:
            raise SpecError(f"{where}.{key}", "unknown key")


@dataclass(frozen=True, eq=False)
class ManifoldSpecFile:
    """A loaded, validated spec: built fields plus the raw run options."""

    name: str
    digest: str
    chart: Optional[ChartSpec]
    metric: Optional[MetricField]
    connection: Optional[ConnectionField]
    connection_kind: Optional[str]
    model: Optional[Union[ExpFamilySpec, GeneralModelSpec]]
    analyses: tuple[str, ...]
    foliate_degree: int
    foliate_points: int
    topo_matrix: Optional[MonodromyMatrix]
    topo_batch_range: Optional[int]

    def effective_metric(self) -> MetricField:
        """The declared metric, or the model's Fisher metric field."""
        if self.metric is not None:
            return self.metric
        if self.model is not None:
            return fisher_metric_field(self.model)
        raise SpecError("[metric]", "no metric and no model to derive one from")


def _build_chart(table: dict) -> ChartSpec:
    where = "[chart]"
    _known_keys(table, {"names", "box", "periodic"}, where)
    names = _string_list(table, "names", where)
    box = _get(table, "box", list, where)
    if not all(isinstance(b, list) and len(b) == 2
               and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in b)
               for b in box):
        raise SpecError(f"{where}.box", "expected a list of [lo, hi] number pairs")
    periodic = _get(table, "periodic", list, where, required=False)
    flags: tuple[bool, ...] = ()
    if periodic is not None:
        if not all(isinstance(v, bool) for v in periodic):
            raise SpecError(f"{where}.periodic", "expected a list of booleans")
        flags = tuple(periodic)
    try:
        return ChartSpec(tuple(names), tuple((float(lo), float(hi)) for lo, hi in box), flags)
    except ValueError as err:
        raise SpecError(where, str(err)) from err


def _build_metric(table: dict, chart: ChartSpec) -> MetricField:
    where = "[metric]"
    _known_keys(table, {"rows"}, where)
    rows = _get(table, "rows", list, where)
    try:
        return MetricField.from_grid(chart, rows)
    except Exception as err:
        raise SpecError(f"{where}.rows", str(err)) from err


def _build_sample(table: dict, where: str) -> SampleSpace:
    kind = _get(table, "kind", str, where)
    var = _get(table, "var", str, where, required=False, default="x")
    if kind == "discrete":
        values = _get(table, "values", list, where)
        weights = _get(table, "weights", list, where, required=False)
        try:
            return discrete_space(values, weights, var=var)
        except ValueError as err:
            raise SpecError(f"{where}.values", str(err)) from err
    if kind == "grid":
        lo = _get(table, "lo", float, where)
        hi = _get(table, "hi", float, where)
        count = _get(table, "count", int, where)
        try:
            return gauss_legendre_space(lo, hi, count, var=var)
        except ValueError as err:
            raise SpecError(f"{where}", str(err)) from err
    raise SpecError(f"{where}.kind", f"expected 'discrete' or 'grid', got {kind!r}")


_SAMPLE_KEYS = {"kind", "var", "values", "weights", "lo", "hi", "count"}


def _build_expfam(table: dict, chart: ChartSpec) -> ExpFamilySpec:
    where = "[expfam]"
    _known_keys(table, _SAMPLE_KEYS | {"carrier", "stats"}, where)
    sample = _build_sample(table, where)
    carrier = _get(table, "carrier", str, where, required=False, default="0")
    stats = _string_list(table, "stats", where)
    try:
        return ExpFamilySpec(sample, carrier, tuple(stats), chart)
    except Exception as err:
        raise SpecError(f"{where}.stats", str(err)) from err


def _build_model(table: dict, chart: ChartSpec) -> GeneralModelSpec:
    where = "[model]"
    _known_keys(table, _SAMPLE_KEYS | {"logdensity"}, where)
    sample = _build_sample(table, where)
    logdensity = _get(table, "logdensity", str, where)
    try:
        return GeneralModelSpec(sample, logdensity, chart)
    except Exception as err:
        raise SpecError(f"{where}.logdensity", str(err)) from err


def _build_connection(table: dict, chart: Optional[ChartSpec],
                      metric: Optional[MetricField],
                      model) -> tuple[ConnectionField, str]:
    where = "[connection]"
    kind = _get(table, "kind", str, where)
    if kind == "christoffel":
        _known_keys(table, {"kind", "grid", "torsion_free"}, where)
        if chart is None:
            raise SpecError(where, "a christoffel grid needs a [chart] section")
        grid = _get(table, "grid", list, where)
        torsion_free = _get(table, "torsion_free", bool, where,
                            required=False, default=False)
        try:
            conn = ConnectionField.from_grid(chart, grid, torsion_free=torsion_free)
        except Exception as err:
            raise SpecError(f"{where}.grid", str(err)) from err
        return conn, kind
    if kind == "levi-civita":
        _known_keys(table, {"kind"}, where)
        if metric is None:
            raise SpecError(where, "levi-civita needs a [metric] section")
        return levi_civita(metric), kind
    if kind == "xi-construction":
        _known_keys(table, {"kind", "xi", "eps", "branch"}, where)
        if metric is None:
            raise SpecError(where, "the xi construction needs a [metric] section")
        xi = _string_list(table, "xi", where)
        eps = _get(table, "eps", float, where)
        branch = _get(table, "branch", str, where, required=False, default="plus")
        if branch not in ("plus", "minus"):
            raise SpecError(f"{where}.branch", f"expected 'plus' or 'minus', got {branch!r}")
        try:
            plus, minus = xi_statistical(metric, xi, eps)
        except Exception as err:
            raise SpecError(f"{where}.xi", str(err)) from err
        return (plus if branch == "plus" else minus), kind
    if kind == "alpha":
        _known_keys(table, {"kind", "alpha"}, where)
        if model is None:
            raise SpecError(where, "an alpha connection needs an [expfam] or [model] section")
        alpha = _get(table, "alpha", float, where)
        return alpha_connection_field(model, alpha), kind
    raise SpecError(f"{where}.kind",
                    "expected one of 'christoffel', 'levi-civita', "
                    f"'xi-construction', 'alpha', got {kind!r}")


def loads_spec(text: str, name: str = "<inline>") -> ManifoldSpecFile:
    """Parse and validate spec text; see load_spec for the file variant."""
    digest = hashlib.sha256(text.encode()).hexdigest()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise SpecError("<syntax>", str(err)) from err

    _known_keys(data, {"igh", "chart", "metric", "connection", "expfam",
                       "model", "analyses", "foliate", "topo"}, "[]")
    header = _get(data, "igh", dict, "[]")
    _known_keys(header, {"schema"}, "[igh]")
    schema = _get(header, "schema", int, "[igh]")
    if schema != SCHEMA_VERSION:
        raise SpecError("[igh].schema", f"unsupported schema {schema}, this build reads {SCHEMA_VERSION}")

    analyses_table = _get(data, "analyses", dict, "[]")
    _known_keys(analyses_table, {"run"}, "[analyses]")
    analyses = tuple(_string_list(analyses_table, "run", "[analyses]"))
    for a in analyses:
        if a not in ANALYSIS_NAMES:
            raise SpecError("[analyses].run",
                            f"unknown analysis {a!r}; valid: {', '.join(ANALYSIS_NAMES)}")

    chart = _build_chart(_get(data, "chart", dict, "[]")) if "chart" in data else None
    if chart is None:
        for a in analyses:
            if a not in _CHARTLESS:
                raise SpecError("[chart]", f"analysis '{a}' needs a [chart] section")

    metric = None
    if "metric" in data:
        if chart is None:
            raise SpecError("[metric]", "a metric needs a [chart] section")
        metric = _build_metric(data["metric"], chart)

    if "expfam" in data and "model" in data:
        raise SpecError("[model]", "declare [expfam] or [model], not both")
    model = None
    if "expfam" in data:
        if chart is None:
            raise SpecError("[expfam]", "a model needs a [chart] section")
        model = _build_expfam(data["expfam"], chart)
    elif "model" in data:
        if chart is None:
            raise SpecError("[model]", "a model needs a [chart] section")
        model = _build_model(data["model"], chart)

    connection = connection_kind = None
    if "connection" in data:
        connection, connection_kind = _build_connection(
            data["connection"], chart, metric, model)

    foliate_table = _get(data, "foliate", dict, "[]", required=False, default={})
    _known_keys(foliate_table, {"degree", "points"}, "[foliate]")
    foliate_degree = _get(foliate_table, "degree", int, "[foliate]",
                          required=False, default=4)
    foliate_points = _get(foliate_table, "points", int, "[foliate]",
                          required=False, default=64)
    if foliate_degree < 1:
        raise SpecError("[foliate].degree", "degree must be at least 1")
    if foliate_points < 1:
        raise SpecError("[foliate].points", "points must be positive")

    topo_matrix = topo_batch = None
    if "topo" in data:
        topo_table = data["topo"]
        _known_keys(topo_table, {"matrix", "batch_range"}, "[topo]")
        if "matrix" in topo_table:
            entries = _get(topo_table, "matrix", list, "[topo]")
            if len(entries) != 4 or any(isinstance(v, bool) or not isinstance(v, int)
                                        for v in entries):
                raise SpecError("[topo].matrix", "expected four integers a, b, c, d")
            try:
                topo_matrix = MonodromyMatrix.from_flat(*entries)
            except ValueError as err:
                raise SpecError("[topo].matrix", str(err)) from err
        if "batch_range" in topo_table:
            topo_batch = _get(topo_table, "batch_range", int, "[topo]")
            if topo_batch < 0:
                raise SpecError("[topo].batch_range", "must be nonnegative")

    for a in analyses:
        if a in _MODEL_REQUIRED and model is None:
            raise SpecError("[analyses].run",
                            f"analysis '{a}' needs an [expfam] or [model] section")
        if a in _CONNECTION_REQUIRED and connection is None:
            raise SpecError("[analyses].run",
                            f"analysis '{a}' needs a [connection] section")
    if "koszul" in analyses and metric is None and model is None:
        raise SpecError("[analyses].run",
                        "analysis 'koszul' needs a [metric] or a model section")
    if "topo-betti" in analyses and topo_matrix is None and topo_batch is None:
        raise SpecError("[analyses].run",
                        "analysis 'topo-betti' needs a [topo] section")

    return ManifoldSpecFile(
        name=name, digest=digest, chart=chart, metric=metric,
        connection=connection, connection_kind=connection_kind, model=model,
        analyses=analyses, foliate_degree=foliate_degree,
        foliate_points=foliate_points, topo_matrix=topo_matrix,
        topo_batch_range=topo_batch)


def load_spec(path) -> ManifoldSpecFile:
    """Load and validate a spec file; raises SpecError with key paths."""
    p = Path(path)
    if not p.is_file():
        raise SpecError("<file>", f"no such spec file: {p}")
    return loads_spec(p.read_text(), name=p.name)


def fixture_path(name: str) -> Path:
    """Path of a bundled spec fixture, e.g. fixture_path('gaussian.spec')."""
    from importlib.resources import files

    root = files("igh.fixtures")
    target = root / name
    if not target.is_file():
        available = ", ".join(sorted(fixture_names()))
        raise FileNotFoundError(f"no fixture {name!r}; bundled: {available}")
    return Path(str(target))


def fixture_names() -> list[str]:
    from importlib.resources import files

    root = files("igh.fixtures")
    return sorted(entry.name for entry in root.iterdir()
                  if entry.name.endswith(".spec"))
