"""Statistical models on weighted sample spaces.

A model here is a log-density over a finite set of sample points with
strictly positive weights (a counting measure or a quadrature rule),
together with a parameter chart.  Exponential families are declared by a
carrier expression and statistic expressions in the sample variables; the
log-partition function

    psi(theta) = log sum_a w_a exp[C(x_a) + theta . F(x_a)]

is evaluated through max-shifted log-sum-exp jets, so its parameter
derivatives (Fisher metric = second, cubic form = third) come from the
same truncated-Taylor arithmetic the rest of the library uses.  Every
metric-like quantity also has an expectation route through score moments,
which serves as an independent cross-check:

    g_ij = E[d_i l d_j l]      T_ijk = E[d_i l d_j l d_k l]
    Gamma^(alpha)_{ij,k} = E[(d_i d_j l + (1-alpha)/2 d_i l d_j l) d_k l]

Expectation weights are the density-times-quadrature weights, renormalized
to sum to one; a deviation beyond ``NORMALIZATION_TOL`` is treated as a
broken model declaration, not quadrature noise, and raises.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .expr import (
    Bin,
    EvalDomainError,
    Expr,
    Jet,
    Var,
    evaluate,
    parse,
    variables,
)
from .tensor import (
    ChartSpec,
    ConnectionField,
    MetricField,
    _dinv,
    _invert_metric,
)

__all__ = [
    "NORMALIZATION_TOL",
    "NormalizationError",
    "SampleSpace",
    "discrete_space",
    "gauss_legendre_space",
    "ExpFamilySpec",
    "GeneralModelSpec",
    "log_partition",
    "log_partition_jet",
    "fisher_from_psi",
    "cubic_from_psi",
    "fisher_from_expectation",
    "cubic_from_expectation",
    "alpha_christoffel",
    "fisher_metric_field",
    "alpha_connection_field",
    "gaussian_natural_map",
    "gaussian_natural_inverse",
]

NORMALIZATION_TOL = 1e-6


class NormalizationError(ValueError):
    """Model weights fail to sum to one beyond the allowed tolerance."""


# ---------------------------------------------------------------------------
# Sample spaces


@dataclass(frozen=True, eq=False)
class SampleSpace:
    """Finite sample points with strictly positive integration weights.

    ``kind`` records whether the points enumerate a discrete space or
    discretize a continuum ("grid"); the numerics treat both identically.
    """

    kind: str
    points: np.ndarray
    weights: np.ndarray
    var_names: tuple[str, ...] = ("x",)

    def __post_init__(self):
        if self.kind not in ("discrete", "grid"):
            raise ValueError(f"sample space kind must be discrete or grid, got {self.kind!r}")
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("sample points must form a nonempty (N,) or (N, m) array")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise ValueError("weights must be one per sample point")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ValueError("weights must be finite and strictly positive")
        if not np.all(np.isfinite(pts)):
            raise ValueError("sample points must be finite")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ValueError("sample points must be distinct")
        names = tuple(self.var_names)
        if len(names) != pts.shape[1]:
            raise ValueError("need one variable name per sample coordinate")
        if len(set(names)) != len(names):
            raise ValueError("sample variable names must be distinct")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "var_names", names)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def columns(self) -> dict[str, np.ndarray]:
        return {name: self.points[:, j] for j, name in enumerate(self.var_names)}


def discrete_space(values, weights=None, var: str = "x") -> SampleSpace:
    """Counting-measure space over explicitly listed sample values."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0] if values.ndim else 0
    if weights is None:
        weights = np.ones(n)
    return SampleSpace("discrete", values, weights, (var,))


def gauss_legendre_space(lo: float, hi: float, count: int, var: str = "x") -> SampleSpace:
    """Gauss-Legendre quadrature of an interval as a grid sample space."""
    if not lo < hi:
        raise ValueError(f"degenerate interval [{lo}, {hi}]")
    if count < 1:
        raise ValueError("need at least one quadrature node")
    nodes, w = np.polynomial.legendre.leggauss(count)
    half = 0.5 * (hi - lo)
    return SampleSpace("grid", 0.5 * (hi + lo) + half * nodes, half * w, (var,))


# ---------------------------------------------------------------------------
# Model declarations


def _as_expr(e: Union[str, Expr]) -> Expr:
    return parse(e) if isinstance(e, str) else e


@dataclass(frozen=True, eq=False)
class ExpFamilySpec:
    """Exponential family: carrier and statistics over a sample space.

    The log-density in natural parameters is
    ``C(x) + sum_i theta^i F_i(x) - psi(theta)`` with ``theta`` ranging
    over the parameter chart; statistics must match the chart dimension.
    """

    sample: SampleSpace
    carrier: Expr
    stats: tuple[Expr, ...]
    chart: ChartSpec

    def __post_init__(self):
        object.__setattr__(self, "carrier", _as_expr(self.carrier))
        object.__setattr__(self, "stats", tuple(_as_expr(s) for s in self.stats))
        if len(self.stats) == 0:
            raise ValueError("an exponential family needs at least one statistic")
        if len(self.stats) != self.chart.dim:
            raise ValueError("statistic count must equal the parameter dimension")
        allowed = set(self.sample.var_names)
        for label, e in [("carrier", self.carrier)] + [
            (f"statistic {i}", s) for i, s in enumerate(self.stats)
        ]:
            extra = variables(e) - allowed
            if extra:
                raise ValueError(f"{label} uses unknown sample variables {sorted(extra)}")
        if allowed & set(self.chart.coord_names):
            raise ValueError("sample variables and parameter names must not collide")

    @property
    def param_dim(self) -> int:
        return self.chart.dim

    @cached_property
    def _exponent(self) -> Expr:
        """C(x) + sum_i theta^i F_i(x) as one expression tree."""
        e = self.carrier
        for name, stat in zip(self.chart.coord_names, self.stats):
            e = Bin("+", e, Bin("*", Var(name), stat))
        return e


@dataclass(frozen=True, eq=False)
class GeneralModelSpec:
    """Normalized log-density expression in sample and parameter variables."""

    sample: SampleSpace
    logdensity: Expr
    chart: ChartSpec

    def __post_init__(self):
        object.__setattr__(self, "logdensity", _as_expr(self.logdensity))
        allowed = set(self.sample.var_names) | set(self.chart.coord_names)
        extra = variables(self.logdensity) - allowed
        if extra:
            raise ValueError(f"log-density uses unknown variables {sorted(extra)}")
        if set(self.sample.var_names) & set(self.chart.coord_names):
            raise ValueError("sample variables and parameter names must not collide")


ModelLike = Union[ExpFamilySpec, GeneralModelSpec]


# ---------------------------------------------------------------------------
# Parameter-point plumbing


def _as_params(spec, theta) -> tuple[np.ndarray, bool]:
    pts = np.asarray(theta, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    n = spec.chart.dim
    if pts.ndim != 2 or pts.shape[1] != n:
        raise ValueError(f"expected parameter points of dimension {n}")
    for row in pts:
        if not spec.chart.contains(row):
            raise ValueError(f"parameter point {row.tolist()} outside the declared domain")
    return pts, single


def _param_env(spec, pts: np.ndarray, order: int) -> dict[str, object]:
    """Environment over batch (P, N): seeded parameters, constant samples."""
    P = pts.shape[0]
    N = spec.sample.size
    n = spec.chart.dim
    env: dict[str, object] = dict()
    for name, col in spec.sample.columns().items():
        env[name] = np.broadcast_to(col, (P, N))
    for i, name in enumerate(spec.chart.coord_names):
        env[name] = Jet.variable(np.broadcast_to(pts[:, i:i + 1], (P, N)), i, order, n, (P, N))
    return env


def _expand(j: Jet, count: int) -> Jet:
    """Broadcast a (P,)-batch jet to batch (P, count)."""

    def wide(arr):
        if arr is None:
            return None
        return np.broadcast_to(arr[:, None, ...], (arr.shape[0], count) + arr.shape[1:])

    return Jet(j.order, j.nvars, wide(j.val), wide(j.d1), wide(j.d2), wide(j.d3))


# ---------------------------------------------------------------------------
# Log-partition function


def _psi_jet_batched(f: ExpFamilySpec, pts: np.ndarray, order: int) -> tuple[Jet, Jet]:
    """Jets of the exponent over (P, N) and of psi over (P,)."""
    a = evaluate(f._exponent, _param_env(f, pts, order))
    m = np.max(a.val, axis=1)
    with np.errstate(over="ignore"):
        scaled = (a - m[:, None]).exp() * f.sample.weights
        total = scaled.sum(axis=1)
        psi = total.log() + m
    for part in (psi.val, psi.d1, psi.d2, psi.d3):
        if part is not None and not np.all(np.isfinite(part)):
            raise EvalDomainError("log-partition sum overflowed after max-shift")
    return a, psi


def log_partition_jet(f: ExpFamilySpec, theta, order: int = 0):
    """Jet of psi in the natural parameters; batched over parameter points."""
    pts, single = _as_params(f, theta)
    _, psi = _psi_jet_batched(f, pts, order)
    if not single:
        return psi
    return Jet(psi.order, psi.nvars, psi.val[0],
               None if psi.d1 is None else psi.d1[0],
               None if psi.d2 is None else psi.d2[0],
               None if psi.d3 is None else psi.d3[0])


def log_partition(f: ExpFamilySpec, theta):
    """psi(theta) = log of the weighted exponent sum, max-shifted."""
    jet = log_partition_jet(f, theta, order=0)
    return jet.val if jet.val.ndim else float(jet.val)


def fisher_from_psi(f: ExpFamilySpec, theta) -> np.ndarray:
    """Fisher matrix as the parameter Hessian of the log-partition."""
    return log_partition_jet(f, theta, order=2).d2


def cubic_from_psi(f: ExpFamilySpec, theta) -> np.ndarray:
    """Totally symmetric cubic array as the third psi derivative."""
    return log_partition_jet(f, theta, order=3).d3


# ---------------------------------------------------------------------------
# Expectation route


def _model_scores(spec: ModelLike, pts: np.ndarray, order: int) -> tuple[Jet, np.ndarray]:
    """Log-density jets over (P, N) and renormalized expectation weights.

    Exponential families get exact scores (exponent minus psi jet); general
    models evaluate their declared log-density.  Weights beyond
    ``NORMALIZATION_TOL`` of unity raise, below it they are renormalized.
    """
    if isinstance(spec, ExpFamilySpec):
        a, psi = _psi_jet_batched(spec, pts, order)
        ell = a - _expand(psi, spec.sample.size)
    elif isinstance(spec, GeneralModelSpec):
        ell = evaluate(spec.logdensity, _param_env(spec, pts, order))
    else:
        raise TypeError(f"not a model: {spec!r}")
    with np.errstate(over="ignore"):
        dens = spec.sample.weights * np.exp(ell.val)
        total = dens.sum(axis=1)
    worst = float(np.max(np.abs(total - 1.0)))
    if not np.all(np.isfinite(total)) or worst > NORMALIZATION_TOL:
        raise NormalizationError(
            f"model weights sum off unity by {worst:.3e} (tolerance {NORMALIZATION_TOL:.0e})")
    return ell, dens / total[:, None]


def fisher_from_expectation(m: ModelLike, theta) -> np.ndarray:
    """Fisher matrix as the second score moment E[d_i l d_j l]."""
    pts, single = _as_params(m, theta)
    ell, mu = _model_scores(m, pts, 1)
    g = np.einsum("pa,pai,paj->pij", mu, ell.d1, ell.d1)
    return g[0] if single else g


def cubic_from_expectation(m: ModelLike, theta) -> np.ndarray:
    """Cubic array as the third score moment E[d_i l d_j l d_k l]."""
    pts, single = _as_params(m, theta)
    ell, mu = _model_scores(m, pts, 1)
    T = np.einsum("pa,pai,paj,pak->pijk", mu, ell.d1, ell.d1, ell.d1)
    return T[0] if single else T


def alpha_christoffel(m: ModelLike, theta, alpha: float) -> np.ndarray:
    """Lowered alpha-connection coefficients; out[i, j, k] pairs with d_k l.

    Gamma^(alpha)_{ij,k} = E[(d_i d_j l + (1-alpha)/2 d_i l d_j l) d_k l].
    """
    pts, single = _as_params(m, theta)
    ell, mu = _model_scores(m, pts, 2)
    c = 0.5 * (1.0 - alpha)
    G = np.einsum("pa,paij,pak->pijk", mu, ell.d2, ell.d1)
    G += c * np.einsum("pa,pai,paj,pak->pijk", mu, ell.d1, ell.d1, ell.d1)
    return G[0] if single else G


# ---------------------------------------------------------------------------
# Field adapters (quadrature-backed tensor fields over the parameter chart)


def _fisher_arrays(ell: Jet, mu: np.ndarray, order: int):
    """Fisher values and, at order >= 1, exact coordinate derivative.

    d_k g_ij = E[d_ik l d_j l] + E[d_i l d_jk l] + E[d_i l d_j l d_k l]
               - E[d_k l] E[d_i l d_j l]
    (the last term corrects for quadrature-level score mean).
    """
    g = np.einsum("pa,pai,paj->pij", mu, ell.d1, ell.d1)
    if order == 0:
        return (g,)
    d1, d2 = ell.d1, ell.d2
    dg = np.einsum("pa,paik,paj->pijk", mu, d2, d1)
    dg += np.einsum("pa,pai,pajk->pijk", mu, d1, d2)
    dg += np.einsum("pa,pai,paj,pak->pijk", mu, d1, d1, d1)
    smean = np.einsum("pa,pak->pk", mu, d1)
    dg -= np.einsum("pk,pij->pijk", smean, g)
    return (g, dg)


def fisher_metric_field(spec: ModelLike, chart: ChartSpec | None = None) -> MetricField:
    """Fisher metric over the parameter chart, with exact first derivatives."""
    chart = spec.chart if chart is None else chart

    def fn(p: np.ndarray, order: int):
        ell, mu = _model_scores(spec, np.asarray(p, dtype=float), order + 1)
        return _fisher_arrays(ell, mu, order)

    return MetricField(chart, fn=fn, max_order=1)


def alpha_connection_field(spec: ModelLike, alpha: float,
                           chart: ChartSpec | None = None) -> ConnectionField:
    """Alpha-connection in index-raised form, with exact first derivatives.

    The lowered coefficients are raised through the Fisher metric of the
    same model, so downstream consumers (torsion, duality, curvature of
    order-zero kind) see a standard connection field.
    """
    chart = spec.chart if chart is None else chart
    c = 0.5 * (1.0 - alpha)

    def fn(p: np.ndarray, order: int):
        pts = np.asarray(p, dtype=float)
        ell, mu = _model_scores(spec, pts, order + 2)
        fisher = _fisher_arrays(ell, mu, order)
        g = fisher[0]
        d1, d2 = ell.d1, ell.d2
        ginv = _invert_metric(g)
        A = np.einsum("paij,pak->paijk", d2, d1)
        A += c * np.einsum("pai,paj,pak->paijk", d1, d1, d1)
        low = np.einsum("pa,paijk->pijk", mu, A)
        G = np.einsum("plk,pijk->plij", ginv, low)
        if order == 0:
            return (G,)
        d3 = ell.d3
        dA = np.einsum("paijm,pak->paijkm", d3, d1)
        dA += c * (np.einsum("paim,paj,pak->paijkm", d2, d1, d1)
                   + np.einsum("pai,pajm,pak->paijkm", d1, d2, d1))
        dA += np.einsum("paij,pakm->paijkm", d2, d2)
        dA += c * np.einsum("pai,paj,pakm->paijkm", d1, d1, d2)
        smean = np.einsum("pa,pam->pm", mu, d1)
        dlow = np.einsum("pa,paijkm->pijkm", mu, dA)
        dlow += np.einsum("pa,paijk,pam->pijkm", mu, A, d1)
        dlow -= np.einsum("pijk,pm->pijkm", low, smean)
        dginv = _dinv(ginv, fisher[1])
        dG = np.einsum("plkm,pijk->plijm", dginv, low)
        dG += np.einsum("plk,pijkm->plijm", ginv, dlow)
        return (G, dG)

    return ConnectionField(chart, fn=fn, max_order=1, torsion_free=True)


# ---------------------------------------------------------------------------
# Gaussian natural coordinates


def gaussian_natural_map(mu: float, sigma: float) -> np.ndarray:
    """(mean, stddev) -> natural parameters (mu/sigma^2, -1/(2 sigma^2))."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    s2 = float(sigma) ** 2
    return np.array([float(mu) / s2, -0.5 / s2])


def gaussian_natural_inverse(theta1: float, theta2: float) -> np.ndarray:
    """Natural parameters back to (mean, stddev); needs theta2 < 0."""
    if not theta2 < 0:
        raise ValueError("second natural parameter must be negative")
    s2 = -0.5 / float(theta2)
    return np.array([float(theta1) * s2, np.sqrt(s2)])
