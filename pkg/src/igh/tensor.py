"""Chart-based tensor calculus: metrics, connections, duality, Koszul forms.

All fields live on a single coordinate chart (a box in R^n).  Component
functions are either expression matrices differentiated by jets or numeric
closures that return their own derivative arrays; derived objects
(Levi-Civita, duals, alpha family, pullbacks) stay in the second form and
compute derivatives by exact array calculus on their parents' jets.  Nothing
here differentiates expression trees symbolically.

Array layout: a leading point axis, then component axes, then derivative
axes.  For a metric, ``jets(pts, 2)`` returns ``(g, dg, ddg)`` with
``dg[p, i, j, k] = d_k g_ij`` and ``ddg[p, i, j, k, l] = d_k d_l g_ij``;
connections use ``G[p, l, i, j] = Gamma^l_ij`` and
``dG[p, l, i, j, k] = d_k Gamma^l_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .expr import Expr, evaluate, parse, seed_point

__all__ = [
    "GeometryError",
    "SingularMetricError",
    "RankDeficientError",
    "VanishingFieldError",
    "ChartSpec",
    "MetricField",
    "ConnectionField",
    "CubicField",
    "MetricCheck",
    "HessianReport",
    "levi_civita",
    "torsion",
    "curvature",
    "dual_connection",
    "cubic_form",
    "alpha_connection",
    "xi_statistical",
    "hessian_criteria",
    "koszul_form",
    "koszul_logdet_jets",
    "koszul_routes",
    "pullback_metric",
    "lower_connection",
    "raise_connection",
    "check_metric",
]


class GeometryError(Exception):
    """Base class for geometric validity failures."""


class SingularMetricError(GeometryError):
    """Metric not invertible (or badly conditioned) at a sample point."""


class RankDeficientError(GeometryError):
    """A map's Jacobian lost rank at a sample point."""


class VanishingFieldError(GeometryError):
    """A vector field required to be non-vanishing vanished at a sample."""


# ---------------------------------------------------------------------------
# Charts


@dataclass(frozen=True)
class ChartSpec:
    """A single coordinate chart over a closed box.

    ``periodic`` flags coordinates that wrap at the box edges (used by leaf
    tracing); it does not affect sampling.
    """

    coord_names: tuple[str, ...]
    box: tuple[tuple[float, float], ...]
    periodic: tuple[bool, ...] = ()

    def __post_init__(self):
        if len(set(self.coord_names)) != len(self.coord_names):
            raise ValueError("coordinate names must be distinct")
        if len(self.box) != len(self.coord_names):
            raise ValueError("box must have one interval per coordinate")
        for lo, hi in self.box:
            if not lo < hi:
                raise ValueError(f"degenerate interval [{lo}, {hi}]")
        if not self.periodic:
            object.__setattr__(self, "periodic", (False,) * len(self.coord_names))
        elif len(self.periodic) != len(self.coord_names):
            raise ValueError("periodic flags must match the coordinate count")

    @property
    def dim(self) -> int:
        return len(self.coord_names)

    @property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.box])

    @property
    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.box])

    def contains(self, p: np.ndarray, margin: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - margin) and np.all(p <= self.hi + margin))

    def sample(self, count: int | None = None, seed: int = 0,
               shrink: float = 0.0) -> np.ndarray:
        """Deterministic low-discrepancy points in the box (scrambled Halton).

        ``shrink`` pulls the sampling box toward its center by that relative
        margin, useful when a field degenerates near the boundary.
        """
        if count is None:
            count = 64 * self.dim
        engine = qmc.Halton(d=self.dim, scramble=True, seed=seed)
        unit = engine.random(count)
        lo, hi = self.lo, self.hi
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo) * (1.0 - shrink)
        return mid + (2.0 * unit - 1.0) * half

    def wrap(self, p: np.ndarray) -> np.ndarray:
        """Wrap periodic coordinates back into the box; others untouched."""
        p = np.array(p, dtype=float)
        lo, hi = self.lo, self.hi
        for i, per in enumerate(self.periodic):
            if per:
                width = hi[i] - lo[i]
                p[..., i] = lo[i] + np.mod(p[..., i] - lo[i], width)
        return p


def _as_points(p, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 1:
        if arr.shape != (dim,):
            raise ValueError(f"point must have {dim} coordinates")
        return arr[None, :], True
    if arr.ndim == 2 and arr.shape[1] == dim:
        return arr, False
    raise ValueError(f"expected shape (n,) or (P, n) with n = {dim}")


# ---------------------------------------------------------------------------
# Component evaluation


def _parse_grid(entries, shape: tuple[int, ...]) -> list[Expr]:
    """Flatten a nested list of expressions/strings, checking its shape."""
    flat: list[Expr] = []

    def walk(node, dims: tuple[int, ...], where: str) -> None:
        if not dims:
            flat.append(parse(node) if isinstance(node, str) else node)
            return
        if not isinstance(node, (list, tuple)) or len(node) != dims[0]:
            raise ValueError(f"component grid at {where or 'root'} must have length {dims[0]}")
        for i, sub in enumerate(node):
            walk(sub, dims[1:], f"{where}[{i}]")

    walk(entries, shape, "")
    if len(flat) != int(np.prod(shape)):
        raise ValueError("component grid has the wrong size")  # pragma: no cover
    return flat


def _eval_expr_grid(exprs: Sequence[Expr], shape: tuple[int, ...],
                    chart: ChartSpec, pts: np.ndarray, order: int) -> tuple[np.ndarray, ...]:
    """Evaluate a flat expression list into stacked jet arrays.

    Returns ``order + 1`` arrays; the k-th has shape (P, *shape, n^k) with the
    derivative axes last.
    """
    P, n = pts.shape[0], chart.dim
    env = seed_point({name: pts[:, i] for i, name in enumerate(chart.coord_names)},
                     order, batch_shape=(P,))
    outs = [np.empty((P,) + shape + (n,) * k) for k in range(order + 1)]
    for pos, e in enumerate(exprs):
        idx = np.unravel_index(pos, shape) if shape else ()
        jet = evaluate(e, env)
        arrays = (jet.val, jet.d1, jet.d2, jet.d3)
        for k in range(order + 1):
            outs[k][(slice(None),) + idx] = arrays[k]
    return tuple(outs)


class _Field:
    """Shared plumbing: either an expression grid or a numeric closure."""

    _shape_rank = 0  # component axes

    def __init__(self, chart: ChartSpec, exprs: Sequence[Expr] | None = None,
                 fn: Callable[[np.ndarray, int], tuple[np.ndarray, ...]] | None = None,
                 max_order: int = 3):
        if (exprs is None) == (fn is None):
            raise ValueError("provide exactly one of expression grid or closure")
        self.chart = chart
        self._exprs = list(exprs) if exprs is not None else None
        self._fn = fn
        self.max_order = max_order

    @property
    def _shape(self) -> tuple[int, ...]:
        return (self.chart.dim,) * self._shape_rank

    def jets(self, pts: np.ndarray, order: int) -> tuple[np.ndarray, ...]:
        """Component values and coordinate derivatives through ``order``."""
        pts = np.asarray(pts, dtype=float)
        if order > self.max_order:
            raise ValueError(f"field supports derivative order <= {self.max_order}")
        if self._exprs is not None:
            return _eval_expr_grid(self._exprs, self._shape, self.chart, pts, order)
        out = self._fn(pts, order)
        return out[: order + 1]

    def values(self, pts: np.ndarray) -> np.ndarray:
        return self.jets(pts, 0)[0]

    @property
    def expressions(self) -> list[Expr] | None:
        return None if self._exprs is None else list(self._exprs)


class MetricField(_Field):
    """Symmetric positive-definite (0,2)-tensor field g_ij."""

    _shape_rank = 2

    @classmethod
    def from_grid(cls, chart: ChartSpec, rows) -> "MetricField":
        n = chart.dim
        return cls(chart, exprs=_parse_grid(rows, (n, n)))

    def inverse_values(self, pts: np.ndarray) -> np.ndarray:
        return _invert_metric(self.values(pts))


class ConnectionField(_Field):
    """Affine connection via Christoffel symbols Gamma^l_ij."""

    _shape_rank = 3

    def __init__(self, chart, exprs=None, fn=None, max_order=3, torsion_free=False):
        super().__init__(chart, exprs, fn, max_order)
        self.torsion_free = torsion_free

    @classmethod
    def from_grid(cls, chart: ChartSpec, grid, torsion_free: bool = False) -> "ConnectionField":
        n = chart.dim
        return cls(chart, exprs=_parse_grid(grid, (n, n, n)), torsion_free=torsion_free)

    def torsion_residual(self, pts: np.ndarray) -> float:
        G = self.values(pts)
        return float(np.max(np.abs(G - np.swapaxes(G, 2, 3))))


class CubicField(_Field):
    """(0,3)-tensor field, nominally nabla g; totally symmetric when statistical."""

    _shape_rank = 3

    @classmethod
    def from_grid(cls, chart: ChartSpec, grid) -> "CubicField":
        n = chart.dim
        return cls(chart, exprs=_parse_grid(grid, (n, n, n)))

    def symmetry_residual(self, pts: np.ndarray) -> float:
        T = self.values(pts)
        worst = 0.0
        for perm in ((0, 1, 3, 2), (0, 2, 1, 3), (0, 2, 3, 1), (0, 3, 1, 2), (0, 3, 2, 1)):
            worst = max(worst, float(np.max(np.abs(T - np.transpose(T, perm)))))
        return worst


# ---------------------------------------------------------------------------
# Linear-algebra helpers


def _invert_metric(g: np.ndarray) -> np.ndarray:
    try:
        ginv = np.linalg.inv(g)
    except np.linalg.LinAlgError as err:
        raise SingularMetricError(str(err)) from None
    if not np.all(np.isfinite(ginv)):
        raise SingularMetricError("metric inverse overflowed")
    return ginv


def _dinv(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """d_k (g^-1) = -g^-1 (d_k g) g^-1, shaped (P, i, j, k)."""
    return -np.einsum("pia,pabk,pbj->pijk", ginv, dg, ginv)


def lower_connection(G: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Gamma_{ij,k} = g_kl Gamma^l_ij, shaped (P, i, j, k)."""
    return np.einsum("pkl,plij->pijk", g, G)


def raise_connection(L: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    """Gamma^l_ij = g^{lk} Gamma_{ij,k}, shaped (P, l, i, j)."""
    return np.einsum("plk,pijk->plij", ginv, L)


@dataclass(frozen=True)
class MetricCheck:
    symmetry_residual: float
    min_eig_ratio: float
    positive_definite: bool


def check_metric(g: MetricField, pts: np.ndarray, ratio_tol: float = 1e-10) -> MetricCheck:
    """Symmetry and definiteness over a point set.

    Positive definiteness requires min eigenvalue > ratio_tol * max eigenvalue
    at every point (Fisher metrics can be nearly degenerate at extreme
    parameters, so the tolerance is relative).
    """
    vals = g.values(pts)
    sym = float(np.max(np.abs(vals - np.swapaxes(vals, 1, 2))))
    eigs = np.linalg.eigvalsh(0.5 * (vals + np.swapaxes(vals, 1, 2)))
    ratio = float(np.min(eigs[:, 0] / eigs[:, -1]))
    return MetricCheck(sym, ratio, bool(ratio > ratio_tol))


# ---------------------------------------------------------------------------
# Levi-Civita and friends


def levi_civita(g: MetricField) -> ConnectionField:
    """Torsion-free metric-compatible connection of g.

    Standard Christoffel formula; the derivative array comes from
    differentiating it exactly (inverse-metric derivative included).
    """

    def fn(pts: np.ndarray, order: int):
        js = g.jets(pts, order + 1)
        g0, dg = js[0], js[1]
        ginv = _invert_metric(g0)
        # S[p, m, i, j] = d_i g_mj + d_j g_mi - d_m g_ij
        S = (np.einsum("pmji->pmij", dg) + dg - np.einsum("pijm->pmij", dg))
        G = 0.5 * np.einsum("plm,pmij->plij", ginv, S)
        if order == 0:
            return (G,)
        ddg = js[2]
        dginv = _dinv(ginv, dg)
        dS = (np.einsum("pmjik->pmijk", ddg) + ddg - np.einsum("pijmk->pmijk", ddg))
        dG = 0.5 * (np.einsum("plmk,pmij->plijk", dginv, S)
                    + np.einsum("plm,pmijk->plijk", ginv, dS))
        return (G, dG)

    return ConnectionField(g.chart, fn=fn, max_order=g.max_order - 1, torsion_free=True)


def torsion(conn: ConnectionField, p) -> np.ndarray:
    """T^l_ij = Gamma^l_ij - Gamma^l_ji at a point or point batch."""
    pts, single = _as_points(p, conn.chart.dim)
    G = conn.values(pts)
    out = G - np.swapaxes(G, 2, 3)
    return out[0] if single else out


def curvature(conn: ConnectionField, p) -> np.ndarray:
    """R^l_kij (= component of R(d_i, d_j) d_k on d_l) at a point or batch."""
    pts, single = _as_points(p, conn.chart.dim)
    G, dG = conn.jets(pts, 1)
    term1 = np.einsum("pljki->plkij", dG)   # d_i Gamma^l_jk
    term2 = np.einsum("plikj->plkij", dG)   # d_j Gamma^l_ik
    quad = np.einsum("plim,pmjk->plkij", G, G)
    out = term1 - term2 + quad - np.swapaxes(quad, 3, 4)
    return out[0] if single else out


def dual_connection(g: MetricField, conn: ConnectionField) -> ConnectionField:
    """g-conjugate connection: d_k g_ij = Gamma_{ki,j} + Gamma*_{kj,i}."""

    def fn(pts: np.ndarray, order: int):
        gj = g.jets(pts, order + 1)
        g0, dg = gj[0], gj[1]
        ginv = _invert_metric(g0)
        cj = conn.jets(pts, order)
        G = cj[0]
        L = lower_connection(G, g0)
        # Gamma*_{ab,c} = d_a g_cb - Gamma_{ac,b}
        Ldual = np.einsum("pcba->pabc", dg) - np.einsum("pacb->pabc", L)
        Gdual = raise_connection(Ldual, ginv)
        if order == 0:
            return (Gdual,)
        ddg, dG = gj[2], cj[1]
        dginv = _dinv(ginv, dg)
        dL = (np.einsum("pklm,plij->pijkm", dg, G)
              + np.einsum("pkl,plijm->pijkm", g0, dG))  # d_m Gamma_{ij,k}
        dLdual = (np.einsum("pcbam->pabcm", ddg)
                  - np.einsum("pacbm->pabcm", dL))
        dGdual = (np.einsum("plcm,pabc->plabm", dginv, Ldual)
                  + np.einsum("plc,pabcm->plabm", ginv, dLdual))
        return (Gdual, dGdual)

    max_order = min(g.max_order - 1, conn.max_order)
    return ConnectionField(g.chart, fn=fn, max_order=max_order,
                           torsion_free=conn.torsion_free)


def cubic_form(g: MetricField, conn: ConnectionField) -> CubicField:
    """T = nabla g with T[p, a, b, c] = (nabla_a g)(b, c)."""

    def fn(pts: np.ndarray, order: int):
        gj = g.jets(pts, order + 1)
        g0, dg = gj[0], gj[1]
        cj = conn.jets(pts, order)
        G = cj[0]
        T = (np.einsum("pbca->pabc", dg)
             - np.einsum("pmab,pmc->pabc", G, g0)
             - np.einsum("pmac,pbm->pabc", G, g0))
        if order == 0:
            return (T,)
        ddg, dG = gj[2], cj[1]
        dT = (np.einsum("pbcak->pabck", ddg)
              - np.einsum("pmabk,pmc->pabck", dG, g0)
              - np.einsum("pmab,pmck->pabck", G, dg)
              - np.einsum("pmack,pbm->pabck", dG, g0)
              - np.einsum("pmac,pbmk->pabck", G, dg))
        return (T, dT)

    return CubicField(g.chart, fn=fn, max_order=min(g.max_order - 1, conn.max_order))


def alpha_connection(base: ConnectionField, T: CubicField, alpha_base: float,
                     target: float, g: MetricField) -> ConnectionField:
    """Member at ``target`` of the family through (``base`` at ``alpha_base``).

    Lowered components interpolate affinely:
    Gamma^(target)_{ij,k} = Gamma^(base)_{ij,k} + (alpha_base - target)/2 T_ijk.
    """
    c = 0.5 * (alpha_base - target)

    def fn(pts: np.ndarray, order: int):
        gj = g.jets(pts, order)
        bj = base.jets(pts, order)
        Tj = T.jets(pts, order)
        g0, G, T0 = gj[0], bj[0], Tj[0]
        ginv = _invert_metric(g0)
        L = lower_connection(G, g0) + c * T0
        Gout = raise_connection(L, ginv)
        if order == 0:
            return (Gout,)
        dg, dG, dT = gj[1], bj[1], Tj[1]
        dginv = _dinv(ginv, dg)
        dL = (np.einsum("pklm,plij->pijkm", dg, G)
              + np.einsum("pkl,plijm->pijkm", g0, dG)
              + c * dT)
        dGout = (np.einsum("plkm,pijk->plijm", dginv, L)
                 + np.einsum("plk,pijkm->plijm", ginv, dL))
        return (Gout, dGout)

    max_order = min(base.max_order, T.max_order, g.max_order - 1)
    return ConnectionField(g.chart, fn=fn, max_order=max_order,
                           torsion_free=base.torsion_free)


def xi_statistical(g: MetricField, xi, eps: float,
                   norm_floor: float = 1e-12) -> tuple[ConnectionField, ConnectionField]:
    """Dual pair nabla^(+eps), nabla^(-eps) built from a non-vanishing field.

    With a = g(xi, .), the pair is Levi-Civita +- eps * a(X) a(Y) xi; both are
    torsion-free and the cubic form is totally symmetric.
    """
    chart = g.chart
    n = chart.dim
    xi_exprs = _parse_grid(xi, (n,))
    lc = levi_civita(g)

    def delta_jets(pts: np.ndarray, order: int):
        Xj = _eval_expr_grid(xi_exprs, (n,), chart, pts, order)
        gj = g.jets(pts, order)
        X, g0 = Xj[0], gj[0]
        a = np.einsum("pij,pj->pi", g0, X)
        sq = np.einsum("pi,pi->p", a, X)
        if np.any(sq <= norm_floor):
            raise VanishingFieldError("xi vanishes (or nearly) at a sample point")
        D = np.einsum("pl,pi,pj->plij", X, a, a)
        if order == 0:
            return (D,)
        dX, dg = Xj[1], gj[1]
        da = np.einsum("pijk,pj->pik", dg, X) + np.einsum("pij,pjk->pik", g0, dX)
        dD = (np.einsum("plk,pi,pj->plijk", dX, a, a)
              + np.einsum("pl,pik,pj->plijk", X, da, a)
              + np.einsum("pl,pi,pjk->plijk", X, a, da))
        return (D, dD)

    def make(sign: float) -> ConnectionField:
        def fn(pts: np.ndarray, order: int):
            lj = lc.jets(pts, order)
            dj = delta_jets(pts, order)
            out = tuple(l + sign * eps * d for l, d in zip(lj, dj))
            return out

        return ConnectionField(chart, fn=fn, max_order=min(lc.max_order, 2),
                               torsion_free=True)

    return make(+1.0), make(-1.0)


# ---------------------------------------------------------------------------
# Hessian-structure diagnostics


@dataclass(frozen=True)
class HessianReport:
    """Residuals of the equivalent Hessian-metric criteria for (g, Gamma).

    ``flatness_residual``/``torsion_residual`` qualify the premise (the
    criteria are equivalences only for a flat torsion-free connection).  The
    four criterion residuals are, with gamma = Levi-Civita - Gamma:

    - ``covariant_symmetry``: (nabla_X g)(Y,Z) - (nabla_Y g)(X,Z)
    - ``partial_symmetry``:   d_k g_ij - d_i g_kj (in the given coordinates)
    - ``self_adjoint``:       g(gamma_X Y, Z) - g(Y, gamma_X Z)
    - ``lowered_symmetry``:   gamma_{ijk} - gamma_{jik}, first index lowered
    """

    flatness_residual: float
    torsion_residual: float
    tol: float
    covariant_symmetry: float
    partial_symmetry: float
    self_adjoint: float
    lowered_symmetry: float

    @property
    def residuals(self) -> dict[str, float]:
        return {
            "covariant_symmetry": self.covariant_symmetry,
            "partial_symmetry": self.partial_symmetry,
            "self_adjoint": self.self_adjoint,
            "lowered_symmetry": self.lowered_symmetry,
        }

    @property
    def passes(self) -> dict[str, bool]:
        return {k: v <= self.tol for k, v in self.residuals.items()}

    @property
    def agree(self) -> bool:
        votes = set(self.passes.values())
        return len(votes) == 1

    @property
    def is_hessian(self) -> bool:
        return all(self.passes.values())


def hessian_criteria(g: MetricField, conn: ConnectionField, samples,
                     tol: float = 1e-8) -> HessianReport:
    """Evaluate the four equivalent Hessian-metric criteria on a sample set."""
    pts, _ = _as_points(samples, g.chart.dim)
    R = curvature(conn, pts)
    flat = float(np.max(np.abs(R)))
    tors = conn.torsion_residual(pts)

    T = cubic_form(g, conn).values(pts)
    c2 = float(np.max(np.abs(T - np.transpose(T, (0, 2, 1, 3)))))

    g0, dg = g.jets(pts, 1)
    c3 = float(np.max(np.abs(dg - np.einsum("pkji->pijk", dg))))

    gamma = levi_civita(g).values(pts) - conn.values(pts)
    A = np.einsum("pmij,pmk->pijk", gamma, g0)
    c4 = float(np.max(np.abs(A - np.transpose(A, (0, 1, 3, 2)))))
    B = np.einsum("pil,pljk->pijk", g0, gamma)
    c5 = float(np.max(np.abs(B - np.transpose(B, (0, 2, 1, 3)))))

    return HessianReport(flat, tors, tol, c2, c3, c4, c5)


# ---------------------------------------------------------------------------
# Koszul forms


def koszul_form(g: MetricField, conn: ConnectionField, p) -> np.ndarray:
    """First Koszul form beta_i = gamma^k_{ki}, gamma = Levi-Civita - Gamma."""
    pts, single = _as_points(p, g.chart.dim)
    gamma = levi_civita(g).values(pts) - conn.values(pts)
    beta = np.einsum("pkki->pi", gamma)
    return beta[0] if single else beta


def koszul_logdet_jets(g: MetricField, p, order: int = 0):
    """Log-det route beta_i = 1/2 d_i log det g, with optional d_k beta_i.

    Valid as the Koszul form only in coordinates where the flat connection's
    components vanish; used for two-route cross checks and parallelism tests.
    """
    pts, single = _as_points(p, g.chart.dim)
    js = g.jets(pts, order + 1)
    g0, dg = js[0], js[1]
    ginv = _invert_metric(g0)
    beta = 0.5 * np.einsum("pab,pbai->pi", ginv, dg)
    if order == 0:
        return (beta[0] if single else beta,)
    ddg = js[2]
    dginv = _dinv(ginv, dg)
    dbeta = 0.5 * (np.einsum("pabk,pbai->pik", dginv, dg)
                   + np.einsum("pab,pbaik->pik", ginv, ddg))
    if single:
        return beta[0], dbeta[0]
    return beta, dbeta


def koszul_routes(g: MetricField, conn: ConnectionField, p) -> tuple[np.ndarray, np.ndarray]:
    """(trace-of-difference route, half-log-det route) for cross checking."""
    return koszul_form(g, conn, p), koszul_logdet_jets(g, p, 0)[0]


# ---------------------------------------------------------------------------
# Pullbacks


def pullback_metric(mapping, g: MetricField, new_chart: ChartSpec,
                    rank_rtol: float = 1e-10) -> MetricField:
    """Pull g back along a map written as target-coordinate expressions.

    Components and their first two derivative orders come from substitution
    plus the chain rule (map jets through order 3); higher orders raise.
    The Jacobian must keep full rank on every evaluated point set.
    """
    m = g.chart.dim
    exprs = _parse_grid(mapping, (m,))

    def fn(pts: np.ndarray, order: int):
        if order > 2:
            raise ValueError("pullback metrics support derivative order <= 2")
        Mj = _eval_expr_grid(exprs, (m,), new_chart, pts, order + 1)
        image, J = Mj[0], Mj[1]
        sv = np.linalg.svd(J, compute_uv=False)
        if np.any(sv[:, -1] <= rank_rtol * sv[:, 0]):
            raise RankDeficientError("map Jacobian is rank-deficient at a sample point")
        gt = g.jets(image, order)
        g0 = gt[0]
        out0 = np.einsum("pij,pia,pjb->pab", g0, J, J)
        if order == 0:
            return (out0,)
        H = Mj[2]
        dgt = gt[1]
        out1 = (np.einsum("pijk,pkc,pia,pjb->pabc", dgt, J, J, J)
                + np.einsum("pij,piac,pjb->pabc", g0, H, J)
                + np.einsum("pij,pia,pjbc->pabc", g0, J, H))
        if order == 1:
            return (out0, out1)
        K = Mj[3]
        ddgt = gt[2]
        out2 = (np.einsum("pijkl,pkc,pld,pia,pjb->pabcd", ddgt, J, J, J, J)
                + np.einsum("pijk,pkcd,pia,pjb->pabcd", dgt, H, J, J)
                + np.einsum("pijk,pkc,piad,pjb->pabcd", dgt, J, H, J)
                + np.einsum("pijk,pkc,pia,pjbd->pabcd", dgt, J, J, H)
                + np.einsum("pijl,pld,piac,pjb->pabcd", dgt, J, H, J)
                + np.einsum("pij,piacd,pjb->pabcd", g0, K, J)
                + np.einsum("pij,piac,pjbd->pabcd", g0, H, H)
                + np.einsum("pijl,pld,pia,pjbc->pabcd", dgt, J, J, H)
                + np.einsum("pij,piad,pjbc->pabcd", g0, H, H)
                + np.einsum("pij,pia,pjbcd->pabcd", g0, J, K))
        return (out0, out1, out2)

    return MetricField(new_chart, fn=fn, max_order=min(2, g.max_order))
