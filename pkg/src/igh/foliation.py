"""Second-covariant-derivative solution algebras and their leaf structure.

For a connection field Gamma the operator

    theta^l_ij(X) = d_i d_j X^l + Gamma^l_jk d_i X^k + Gamma^l_ik d_j X^k
                    - Gamma^k_ij d_k X^l
                    + (d_i Gamma^l_jk + Gamma^l_im Gamma^m_jk
                       - Gamma^m_ij Gamma^l_mk) X^k

is the coordinate form of X -> nabla(nabla X).  Its kernel is solved
numerically over the space of polynomial vector fields of bounded degree
on a chart (the kernel has finite dimension, so a large enough polynomial
degree captures it): collocation rows at low-discrepancy points feed one
SVD, singular vectors below threshold are candidate solutions, and every
candidate must re-validate on fresh points before it counts.  The
surviving span closes under the connection product nabla_U V, which the
closure report checks together with bracket closure and associativity.
Pointwise evaluation of the span defines a singular distribution whose
rank is the local leaf dimension; leaves are traced with fourth-order
integrator flows and checked to be flat Hessian pieces (leaf-projected
curvature, covariant metric-derivative symmetry).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations_with_replacement
from typing import Optional

import numpy as np

from .tensor import (
    ChartSpec,
    ConnectionField,
    GeometryError,
    MetricField,
    _as_points,
    cubic_form,
    curvature,
)

__all__ = [
    "PolyVectorBasis",
    "PolyVectorField",
    "SolutionBasis",
    "LeafSample",
    "ClosureReport",
    "RefinementReport",
    "nabla2_apply",
    "solve_solution_space",
    "refine_degree",
    "product_closure_check",
    "leaf_rank",
    "trace_leaf",
    "leaf_hessian_check",
]

RANK_TOL = 1e-8
VALIDATION_TOL = 1e-6


# ---------------------------------------------------------------------------
# Polynomial vector fields


def _graded_exponents(dim: int, degree: int) -> np.ndarray:
    """All exponent tuples with |a| <= degree, graded then lexicographic."""
    out = []
    for total in range(degree + 1):
        batch = set()
        for combo in combinations_with_replacement(range(dim), total):
            a = [0] * dim
            for i in combo:
                a[i] += 1
            batch.add(tuple(a))
        out.extend(sorted(batch, reverse=True))
    return np.array(out, dtype=int).reshape(len(out), dim)


@dataclass(frozen=True, eq=False)
class PolyVectorBasis:
    """Monomial vector fields m_a(u) d/dx^c of degree <= max_degree.

    Monomials live in box-centered scaled coordinates u = (x - mid)/half,
    which keeps the collocation matrix conditioned on skewed charts.
    Element order: exponent-major with the coordinate direction innermost.
    """

    chart: ChartSpec
    max_degree: int

    def __post_init__(self):
        if self.max_degree < 0:
            raise ValueError("polynomial degree must be nonnegative")

    @cached_property
    def exponents(self) -> np.ndarray:
        return _graded_exponents(self.chart.dim, self.max_degree)

    @property
    def monomial_count(self) -> int:
        return self.exponents.shape[0]

    @property
    def size(self) -> int:
        return self.monomial_count * self.chart.dim

    def index_of(self, exponents, direction: int) -> int:
        """Flat basis index of the monomial field u^a d/dx^direction."""
        a = np.asarray(exponents, dtype=int)
        hits = np.where((self.exponents == a).all(axis=1))[0]
        if hits.size == 0:
            raise ValueError(f"exponent {a.tolist()} not in a degree-{self.max_degree} basis")
        if not 0 <= direction < self.chart.dim:
            raise ValueError("direction outside the chart dimension")
        return int(hits[0]) * self.chart.dim + direction

    def monomial_tables(self, pts: np.ndarray, order: int = 2):
        """Monomial values and scaled-coordinate derivatives through order."""
        pts = np.asarray(pts, dtype=float)
        n = self.chart.dim
        lo, hi = self.chart.lo, self.chart.hi
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        u = (pts - mid) / half
        A = self.exponents
        E = A.shape[0]
        P = pts.shape[0]
        pw = u[:, :, None] ** np.arange(self.max_degree + 2)

        def product(expos: np.ndarray) -> np.ndarray:
            out = np.ones((P, E))
            for i in range(n):
                out *= pw[:, i, np.maximum(expos[:, i], 0)]
            return out

        mono = product(A)
        if order == 0:
            return (mono,)
        dmono = np.zeros((P, E, n))
        for j in range(n):
            ej = np.zeros(n, dtype=int)
            ej[j] = 1
            coef = A[:, j] / half[j]
            live = A[:, j] >= 1
            if np.any(live):
                dmono[:, live, j] = coef[live] * product(A - ej)[:, live]
        if order == 1:
            return mono, dmono
        ddmono = np.zeros((P, E, n, n))
        for i in range(n):
            for j in range(i, n):
                ei = np.zeros(n, dtype=int)
                ei[i] += 1
                ei[j] += 1
                if i == j:
                    coef = A[:, i] * (A[:, i] - 1) / half[i] ** 2
                    live = A[:, i] >= 2
                else:
                    coef = A[:, i] * A[:, j] / (half[i] * half[j])
                    live = (A[:, i] >= 1) & (A[:, j] >= 1)
                if np.any(live):
                    vals = coef[live] * product(A - ei)[:, live]
                    ddmono[:, live, i, j] = vals
                    ddmono[:, live, j, i] = vals
        return mono, dmono, ddmono


@dataclass(frozen=True, eq=False)
class PolyVectorField:
    """A coefficient vector over a polynomial vector-field basis."""

    basis: PolyVectorBasis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.basis.size,):
            raise ValueError(f"need {self.basis.size} coefficients")
        object.__setattr__(self, "coeffs", c)

    def _grid(self) -> np.ndarray:
        return self.coeffs.reshape(self.basis.monomial_count, self.basis.chart.dim)

    def values(self, pts) -> np.ndarray:
        pts, single = _as_points(pts, self.basis.chart.dim)
        mono, = self.basis.monomial_tables(pts, 0)
        X = np.einsum("pe,el->pl", mono, self._grid())
        return X[0] if single else X

    def tables(self, pts: np.ndarray):
        """X^l, d_j X^l, d_i d_j X^l arrays over a point batch."""
        mono, dmono, ddmono = self.basis.monomial_tables(pts, 2)
        c = self._grid()
        X = np.einsum("pe,el->pl", mono, c)
        dX = np.einsum("pej,el->plj", dmono, c)
        ddX = np.einsum("peij,el->plij", ddmono, c)
        return X, dX, ddX


# ---------------------------------------------------------------------------
# The operator


def _zeroth_block(conn: ConnectionField, pts: np.ndarray):
    """Connection values and the zeroth-order block W^l_ijk of the operator."""
    G, dG = conn.jets(pts, 1)
    W = np.einsum("pljki->plijk", dG)
    W += np.einsum("plim,pmjk->plijk", G, G)
    W -= np.einsum("pmij,plmk->plijk", G, G)
    return G, W


def nabla2_apply(conn: ConnectionField, X: PolyVectorField, p) -> np.ndarray:
    """theta(X) at points; out[l, i, j] is the (1,2)-valued second derivative."""
    pts, single = _as_points(p, conn.chart.dim)
    Xv, dX, ddX = X.tables(pts)
    G, W = _zeroth_block(conn, pts)
    th = ddX + np.einsum("pljk,pki->plij", G, dX)
    th += np.einsum("plik,pkj->plij", G, dX)
    th -= np.einsum("pkij,plk->plij", G, dX)
    th += np.einsum("plijk,pk->plij", W, Xv)
    return th[0] if single else th


def _collocation_matrix(conn: ConnectionField, basis: PolyVectorBasis,
                        pts: np.ndarray) -> np.ndarray:
    """Rows of theta over every basis element; shape (P n^3, B)."""
    mono, dmono, ddmono = basis.monomial_tables(pts, 2)
    G, W = _zeroth_block(conn, pts)
    n = basis.chart.dim
    eye = np.eye(n)
    th = np.einsum("peij,cl->peclij", ddmono, eye)
    th += np.einsum("pljc,pei->peclij", G, dmono)
    th += np.einsum("plic,pej->peclij", G, dmono)
    th -= np.einsum("pkij,pek,cl->peclij", G, dmono, eye)
    th += np.einsum("plijc,pe->peclij", W, mono)
    P = mono.shape[0]
    rows = th.reshape(P, basis.size, n ** 3)
    return rows.transpose(0, 2, 1).reshape(P * n ** 3, basis.size)


# ---------------------------------------------------------------------------
# Solution space


@dataclass(frozen=True, eq=False)
class SolutionBasis:
    """Orthonormal coefficient rows spanning the validated operator kernel."""

    basis: PolyVectorBasis
    coeffs: np.ndarray
    singular_values: np.ndarray
    residuals: np.ndarray
    condition: float
    rank_tol: float = RANK_TOL
    validation_tol: float = VALIDATION_TOL

    @property
    def k(self) -> int:
        return self.coeffs.shape[0]

    @property
    def chart(self) -> ChartSpec:
        return self.basis.chart

    @classmethod
    def from_fields(cls, basis: PolyVectorBasis, rows) -> "SolutionBasis":
        """Wrap explicit coefficient rows (no solving, no validation)."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        return cls(basis, rows, np.zeros(0), np.zeros(rows.shape[0]), 1.0)

    def field(self, i: int) -> PolyVectorField:
        return PolyVectorField(self.basis, self.coeffs[i])

    def values(self, pts) -> np.ndarray:
        """Basis-field values, shape (P, k, n)."""
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        mono, = self.basis.monomial_tables(pts, 0)
        c = self.coeffs.reshape(self.k, self.basis.monomial_count, self.basis.chart.dim)
        return np.einsum("pe,sel->psl", mono, c)

    def tables(self, pts: np.ndarray):
        mono, dmono, ddmono = self.basis.monomial_tables(pts, 2)
        c = self.coeffs.reshape(self.k, self.basis.monomial_count, self.basis.chart.dim)
        X = np.einsum("pe,sel->psl", mono, c)
        dX = np.einsum("pej,sel->pslj", dmono, c)
        ddX = np.einsum("peij,sel->pslij", ddmono, c)
        return X, dX, ddX


def _canonical_rows(rows, sigmas, residuals):
    """Deterministic solution order: descending sigma, then lexicographic.

    Rows are sign-fixed so the first coefficient above 1e-12 is positive.
    """
    fixed = []
    for v, s, r in zip(rows, sigmas, residuals):
        nz = np.where(np.abs(v) > 1e-12)[0]
        if nz.size and v[nz[0]] < 0:
            v = -v
        fixed.append((round(float(s), 12), tuple(np.round(v, 12)), v, r))
    fixed.sort(key=lambda t: (-t[0], t[1]))
    return (np.array([t[2] for t in fixed]),
            np.array([t[3] for t in fixed]))


def solve_solution_space(conn: ConnectionField, chart: ChartSpec | None = None,
                         degree: int = 4, points: int = 64, seed: int = 0,
                         rank_tol: float = RANK_TOL,
                         validation_tol: float = VALIDATION_TOL) -> SolutionBasis:
    """Validated kernel of theta over polynomial fields of bounded degree.

    Collocation at ``points`` low-discrepancy chart points stacks one row
    block per point; right singular vectors with sigma <= rank_tol * sigma_max
    are candidates, and each must satisfy max|theta(X)| <= validation_tol
    times its sup norm on a fresh point set to be kept.
    """
    chart = conn.chart if chart is None else chart
    basis = PolyVectorBasis(chart, degree)
    n = chart.dim
    if points * n ** 3 < basis.size:
        raise ValueError(
            f"{points} collocation points give {points * n ** 3} rows "
            f"for {basis.size} unknowns; increase points")
    pts = chart.sample(points, seed=seed)
    A = _collocation_matrix(conn, basis, pts)
    _, s, Vh = np.linalg.svd(A, full_matrices=False)
    top = s[0] if s.size else 0.0
    if top == 0.0:
        null = np.ones(basis.size, dtype=bool)
    else:
        null = s <= rank_tol * top
    candidates = Vh[null]
    cand_sigma = s[null]

    fresh = chart.sample(points, seed=seed + 101)
    Afresh = _collocation_matrix(conn, basis, fresh)
    mono, = basis.monomial_tables(fresh, 0)
    keep_rows, keep_sigma, keep_res = [], [], []
    for v, sv in zip(candidates, cand_sigma):
        theta_norm = float(np.max(np.abs(Afresh @ v)))
        grid = v.reshape(basis.monomial_count, n)
        field_norm = float(np.max(np.abs(np.einsum("pe,el->pl", mono, grid))))
        if theta_norm <= validation_tol * max(field_norm, 1e-30):
            keep_rows.append(v)
            keep_sigma.append(sv)
            keep_res.append(theta_norm / max(field_norm, 1e-30))
    if keep_rows:
        coeffs, res = _canonical_rows(keep_rows, keep_sigma, keep_res)
    else:
        coeffs = np.zeros((0, basis.size))
        res = np.zeros(0)
    retained = s[~null]
    condition = float(top / retained[-1]) if retained.size and retained[-1] > 0 else 1.0
    return SolutionBasis(basis, coeffs, s, res, condition, rank_tol, validation_tol)


@dataclass(frozen=True)
class RefinementReport:
    """Kernel dimension as a function of polynomial degree."""

    degrees: tuple[int, ...]
    dimensions: tuple[int, ...]
    stable_from: Optional[int]

    @property
    def stable(self) -> bool:
        return self.stable_from is not None


def refine_degree(conn: ConnectionField, chart: ChartSpec | None = None,
                  degrees=(1, 2, 3, 4), points: int = 64, seed: int = 0) -> RefinementReport:
    """Solve across degrees and report where the dimension stops moving."""
    degrees = tuple(degrees)
    ks = tuple(solve_solution_space(conn, chart, d, points, seed).k for d in degrees)
    stable_from = None
    for i in range(len(degrees)):
        if len(set(ks[i:])) == 1:
            stable_from = degrees[i]
            break
    return RefinementReport(degrees, ks, stable_from)


# ---------------------------------------------------------------------------
# Algebra closure


@dataclass(frozen=True)
class ClosureReport:
    """Span/bracket/associativity residuals of the connection product."""

    pairs: int
    product_residual: float
    bracket_residual: float
    associativity_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return (self.product_residual <= self.tol
                and self.bracket_residual <= self.tol
                and self.associativity_residual <= self.tol)


def product_closure_check(conn: ConnectionField, S: SolutionBasis,
                          points: int = 48, seed: int = 0,
                          tol: float = 1e-5) -> ClosureReport:
    """Project every product nabla_U V onto the solution span and measure.

    Products, brackets, and the associator are compared as fields over a
    validation sample; product and bracket residuals are relative to the
    product's own sup norm, the associator is absolute on unit-coefficient
    combinations.
    """
    if S.k == 0:
        return ClosureReport(0, 0.0, 0.0, 0.0, tol)
    pts = S.chart.sample(points, seed=seed + 7)
    X, dX, _ = S.tables(pts)
    G = conn.values(pts)
    prod = np.einsum("psi,ptli->pstl", X, dX)
    prod += np.einsum("plik,psi,ptk->pstl", G, X, X)
    P, k, n = X.shape
    D = X.transpose(0, 2, 1).reshape(P * n, k)
    targets = prod.transpose(1, 2, 0, 3).reshape(k, k, P * n)
    alpha = np.empty((k, k, k))
    remain = np.empty((k, k, P * n))
    for s_i in range(k):
        for t_i in range(k):
            sol, *_ = np.linalg.lstsq(D, targets[s_i, t_i], rcond=None)
            alpha[s_i, t_i] = sol
            remain[s_i, t_i] = targets[s_i, t_i] - D @ sol
    scale = np.maximum(np.max(np.abs(targets), axis=2), 1e-12)
    tiny = np.max(np.abs(targets), axis=2) < 1e-12
    rel = np.max(np.abs(remain), axis=2) / scale
    rel[tiny] = 0.0
    product_residual = float(np.max(rel))

    bracket_tgt = targets - targets.transpose(1, 0, 2)
    bracket_fit = np.einsum("stc,rc->str", alpha - alpha.transpose(1, 0, 2), D)
    bscale = np.maximum(np.max(np.abs(bracket_tgt), axis=2), 1e-12)
    btiny = np.max(np.abs(bracket_tgt), axis=2) < 1e-12
    brel = np.max(np.abs(bracket_tgt - bracket_fit), axis=2) / bscale
    brel[btiny] = 0.0
    bracket_residual = float(np.max(brel))

    lhs = np.einsum("twc,scr->stwr", alpha, alpha)
    rhs = np.einsum("stc,cwr->stwr", alpha, alpha)
    assoc_fields = np.einsum("stwc,pcl->stwpl", lhs - rhs, X)
    associativity_residual = float(np.max(np.abs(assoc_fields))) if k else 0.0

    return ClosureReport(k * k, product_residual, bracket_residual,
                         associativity_residual, tol)


# ---------------------------------------------------------------------------
# Leaves


def leaf_rank(S: SolutionBasis, p, rank_tol: float = RANK_TOL):
    """Rank of the k x n matrix of basis-field values (leaf dimension)."""
    pts, single = _as_points(p, S.chart.dim)
    vals = S.values(pts)
    out = np.zeros(pts.shape[0], dtype=int)
    for i, M in enumerate(vals):
        if S.k == 0:
            continue
        sv = np.linalg.svd(M, compute_uv=False)
        if sv.size and sv[0] > 0.0:
            out[i] = int(np.sum(sv > rank_tol * sv[0]))
    return int(out[0]) if single else out


@dataclass(frozen=True, eq=False)
class LeafSample:
    """A traced orbit with its rank record and optional Hessian residuals."""

    seed: np.ndarray
    points: np.ndarray
    rank: int
    ranks: np.ndarray
    exited: bool
    curvature_residual: Optional[float] = None
    metric_symmetry_residual: Optional[float] = None


def trace_leaf(S: SolutionBasis, seed, steps: int = 200, h: float = 0.02,
               g: MetricField | None = None,
               conn: ConnectionField | None = None) -> LeafSample:
    """Round-robin fourth-order flows of the basis fields from a seed.

    Periodic coordinates wrap; leaving a non-periodic face stops the trace
    with ``exited`` set and the partial trace returned.  Passing the metric
    and connection fills the Hessian-leaf residual pair for the seed.
    """
    chart = S.chart
    seed = np.asarray(seed, dtype=float)
    r0 = leaf_rank(S, seed)
    if r0 < 1:
        raise GeometryError("no leaf through this point (rank 0)")

    def velocity(i: int, q: np.ndarray) -> np.ndarray:
        return S.values(q[None])[0, i]

    y = seed.copy()
    pts = [y.copy()]
    exited = False
    for step in range(steps):
        i = step % S.k
        k1 = velocity(i, y)
        k2 = velocity(i, y + 0.5 * h * k1)
        k3 = velocity(i, y + 0.5 * h * k2)
        k4 = velocity(i, y + h * k3)
        y = chart.wrap(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        if not chart.contains(y, margin=1e-12):
            exited = True
            break
        pts.append(y.copy())
    traced = np.array(pts)
    ranks = leaf_rank(S, traced)
    curv = sym = None
    if g is not None and conn is not None:
        curv, sym = leaf_hessian_check(g, conn, S, seed)
    return LeafSample(seed, traced, r0, np.atleast_1d(ranks), exited, curv, sym)


def _leaf_frame(S: SolutionBasis, point: np.ndarray, rank_tol: float) -> np.ndarray:
    vals = S.values(point[None])[0]
    if S.k == 0:
        return np.zeros((0, S.chart.dim))
    _, sv, Vt = np.linalg.svd(vals)
    if sv.size == 0 or sv[0] == 0.0:
        return np.zeros((0, S.chart.dim))
    r = int(np.sum(sv > rank_tol * sv[0]))
    return Vt[:r]


def leaf_hessian_check(g: MetricField, conn: ConnectionField, S: SolutionBasis,
                       p, rank_tol: float = RANK_TOL) -> tuple[float, float]:
    """(leaf-projected curvature, covariant metric symmetry) residual pair.

    The first is max |Pi R(X, Y) U| over leaf-frame triples with Pi the
    g-orthogonal projector onto the leaf tangent; the second is the
    symmetry defect of (nabla_X g)(Y, Z) over frame slots.  Ambient
    curvature transverse to the leaf is deliberately not penalized.
    """
    point = np.asarray(p, dtype=float)
    E = _leaf_frame(S, point, rank_tol)
    if E.shape[0] == 0:
        raise GeometryError("no leaf through this point (rank 0)")
    n = S.chart.dim
    R = curvature(conn, point)
    contracted = np.einsum("lkij,ai,bj,ck->labc", R, E, E, E)
    g0 = g.values(point[None])[0]
    M = E @ g0 @ E.T
    flat = contracted.reshape(n, -1)
    coords = np.linalg.solve(M, E @ g0 @ flat)
    projected = E.T @ coords
    curv_res = float(np.max(np.abs(projected))) if projected.size else 0.0
    T = cubic_form(g, conn).values(point[None])[0]
    S3 = np.einsum("abc,xa,yb,zc->xyz", T, E, E, E)
    sym_res = max(float(np.max(np.abs(S3 - S3.transpose(1, 0, 2)))),
                  float(np.max(np.abs(S3 - S3.transpose(0, 2, 1)))))
    return curv_res, sym_res
