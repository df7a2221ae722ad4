"""
Solving for Hessian leaves
==========================

The solution space of the second covariant derivative equation on a chart
is found by polynomial collocation.  Flat structures give the full affine
algebra; curved or twisted structures cut it down, and the surviving
fields integrate to leaves whose projected geometry is checked on the fly.
"""

import numpy as np

from igh.foliation import (
    leaf_hessian_check,
    leaf_rank,
    product_closure_check,
    refine_degree,
    solve_solution_space,
    trace_leaf,
)
from igh.tensor import ChartSpec, ConnectionField, MetricField, xi_statistical

###############################################################################
# The flat plane
# --------------
# With the zero connection every affine field solves the equation, so the
# solution space has dimension n + n^2 = 6, at every polynomial degree.

chart = ChartSpec(("x", "y"), ((-1.0, 1.0), (-1.0, 1.0)))
zero = [[["0", "0"], ["0", "0"]], [["0", "0"], ["0", "0"]]]
flat = ConnectionField.from_grid(chart, zero, torsion_free=True)

S = solve_solution_space(flat, chart, degree=4, points=64, seed=0)
print("flat plane: dimension", S.k,
      " worst validation residual", float(np.max(S.residuals)))

ref = refine_degree(flat, chart, degrees=(1, 2, 3, 4), points=64, seed=0)
print("dimension by degree:", dict(zip(ref.degrees, ref.dimensions)),
      " stable from", ref.stable_from)

###############################################################################
# A deformed structure
# --------------------
# The one-form construction with xi = dx on the Euclidean plane twists the
# connection; only three of the six affine directions survive.

g = MetricField.from_grid(chart, [["1", "0"], ["0", "1"]])
plus, _ = xi_statistical(g, ("1", "0"), 1.0)
S_xi = solve_solution_space(plus, chart, degree=3, points=48, seed=0)
print("\ndeformed plane: dimension", S_xi.k)
for i in range(S_xi.k):
    X = S_xi.field(i)
    sample = np.array([[0.0, 0.0], [0.5, 0.5]])
    print(f"  field {i}: values at origin / (0.5, 0.5):",
          np.round(X.values(sample), 6).tolist())

###############################################################################
# Closure of the solution space
# -----------------------------
# Products, brackets, and the associator of solution fields must stay
# inside the space; the residuals certify it is a genuine algebra.

closure = product_closure_check(plus, S_xi, seed=0)
print("closure residuals: product", closure.product_residual,
      " bracket", closure.bracket_residual,
      " associativity", closure.associativity_residual)

###############################################################################
# Tracing a leaf
# --------------
# Leaves are integrated with a fixed-step Runge-Kutta scheme, cycling
# through the solution fields.  The rank of the span at the seed bounds
# the leaf dimension.

seed_pt = np.array([0.25, 0.4])
print("\nrank at the seed:", leaf_rank(S_xi, seed_pt))
leaf = trace_leaf(S_xi, seed_pt, steps=150, h=0.01, g=g, conn=plus)
print("traced", len(leaf.points), "points; exited the chart:", leaf.exited)
print("leaf-projected curvature :", leaf.curvature_residual)
print("leaf metric symmetry     :", leaf.metric_symmetry_residual)

###############################################################################
# The same check by hand, at a different base point.

curv, sym = leaf_hessian_check(g, plus, S_xi, np.array([-0.3, 0.1]))
print("hand check at (-0.3, 0.1): curvature", curv, " symmetry", sym)

###############################################################################
# A curved ambient space
# ----------------------
# On the scaled product of a line with the hyperbolic plane the ambient
# curvature is nonzero, yet the two solution fields span one-dimensional
# leaves whose projected curvature vanishes.

chart3 = ChartSpec(("t", "r", "a"), ((-1.0, 1.0), (0.2, 2.0), (0.2, 6.0)))
rows = [["3", "0", "0"], ["0", "3", "0"], ["0", "0", "3*sinh(r)^2"]]
from igh.tensor import curvature, levi_civita

g3 = MetricField.from_grid(chart3, rows)
lc3 = levi_civita(g3)
S3 = solve_solution_space(lc3, chart3, degree=3, points=64, seed=0)
pts3 = chart3.sample(8, seed=1, shrink=0.2)
print("\ncurved product: dimension", S3.k,
      " ambient |curvature| =", float(np.max(np.abs(curvature(lc3, pts3)))))
curv3, sym3 = leaf_hessian_check(g3, lc3, S3, pts3[0])
print("leaf-projected curvature:", curv3)
