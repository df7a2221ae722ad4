"""
Fisher metrics and the dual connection family
=============================================

An exponential family is declared by its sufficient statistics; a general
model by its log-density.  Both expose the Fisher metric and the cubic
tensor through two independent routes, and the one-parameter connection
family interpolates between the exponential and mixture structures.
"""

import numpy as np

from igh.expfam import (
    ExpFamilySpec,
    alpha_christoffel,
    alpha_connection_field,
    cubic_from_expectation,
    cubic_from_psi,
    discrete_space,
    fisher_from_expectation,
    fisher_from_psi,
    fisher_metric_field,
    gauss_legendre_space,
    log_partition,
)
from igh.tensor import ChartSpec, cubic_form, curvature, levi_civita

###############################################################################
# The Gaussian family in natural coordinates
# ------------------------------------------
# Statistics (x, x^2) over a quadrature grid wide enough to be exact to
# machine precision for the parameter box below.

chart = ChartSpec(("t1", "t2"), ((-1.5, 1.5), (-2.0, -0.3)))
gaussian = ExpFamilySpec(
    gauss_legendre_space(-15.0, 15.0, 400),
    carrier="0",
    stats=("x", "x^2"),
    chart=chart,
)

theta = np.array([[0.0, -0.5], [0.8, -1.2]])
psi = log_partition(gaussian, theta)
closed = (-theta[:, 0] ** 2 / (4 * theta[:, 1])
          + 0.5 * np.log(np.pi) - 0.5 * np.log(-theta[:, 1]))
print("log-partition (quadrature):", np.round(psi, 10))
print("log-partition (closed)    :", np.round(closed, 10))

###############################################################################
# Two routes to the same metric
# -----------------------------
# Differentiating the log partition twice must match the covariance of the
# sufficient statistics.  The package checks this identity numerically.

pts = chart.sample(6, seed=0, shrink=0.2)
g_psi = fisher_from_psi(gaussian, pts)
g_cov = fisher_from_expectation(gaussian, pts)
print("fisher route agreement:", np.max(np.abs(g_psi - g_cov)))
print("fisher at (0, -0.5):")
print(np.round(fisher_from_psi(gaussian, np.array([[0.0, -0.5]]))[0], 12))

###############################################################################
# The cubic tensor, again both ways.

T_psi = cubic_from_psi(gaussian, pts)
T_exp = cubic_from_expectation(gaussian, pts)
print("cubic route agreement:", np.max(np.abs(T_psi - T_exp)))

###############################################################################
# The connection family
# ---------------------
# At the family midpoint the connection is the metric one; the exponential
# representative is flat in natural coordinates; and the covariant metric
# derivative is proportional to the cubic tensor across the family.

g_field = fisher_metric_field(gaussian)
mid = alpha_connection_field(gaussian, 0.0)
lc = levi_civita(g_field)
print("midpoint vs levi-civita:",
      np.max(np.abs(mid.values(pts) - lc.values(pts))))

exp_gamma = alpha_christoffel(gaussian, pts, 1.0)
print("exponential connection vanishes in natural coordinates:",
      np.max(np.abs(exp_gamma)))

for alpha in (-1.0, 0.5, 1.0):
    conn = alpha_connection_field(gaussian, alpha)
    dev = np.max(np.abs(cubic_form(g_field, conn).values(pts) - alpha * T_exp))
    R = np.max(np.abs(curvature(conn, pts)))
    print(f"alpha = {alpha:+.1f}: covariant-dg defect {dev:.2e}, "
          f"max curvature {R:.2e}")

###############################################################################
# A discrete family gets the same treatment.

coin_chart = ChartSpec(("t",), ((-4.0, 4.0),))
coin = ExpFamilySpec(discrete_space([0.0, 1.0]), "0", ("x",), coin_chart)
t0 = np.array([[0.0]])
print("bernoulli fisher at t = 0:", fisher_from_psi(coin, t0)[0, 0, 0],
      " (p(1-p) = 0.25)")
