"""Verification-grade toolkit for statistical and Hessian geometry.

Fisher metrics and alpha-connections from exponential-family or general
likelihood models, Koszul forms, Hessian-structure diagnostics, the
Lorentz-cone characteristic function with its explicit Hessian metric,
polynomial solution spaces of the second covariant derivative with their
singular foliations, and mapping-torus Betti arithmetic.  The ``igh``
command line drives the same analyses from declarative spec files.
"""

from .expr import (
    EvalDomainError,
    ExprSyntaxError,
    Jet,
    UnboundVariableError,
    evaluate,
    eval_value,
    parse,
    parse_expr,
    seed_point,
)
from .tensor import (
    ChartSpec,
    ConnectionField,
    CubicField,
    GeometryError,
    HessianReport,
    MetricField,
    RankDeficientError,
    SingularMetricError,
    VanishingFieldError,
    alpha_connection,
    check_metric,
    cubic_form,
    curvature,
    dual_connection,
    hessian_criteria,
    koszul_form,
    koszul_routes,
    levi_civita,
    pullback_metric,
    torsion,
    xi_statistical,
)
from .expfam import (
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
from .cone import (
    ConeConvergenceError,
    ConePoint,
    ConeVerifyReport,
    DualConePoint,
    IsometryReport,
    char_closed,
    char_numeric,
    chi0,
    cone_density,
    cone_fisher,
    cone_fisher_explicit,
    cone_fisher_from_family,
    cone_koszul,
    cone_metric_field,
    cone_verify,
    density_normalization,
    q_form,
    verify_isometry,
)
from .foliation import (
    ClosureReport,
    LeafSample,
    PolyVectorBasis,
    PolyVectorField,
    RefinementReport,
    SolutionBasis,
    leaf_hessian_check,
    leaf_rank,
    nabla2_apply,
    product_closure_check,
    refine_degree,
    solve_solution_space,
    trace_leaf,
)
from .topo import (
    FLAT,
    MAPPING_TORUS,
    InconsistentLeafError,
    LeafTopologyReport,
    MonodromyMatrix,
    NonPeriodicMonodromyError,
    classify_dichotomy,
    is_periodic,
    leaf_topology_report,
    mapping_torus_betti,
    parity_check,
    periodic_order,
    sl2_bounded,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # expressions
    "EvalDomainError", "ExprSyntaxError", "Jet", "UnboundVariableError",
    "evaluate", "eval_value", "parse", "parse_expr", "seed_point",
    # tensor calculus
    "ChartSpec", "ConnectionField", "CubicField", "GeometryError",
    "HessianReport", "MetricField", "RankDeficientError",
    "SingularMetricError", "VanishingFieldError", "alpha_connection",
    "check_metric", "cubic_form", "curvature", "dual_connection",
    "hessian_criteria", "koszul_form", "koszul_routes", "levi_civita",
    "pullback_metric", "torsion", "xi_statistical",
    # models
    "ExpFamilySpec", "GeneralModelSpec", "NormalizationError", "SampleSpace",
    "alpha_christoffel", "alpha_connection_field", "cubic_from_expectation",
    "cubic_from_psi", "discrete_space", "fisher_from_expectation",
    "fisher_from_psi", "fisher_metric_field", "gauss_legendre_space",
    "gaussian_natural_inverse", "gaussian_natural_map", "log_partition",
    "log_partition_jet",
    # cone
    "ConeConvergenceError", "ConePoint", "ConeVerifyReport", "DualConePoint",
    "IsometryReport", "char_closed", "char_numeric", "chi0", "cone_density",
    "cone_fisher", "cone_fisher_explicit", "cone_fisher_from_family",
    "cone_koszul", "cone_metric_field", "cone_verify",
    "density_normalization", "q_form", "verify_isometry",
    # foliation
    "ClosureReport", "LeafSample", "PolyVectorBasis", "PolyVectorField",
    "RefinementReport", "SolutionBasis", "leaf_hessian_check", "leaf_rank",
    "nabla2_apply", "product_closure_check", "refine_degree",
    "solve_solution_space", "trace_leaf",
    # topology
    "FLAT", "MAPPING_TORUS", "InconsistentLeafError", "LeafTopologyReport",
    "MonodromyMatrix", "NonPeriodicMonodromyError", "classify_dichotomy",
    "is_periodic", "leaf_topology_report", "mapping_torus_betti",
    "parity_check", "periodic_order", "sl2_bounded",
]
