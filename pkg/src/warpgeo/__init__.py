"""Warped-product geometry and connection-identity audit toolkit.

Build coordinate charts with expression-valued metrics, assemble warped
products, realize the generalized torsion/non-metricity connection family as
coefficient fields, and audit every decomposition identity numerically
against exact-derivative ground truth.
"""

from .expr import (
    DomainError,
    ExprError,
    Jet,
    ParseError,
    ScalarExpr,
    eval_jet,
    fd_derivative,
    parse,
)
from .geometry import (
    ChartMetric,
    ConnectionCoefficients,
    GeometryError,
    MetricError,
    Tensor11Field,
    VectorField,
    christoffel_at,
    cov_deriv_at,
    curvature_at,
    gradient_at,
    levi_civita,
    lie_bracket_at,
    metric_at,
    nonmetricity_at,
    sym_skew_split_at,
    torsion_at,
)
from .warped import (
    PositivityError,
    WarpedProduct,
    WarpedProductError,
    build_warped,
    grad_lift_residual,
    lift_field,
    lift_scalar,
    oneill_residuals_at,
    split_at,
)
from .tripathi import (
    PresetId,
    TripathiData,
    TripathiError,
    coefficients,
    coefficients_at,
    connection_rhs_at,
    nonmetricity_claimed_at,
    one_forms_at,
    preset,
    torsion_claimed_at,
)
from .audit import (
    AuditConfigError,
    AuditError,
    AuditReport,
    CheckResult,
    CHECKS,
    Placement,
    PlacementError,
    corollary_suite,
    expand_checks,
    run_audit,
    sample_points,
)
from .fixtures import FIXTURES, Fixture

__all__ = [
    # expr
    "DomainError", "ExprError", "Jet", "ParseError", "ScalarExpr",
    "eval_jet", "fd_derivative", "parse",
    # geometry
    "ChartMetric", "ConnectionCoefficients", "GeometryError", "MetricError",
    "Tensor11Field", "VectorField", "christoffel_at", "cov_deriv_at",
    "curvature_at", "gradient_at", "levi_civita", "lie_bracket_at",
    "metric_at", "nonmetricity_at", "sym_skew_split_at", "torsion_at",
    # warped
    "PositivityError", "WarpedProduct", "WarpedProductError", "build_warped",
    "grad_lift_residual", "lift_field", "lift_scalar", "oneill_residuals_at",
    "split_at",
    # connection family
    "PresetId", "TripathiData", "TripathiError", "coefficients",
    "coefficients_at", "connection_rhs_at", "nonmetricity_claimed_at",
    "one_forms_at", "preset", "torsion_claimed_at",
    # audit
    "AuditConfigError", "AuditError", "AuditReport", "CheckResult", "CHECKS",
    "Placement", "PlacementError", "corollary_suite", "expand_checks",
    "run_audit", "sample_points",
    # fixtures
    "FIXTURES", "Fixture",
]

__version__ = "0.1.0"
