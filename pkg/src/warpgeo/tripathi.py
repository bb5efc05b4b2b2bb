"""The generalized torsion/non-metricity connection family.

The family is parameterized by scalar fields f1, f2, vector fields P, P1, P2
and a (1,1) tensor phi. Writing u = g(P, .), u1 = g(P1, .), u2 = g(P2, .) and
splitting phi metrically into its symmetric part phi1 and skew part phi2, the
connection is

    nabla_X Y = LC_X Y + u(Y) phi1 X - u(X) phi2 Y - g(phi1 X, Y) P
                - f1 { u1(X) Y + u1(Y) X - g(X, Y) P1 }
                - f2 g(X, Y) P2

with torsion u(Y) phi X - u(X) phi Y and non-metricity
2 f1 u1(X) g(Y,Z) + f2 { u2(Y) g(X,Z) + u2(Z) g(X,Y) }. The named special
cases (semi-symmetric metric / non-metric, quarter-symmetric metric /
non-metric) are presets fixing some of the data.

Coefficient index convention: the first lower index is the differentiation
direction (X), the second is the argument (Y).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .expr import Jet, ScalarExpr, as_point, eval_jet
from .geometry import (
    ChartMetric,
    ConnectionCoefficients,
    GeometryError,
    Tensor11Field,
    VectorField,
    _christoffel_scalars,
    _field_values,
    _metric_scalars,
    cov_deriv_at,
    levi_civita,
    metric_at,
    sym_skew_split_at,
)

__all__ = [
    "TripathiError",
    "TripathiData",
    "PresetId",
    "PRESET_CATALOG",
    "one_forms_at",
    "coefficients",
    "coefficients_at",
    "torsion_claimed_at",
    "nonmetricity_claimed_at",
    "deformation_at",
    "connection_rhs_at",
    "preset",
    "validate_g_skew",
    "phi_from_skew",
]


class TripathiError(GeometryError):
    """Invalid connection data or preset parameters."""


@dataclass(frozen=True)
class TripathiData:
    """The tuple (f1, f2, P, P1, P2, phi) defining a connection on a chart.

    phi1/phi2 are always derived from phi by the metric split, never supplied
    independently; f1 and f2 are scalar fields, not constants.
    """

    f1: ScalarExpr
    f2: ScalarExpr
    P: VectorField
    P1: VectorField
    P2: VectorField
    phi: Tensor11Field

    @property
    def names(self) -> tuple[str, ...]:
        return self.f1.vars

    @classmethod
    def create(
        cls,
        names: Sequence[str],
        *,
        f1: ScalarExpr | str | float = 0.0,
        f2: ScalarExpr | str | float = 0.0,
        P: VectorField | Sequence | None = None,
        P1: VectorField | Sequence | None = None,
        P2: VectorField | Sequence | None = None,
        phi: Tensor11Field | Sequence | None = None,
    ) -> "TripathiData":
        names = tuple(names)

        def scalar(v):
            if isinstance(v, ScalarExpr):
                return v.rebase(names) if v.vars != names else v
            if isinstance(v, str):
                from .expr import parse

                return parse(v, names)
            return ScalarExpr.constant(names, float(v))

        def field(v):
            if v is None:
                return VectorField.zero(names)
            if isinstance(v, VectorField):
                return v
            return VectorField.from_components(names, v)

        if phi is None:
            phi_t = Tensor11Field.zero(names)
        elif isinstance(phi, Tensor11Field):
            phi_t = phi
        else:
            phi_t = Tensor11Field.from_rows(names, phi)

        data = cls(scalar(f1), scalar(f2), field(P), field(P1), field(P2), phi_t)
        data.validate(names)
        return data

    def validate(self, names: tuple[str, ...]):
        for label, obj in (("P", self.P), ("P1", self.P1), ("P2", self.P2)):
            if obj.names != names or obj.dim != len(names):
                raise TripathiError(f"{label} is not a vector field over {names}")
        if self.phi.names != names or self.phi.dim != len(names):
            raise TripathiError(f"phi is not a (1,1) field over {names}")
        for label, expr in (("f1", self.f1), ("f2", self.f2)):
            if expr.vars != names:
                raise TripathiError(f"{label} is not a scalar field over {names}")


class PresetId(str, Enum):
    LEVI_CIVITA = "levi_civita"
    SEMI_SYMMETRIC_METRIC = "semi_symmetric_metric"
    SEMI_SYMMETRIC_NON_METRIC = "semi_symmetric_non_metric"
    QUARTER_SYMMETRIC_METRIC = "quarter_symmetric_metric"
    QUARTER_SYMMETRIC_NON_METRIC = "quarter_symmetric_non_metric"


# free parameters and the fixed data of each named special case
PRESET_CATALOG: dict[PresetId, dict] = {
    PresetId.LEVI_CIVITA: {
        "free": (),
        "fixed": "f1 = f2 = 0, P = P1 = P2 = 0, phi = 0 (plain metric connection)",
    },
    PresetId.SEMI_SYMMETRIC_METRIC: {
        "free": ("P",),
        "fixed": "f1 = f2 = 0, phi = Id, P1 = P2 = 0",
    },
    PresetId.SEMI_SYMMETRIC_NON_METRIC: {
        "free": ("P",),
        "fixed": "f1 = 0, f2 = -1, phi = Id, P1 = 0, P2 = P (u2 = u structurally)",
    },
    PresetId.QUARTER_SYMMETRIC_METRIC: {
        "free": ("P", "phi"),
        "fixed": "f1 = f2 = 0, P1 = P2 = 0",
    },
    PresetId.QUARTER_SYMMETRIC_NON_METRIC: {
        "free": ("P", "P2", "f2", "phi"),
        "fixed": "f1 = 0, P1 = 0; phi must be metrically skew (phi1 = 0)",
    },
}


def one_forms_at(
    m: ChartMetric, d: TripathiData, p: Sequence[float]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The lowered covectors u = g(P,.), u1 = g(P1,.), u2 = g(P2,.) at p."""
    point = as_point(p, m.dim)
    g, _ = metric_at(m, point)
    return (
        g @ _field_values(d.P, point),
        g @ _field_values(d.P1, point),
        g @ _field_values(d.P2, point),
    )


def sum_scalars(terms) -> float | Jet:
    acc = None
    for t in terms:
        acc = t if acc is None else acc + t
    return acc


def coefficients(m: ChartMetric, d: TripathiData) -> ConnectionCoefficients:
    """Coefficient field of the connection: the package's ground truth.

    The same construction runs over floats (values) or first-order jets
    (values plus derivatives, for curvature); the jet run differentiates the
    whole assembly, inverse metric included.
    """
    if d.names != m.names:
        raise TripathiError(f"data is over {d.names}, chart is {m.names}")
    n = m.dim

    def build(p: np.ndarray, jets: bool):
        g, dg, ginv, _ = _metric_scalars(m, p, jets)
        gamma = _christoffel_scalars(dg, ginv, n)

        def sval(e: ScalarExpr):
            return eval_jet(e, p, 1) if jets else eval_jet(e, p, 0).value

        f1 = sval(d.f1)
        f2 = sval(d.f2)
        pv = [sval(c) for c in d.P.components]
        p1v = [sval(c) for c in d.P1.components]
        p2v = [sval(c) for c in d.P2.components]
        phi = [[sval(d.phi.components[k][i]) for i in range(n)] for k in range(n)]

        def lower(vec):
            return [sum_scalars(g[i][l] * vec[l] for l in range(n)) for i in range(n)]

        u, u1 = lower(pv), lower(p1v)
        big_phi = [
            [sum_scalars(g[k][j] * phi[k][i] for k in range(n)) for j in range(n)]
            for i in range(n)
        ]
        phi1_low = [
            [0.5 * (big_phi[i][j] + big_phi[j][i]) for j in range(n)] for i in range(n)
        ]
        phi2_low = [
            [0.5 * (big_phi[i][j] - big_phi[j][i]) for j in range(n)] for i in range(n)
        ]
        phi1 = [
            [sum_scalars(ginv[k][j] * phi1_low[i][j] for j in range(n)) for i in range(n)]
            for k in range(n)
        ]
        phi2 = [
            [sum_scalars(ginv[k][j] * phi2_low[i][j] for j in range(n)) for i in range(n)]
            for k in range(n)
        ]

        out = [[[None] * n for _ in range(n)] for _ in range(n)]
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    acc = (
                        gamma[k][i][j]
                        + u[j] * phi1[k][i]
                        - u[i] * phi2[k][j]
                        - phi1_low[i][j] * pv[k]
                        + f1 * (g[i][j] * p1v[k])
                        - f2 * (g[i][j] * p2v[k])
                    )
                    if k == j:
                        acc = acc - f1 * u1[i]
                    if k == i:
                        acc = acc - f1 * u1[j]
                    out[k][i][j] = acc
        return out

    return ConnectionCoefficients(n, build)


def coefficients_at(m: ChartMetric, d: TripathiData, p: Sequence[float]) -> np.ndarray:
    return coefficients(m, d).at(p)


def _phi_values(phi: Tensor11Field, p: np.ndarray) -> np.ndarray:
    n = phi.dim
    return np.array(
        [[eval_jet(phi.components[k][i], p, 0).value for i in range(n)] for k in range(n)]
    )


def torsion_claimed_at(
    m: ChartMetric, d: TripathiData, X: VectorField, Y: VectorField, p: Sequence[float]
) -> np.ndarray:
    """The asserted torsion u(Y) phi X - u(X) phi Y at p."""
    point = as_point(p, m.dim)
    u, _, _ = one_forms_at(m, d, point)
    phi = _phi_values(d.phi, point)
    xv = _field_values(X, point)
    yv = _field_values(Y, point)
    return (u @ yv) * (phi @ xv) - (u @ xv) * (phi @ yv)


def nonmetricity_claimed_at(
    m: ChartMetric,
    d: TripathiData,
    X: VectorField,
    Y: VectorField,
    Z: VectorField,
    p: Sequence[float],
) -> float:
    """The asserted non-metricity 2 f1 u1(X) g(Y,Z) + f2 {u2(Y) g(X,Z) + u2(Z) g(X,Y)}."""
    point = as_point(p, m.dim)
    g, _ = metric_at(m, point)
    _, u1, u2 = one_forms_at(m, d, point)
    f1 = eval_jet(d.f1, point, 0).value
    f2 = eval_jet(d.f2, point, 0).value
    xv = _field_values(X, point)
    yv = _field_values(Y, point)
    zv = _field_values(Z, point)
    return 2.0 * f1 * (u1 @ xv) * (yv @ g @ zv) + f2 * (
        (u2 @ yv) * (xv @ g @ zv) + (u2 @ zv) * (xv @ g @ yv)
    )


def deformation_at(
    m: ChartMetric, d: TripathiData, X: VectorField, Y: VectorField, p: Sequence[float]
) -> np.ndarray:
    """Operator-form difference nabla_X Y - LC_X Y, evaluated pointwise.

    Independent of the coefficient transcription in :func:`coefficients`;
    used as the uniqueness oracle.
    """
    point = as_point(p, m.dim)
    g, _ = metric_at(m, point)
    u, u1, _ = one_forms_at(m, d, point)
    phi1, phi2 = sym_skew_split_at(m, d.phi, point)
    f1 = eval_jet(d.f1, point, 0).value
    f2 = eval_jet(d.f2, point, 0).value
    xv = _field_values(X, point)
    yv = _field_values(Y, point)
    pv = _field_values(d.P, point)
    p1v = _field_values(d.P1, point)
    p2v = _field_values(d.P2, point)
    gxy = xv @ g @ yv
    phi1x = phi1 @ xv
    return (
        (u @ yv) * phi1x
        - (u @ xv) * (phi2 @ yv)
        - (phi1x @ g @ yv) * pv
        - f1 * ((u1 @ xv) * yv + (u1 @ yv) * xv - gxy * p1v)
        - f2 * gxy * p2v
    )


def connection_rhs_at(
    m: ChartMetric, d: TripathiData, X: VectorField, Y: VectorField, p: Sequence[float]
) -> np.ndarray:
    """Operator-form evaluation of the defining formula's right-hand side."""
    return cov_deriv_at(levi_civita(m), X, Y, p) + deformation_at(m, d, X, Y, p)


def validate_g_skew(
    m: ChartMetric,
    phi: Tensor11Field,
    points: Sequence[Sequence[float]],
    tol: float = 1e-10,
):
    """Require the metrically symmetric part of phi to vanish at the points."""
    for p in points:
        phi1, _ = sym_skew_split_at(m, phi, p)
        worst = float(np.max(np.abs(phi1)))
        if worst > tol:
            raise TripathiError(
                f"phi has a nonzero symmetric part (max |phi1| = {worst:.3e} at "
                f"point {as_point(p).tolist()}); this preset requires phi1 = 0"
            )


def phi_from_skew(
    m: ChartMetric, skew_rows: Sequence[Sequence[ScalarExpr | str | float]]
) -> Tensor11Field:
    """Raise a skew (0,2) pattern S into phi = g^-1 S on a diagonal chart.

    Only diagonal metrics are supported (the inverse must exist as an
    expression); the result satisfies phi1 = 0 wherever the metric is valid.
    """
    names = m.names
    n = m.dim
    for i in range(n):
        for j in range(n):
            if i != j and not m.g[i][j].is_zero_constant():
                raise TripathiError("phi_from_skew requires a diagonal metric")
    from .geometry import _as_expr

    s = [[_as_expr(e, names) for e in row] for row in skew_rows]
    if len(s) != n or any(len(r) != n for r in s):
        raise TripathiError(f"skew pattern must be {n}x{n}")
    for i in range(n):
        if not s[i][i].is_zero_constant():
            raise TripathiError("skew pattern must have a zero diagonal")
    # phi^k_i = g^{kk} S_ik on a diagonal chart; skewness of the off-diagonal
    # pattern is validated numerically by validate_g_skew downstream
    rows = [[s[i][k] / m.g[k][k] for i in range(n)] for k in range(n)]
    return Tensor11Field(tuple(tuple(r) for r in rows))


def preset(
    preset_id: PresetId | str,
    names: Sequence[str],
    *,
    P: VectorField | Sequence | None = None,
    P2: VectorField | Sequence | None = None,
    f2: ScalarExpr | str | float | None = None,
    phi: Tensor11Field | Sequence | None = None,
    metric: ChartMetric | None = None,
    probe_points: Sequence[Sequence[float]] | None = None,
) -> TripathiData:
    """Build the data of a named special case from exactly its free parameters.

    For ``quarter_symmetric_non_metric`` the metric skewness of phi is
    validated when ``metric`` and ``probe_points`` are supplied (the audit and
    CLI paths always do).
    """
    pid = PresetId(preset_id)
    names = tuple(names)
    supplied = {"P": P, "P2": P2, "f2": f2, "phi": phi}
    free = set(PRESET_CATALOG[pid]["free"])
    extra = sorted(k for k, v in supplied.items() if v is not None and k not in free)
    missing = sorted(k for k in free if supplied[k] is None)
    if extra:
        raise TripathiError(f"preset {pid.value} fixes parameter(s) {extra}")
    if missing:
        raise TripathiError(f"preset {pid.value} requires parameter(s) {missing}")

    if pid is PresetId.LEVI_CIVITA:
        return TripathiData.create(names)
    if pid is PresetId.SEMI_SYMMETRIC_METRIC:
        return TripathiData.create(names, P=P, phi=Tensor11Field.identity(names))
    if pid is PresetId.SEMI_SYMMETRIC_NON_METRIC:
        data = TripathiData.create(
            names, f2=-1.0, P=P, phi=Tensor11Field.identity(names)
        )
        # u2 = u holds structurally: P2 is the same field object as P
        return TripathiData(data.f1, data.f2, data.P, data.P1, data.P, data.phi)
    if pid is PresetId.QUARTER_SYMMETRIC_METRIC:
        return TripathiData.create(names, P=P, phi=phi)
    data = TripathiData.create(names, f2=f2, P=P, P2=P2, phi=phi)
    if metric is not None and probe_points is not None:
        validate_g_skew(metric, data.phi, probe_points)
    return data
