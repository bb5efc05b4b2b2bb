"""Pointwise Riemannian machinery on a single coordinate chart.

Connections are represented canonically as coefficient fields: rank-3
evaluators returning ``G[k][i][j]`` with k the output index, i the
differentiation direction and j the argument. Every operator-form identity in
this package reduces to contractions of these coefficients.

Coefficient derivatives (needed for curvature) are obtained by running the
entire coefficient construction — including the matrix inversion for the
inverse metric — over first-order jet scalars instead of floats, so no
hand-derived derivative formulas exist anywhere.

All types are immutable after construction; evaluation is pure and safe to
run concurrently at different points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .expr import Jet, ScalarExpr, as_point, eval_jet, parse

__all__ = [
    "GeometryError",
    "MetricError",
    "ChartMetric",
    "VectorField",
    "Tensor11Field",
    "ConnectionCoefficients",
    "levi_civita",
    "metric_at",
    "christoffel_at",
    "lie_bracket_at",
    "cov_deriv_at",
    "gradient_at",
    "sym_skew_split_at",
    "torsion_at",
    "nonmetricity_at",
    "curvature_at",
]


class GeometryError(ValueError):
    """Base class for chart-level geometric failures."""


class MetricError(GeometryError):
    """Metric not positive-definite (or singular) at an evaluation point."""


def _as_expr(entry: ScalarExpr | str | float, names: tuple[str, ...]) -> ScalarExpr:
    if isinstance(entry, ScalarExpr):
        if entry.vars != names:
            return entry.rebase(names)
        return entry
    if isinstance(entry, str):
        return parse(entry, names)
    return ScalarExpr.constant(names, float(entry))


@dataclass(frozen=True)
class ChartMetric:
    """A coordinate chart plus a symmetric matrix of metric components.

    Only the upper triangle is independent; mirrored entries share the same
    expression object, so evaluated matrices are exactly symmetric.
    """

    names: tuple[str, ...]
    g: tuple[tuple[ScalarExpr, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.names)

    @classmethod
    def from_rows(
        cls,
        names: Sequence[str],
        rows: Sequence[Sequence[ScalarExpr | str | float]],
    ) -> "ChartMetric":
        names = tuple(names)
        n = len(names)
        if len(rows) != n or any(len(r) != n for r in rows):
            raise GeometryError(
                f"metric must be a {n}x{n} matrix over coordinates {names}"
            )
        parsed = [[_as_expr(rows[i][j], names) for j in range(n)] for i in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                if parsed[i][j] != parsed[j][i]:
                    raise GeometryError(
                        f"metric entries ({i},{j}) and ({j},{i}) differ; write the "
                        "mirror entries identically"
                    )
        # mirror the upper triangle so both slots hold the same object
        grid = tuple(
            tuple(parsed[i][j] if i <= j else parsed[j][i] for j in range(n))
            for i in range(n)
        )
        return cls(names, grid)


@dataclass(frozen=True)
class VectorField:
    """Contravariant components X^k over a chart's coordinates."""

    components: tuple[ScalarExpr, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return self.components[0].vars

    @property
    def dim(self) -> int:
        return len(self.components)

    @classmethod
    def from_components(
        cls, names: Sequence[str], comps: Sequence[ScalarExpr | str | float]
    ) -> "VectorField":
        names = tuple(names)
        if len(comps) != len(names):
            raise GeometryError(
                f"vector field needs {len(names)} components, got {len(comps)}"
            )
        return cls(tuple(_as_expr(c, names) for c in comps))

    @classmethod
    def coordinate(cls, names: Sequence[str], axis: int) -> "VectorField":
        names = tuple(names)
        return cls.from_components(names, [1.0 if k == axis else 0.0 for k in range(len(names))])

    @classmethod
    def zero(cls, names: Sequence[str]) -> "VectorField":
        return cls.from_components(names, [0.0] * len(tuple(names)))


@dataclass(frozen=True)
class Tensor11Field:
    """Mixed-index components phi^k_i (row k = output, column i = input)."""

    components: tuple[tuple[ScalarExpr, ...], ...]

    @property
    def names(self) -> tuple[str, ...]:
        return self.components[0][0].vars

    @property
    def dim(self) -> int:
        return len(self.components)

    @classmethod
    def from_rows(
        cls, names: Sequence[str], rows: Sequence[Sequence[ScalarExpr | str | float]]
    ) -> "Tensor11Field":
        names = tuple(names)
        n = len(names)
        if len(rows) != n or any(len(r) != n for r in rows):
            raise GeometryError(f"(1,1) tensor needs a {n}x{n} component matrix")
        return cls(tuple(tuple(_as_expr(e, names) for e in row) for row in rows))

    @classmethod
    def identity(cls, names: Sequence[str]) -> "Tensor11Field":
        n = len(tuple(names))
        return cls.from_rows(names, [[float(i == j) for j in range(n)] for i in range(n)])

    @classmethod
    def zero(cls, names: Sequence[str]) -> "Tensor11Field":
        n = len(tuple(names))
        return cls.from_rows(names, [[0.0] * n for _ in range(n)])


# --- scalar-generic kernels (floats or first-order jets) --------------------


def _value_of(x) -> float:
    return x.value if isinstance(x, Jet) else float(x)


def _invert_generic(mat, make_const):
    """Gauss-Jordan inverse with partial pivoting over generic scalars."""
    n = len(mat)
    a = [list(row) for row in mat]
    inv = [[make_const(1.0 if i == j else 0.0) for j in range(n)] for i in range(n)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(_value_of(a[r][col])))
        if _value_of(a[pivot][col]) == 0.0:
            raise MetricError("singular matrix")
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            inv[col], inv[pivot] = inv[pivot], inv[col]
        scale = a[col][col]
        for j in range(n):
            a[col][j] = a[col][j] / scale
            inv[col][j] = inv[col][j] / scale
        for r in range(n):
            if r == col:
                continue
            factor = a[r][col]
            if _value_of(factor) == 0.0:
                continue
            for j in range(n):
                a[r][j] = a[r][j] - factor * a[col][j]
                inv[r][j] = inv[r][j] - factor * inv[col][j]
    return inv


def _cholesky_check(values: np.ndarray, p: np.ndarray):
    try:
        np.linalg.cholesky(values)
    except np.linalg.LinAlgError:
        raise MetricError(
            f"metric is not positive-definite at point {p.tolist()}"
        ) from None


def _metric_scalars(m: ChartMetric, p: np.ndarray, jets: bool):
    """Evaluate g, dg and g^-1 as floats (jets=False) or order-1 jets.

    dg[l][i][j] holds the partial derivative of g_ij along coordinate l.
    Mirrored entries reuse the same evaluation, so symmetry is exact.
    """
    n = m.dim
    order = 2 if jets else 1
    evaluated: list[list[Jet | None]] = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            evaluated[i][j] = evaluated[j][i] = eval_jet(m.g[i][j], p, order)
    values = np.array([[evaluated[i][j].value for j in range(n)] for i in range(n)])
    _cholesky_check(values, p)
    if jets:
        make_const = lambda v: Jet.constant(v, n, 1)
        g = [[Jet(evaluated[i][j].value, evaluated[i][j].grad.copy()) for j in range(n)] for i in range(n)]
        dg = [
            [[Jet(evaluated[i][j].grad[l], evaluated[i][j].hess[l].copy()) for j in range(n)] for i in range(n)]
            for l in range(n)
        ]
    else:
        make_const = float
        g = [[evaluated[i][j].value for j in range(n)] for i in range(n)]
        dg = [
            [[evaluated[i][j].grad[l] for j in range(n)] for i in range(n)]
            for l in range(n)
        ]
    ginv = _invert_generic(g, make_const)
    return g, dg, ginv, make_const


def _christoffel_scalars(dg, ginv, n):
    """G[k][i][j] = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij), generic."""
    gamma = [[[None] * n for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                acc = None
                for l in range(n):
                    term = ginv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j])
                    acc = term if acc is None else acc + term
                value = 0.5 * acc
                gamma[k][i][j] = value
                gamma[k][j][i] = value
    return gamma


class ConnectionCoefficients:
    """Rank-3 coefficient evaluator G^k_{ij} for a connection on a chart.

    ``builder(p, jets)`` must return the nested ``[k][i][j]`` scalar grid,
    over floats (jets=False) or first-order jets (jets=True).
    """

    def __init__(self, dim: int, builder: Callable[[np.ndarray, bool], list]):
        self.dim = dim
        self._builder = builder

    def at(self, p: Sequence[float]) -> np.ndarray:
        point = as_point(p, self.dim)
        grid = self._builder(point, False)
        return np.array(grid, dtype=float)

    def at_with_derivatives(self, p: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients and their first derivatives: dgamma[l,k,i,j] = d_l G^k_ij."""
        point = as_point(p, self.dim)
        grid = self._builder(point, True)
        n = self.dim
        gamma = np.empty((n, n, n))
        dgamma = np.empty((n, n, n, n))
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    jet = grid[k][i][j]
                    gamma[k, i, j] = jet.value
                    dgamma[:, k, i, j] = jet.grad
        return gamma, dgamma


def levi_civita(m: ChartMetric) -> ConnectionCoefficients:
    """The torsion-free metric connection of ``m``, via the Koszul formula."""

    def build(p: np.ndarray, jets: bool):
        _, dg, ginv, _ = _metric_scalars(m, p, jets)
        return _christoffel_scalars(dg, ginv, m.dim)

    return ConnectionCoefficients(m.dim, build)


# --- pointwise operations ----------------------------------------------------


def _check_field(m_names: tuple[str, ...], field: VectorField, label: str):
    if field.names != m_names or field.dim != len(m_names):
        raise GeometryError(
            f"{label} is defined over {field.names}, expected chart {m_names}"
        )


def metric_at(m: ChartMetric, p: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Metric and inverse-metric values; fails if not positive-definite."""
    point = as_point(p, m.dim)
    n = m.dim
    values = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            values[i, j] = values[j, i] = eval_jet(m.g[i][j], point, 0).value
    _cholesky_check(values, point)
    return values, np.linalg.inv(values)


def christoffel_at(m: ChartMetric, p: Sequence[float]) -> np.ndarray:
    return levi_civita(m).at(p)


def _field_values(field: VectorField, p: np.ndarray) -> np.ndarray:
    return np.array([eval_jet(c, p, 0).value for c in field.components])


def _field_jacobian(field: VectorField, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and jac[i, k] = d_i X^k."""
    jets = [eval_jet(c, p, 1) for c in field.components]
    values = np.array([j.value for j in jets])
    jac = np.stack([j.grad for j in jets], axis=1)
    return values, jac


def lie_bracket_at(X: VectorField, Y: VectorField, p: Sequence[float]) -> np.ndarray:
    """[X, Y]^k = X^i d_i Y^k - Y^i d_i X^k."""
    if X.names != Y.names:
        raise GeometryError("bracket arguments live on different charts")
    point = as_point(p, X.dim)
    x_vals, x_jac = _field_jacobian(X, point)
    y_vals, y_jac = _field_jacobian(Y, point)
    return x_vals @ y_jac - y_vals @ x_jac


def cov_deriv_at(
    coeffs: ConnectionCoefficients,
    X: VectorField,
    Y: VectorField,
    p: Sequence[float],
) -> np.ndarray:
    """(nabla_X Y)^k = X^i d_i Y^k + G^k_{ij} X^i Y^j."""
    if X.dim != coeffs.dim or Y.dim != coeffs.dim:
        raise GeometryError("field dimension does not match the connection's chart")
    point = as_point(p, coeffs.dim)
    x_vals = _field_values(X, point)
    y_vals, y_jac = _field_jacobian(Y, point)
    gamma = coeffs.at(point)
    return x_vals @ y_jac + np.einsum("kij,i,j->k", gamma, x_vals, y_vals)


def gradient_at(m: ChartMetric, h: ScalarExpr, p: Sequence[float]) -> np.ndarray:
    """(grad h)^i = g^{ij} d_j h."""
    if h.vars != m.names:
        raise GeometryError(f"scalar is over {h.vars}, expected chart {m.names}")
    point = as_point(p, m.dim)
    _, ginv = metric_at(m, point)
    return ginv @ eval_jet(h, point, 1).grad


def sym_skew_split_at(
    m: ChartMetric, phi: Tensor11Field, p: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    """Split phi into its metrically symmetric and skew parts at p.

    Phi_ij = g_kj phi^k_i; Phi1/Phi2 are its symmetric/skew parts, and the
    returned matrices are their raised forms (phi1)^k_i = g^{kj} (Phi1)_ij,
    likewise phi2, so phi1 + phi2 = phi.
    """
    point = as_point(p, m.dim)
    g, ginv = metric_at(m, point)
    phi_mat = np.array(
        [[eval_jet(phi.components[k][i], point, 0).value for i in range(m.dim)] for k in range(m.dim)]
    )
    big_phi = phi_mat.T @ g  # Phi[i][j]
    phi1_low = 0.5 * (big_phi + big_phi.T)
    phi2_low = 0.5 * (big_phi - big_phi.T)
    return ginv @ phi1_low.T, ginv @ phi2_low.T


def torsion_at(
    coeffs: ConnectionCoefficients,
    X: VectorField,
    Y: VectorField,
    p: Sequence[float],
) -> np.ndarray:
    """T(X, Y) = nabla_X Y - nabla_Y X - [X, Y]."""
    return (
        cov_deriv_at(coeffs, X, Y, p)
        - cov_deriv_at(coeffs, Y, X, p)
        - lie_bracket_at(X, Y, p)
    )


def scalar_product_expr(m: ChartMetric, Y: VectorField, Z: VectorField) -> ScalarExpr:
    """g(Y, Z) assembled as a single scalar expression over the chart."""
    _check_field(m.names, Y, "Y")
    _check_field(m.names, Z, "Z")
    acc: ScalarExpr | None = None
    for i in range(m.dim):
        for j in range(m.dim):
            term = m.g[i][j] * Y.components[i] * Z.components[j]
            acc = term if acc is None else acc + term
    return acc


def nonmetricity_at(
    coeffs: ConnectionCoefficients,
    m: ChartMetric,
    X: VectorField,
    Y: VectorField,
    Z: VectorField,
    p: Sequence[float],
) -> float:
    """(nabla_X g)(Y, Z) = X.g(Y,Z) - g(nabla_X Y, Z) - g(Y, nabla_X Z).

    The directional derivative X.g(Y,Z) differentiates the assembled scalar
    expression with jets rather than expanding product rules by hand.
    """
    point = as_point(p, m.dim)
    g, _ = metric_at(m, point)
    x_vals = _field_values(X, point)
    y_vals = _field_values(Y, point)
    z_vals = _field_values(Z, point)
    s = scalar_product_expr(m, Y, Z)
    x_dot = x_vals @ eval_jet(s, point, 1).grad
    nab_y = cov_deriv_at(coeffs, X, Y, point)
    nab_z = cov_deriv_at(coeffs, X, Z, point)
    return x_dot - nab_y @ g @ z_vals - y_vals @ g @ nab_z


def curvature_tensor_at(coeffs: ConnectionCoefficients, p: Sequence[float]) -> np.ndarray:
    """R[l,k,i,j] so that (R(X,Y)Z)^l = R[l,k,i,j] X^i Y^j Z^k."""
    gamma, dgamma = coeffs.at_with_derivatives(p)
    # R^l_{kij} = d_i G^l_{jk} - d_j G^l_{ik} + G^l_{im} G^m_{jk} - G^l_{jm} G^m_{ik}
    first = np.transpose(dgamma, (1, 3, 0, 2))  # [l,k,i,j] <- dgamma[i,l,j,k]
    second = np.transpose(dgamma, (1, 3, 2, 0))  # dgamma[j,l,i,k]
    third = np.einsum("lim,mjk->lkij", gamma, gamma)
    fourth = np.einsum("ljm,mik->lkij", gamma, gamma)
    return first - second + third - fourth


def curvature_at(
    coeffs: ConnectionCoefficients,
    X: VectorField,
    Y: VectorField,
    Z: VectorField,
    p: Sequence[float],
) -> np.ndarray:
    """R(X, Y)Z via the coordinate curvature tensor of the coefficients."""
    point = as_point(p, coeffs.dim)
    riemann = curvature_tensor_at(coeffs, point)
    x_vals = _field_values(X, point)
    y_vals = _field_values(Y, point)
    z_vals = _field_values(Z, point)
    return np.einsum("lkij,i,j,k->l", riemann, x_vals, y_vals, z_vals)
