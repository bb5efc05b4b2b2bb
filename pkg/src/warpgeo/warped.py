"""Warped products of two charts, materialized as one block-metric chart.

The product of a base chart (dim m) and a fiber chart (dim p) with warping
function F > 0 on the base is a single chart of dimension m + p whose metric
is diag(g1, F^2 g2): base coordinates occupy slots 0..m-1, fiber coordinates
slots m..m+p-1, and the mixed blocks are identically zero by construction, so
the horizontal/vertical projections are exact component masks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .expr import ScalarExpr, as_point, eval_jet, parse
from .geometry import (
    ChartMetric,
    GeometryError,
    VectorField,
    cov_deriv_at,
    gradient_at,
    levi_civita,
    metric_at,
)

__all__ = [
    "WarpedProductError",
    "PositivityError",
    "WarpedProduct",
    "build_warped",
    "lift_field",
    "lift_scalar",
    "split_at",
    "grad_lift_residual",
    "oneill_residuals_at",
]

Side = Literal["base", "fiber"]


class WarpedProductError(GeometryError):
    """Invalid warped-product construction or use."""


class PositivityError(WarpedProductError):
    """The warping function is not positive at a validation point."""


@dataclass(frozen=True)
class WarpedProduct:
    base: ChartMetric
    fiber: ChartMetric
    warp: ScalarExpr  # over base coordinates only
    chart: ChartMetric  # assembled block metric diag(g1, F^2 g2)
    warp_lifted: ScalarExpr  # warp re-expressed over the assembled chart

    @property
    def base_dim(self) -> int:
        return self.base.dim

    @property
    def fiber_dim(self) -> int:
        return self.fiber.dim

    @property
    def dim(self) -> int:
        return self.base.dim + self.fiber.dim

    @property
    def base_slice(self) -> slice:
        return slice(0, self.base_dim)

    @property
    def fiber_slice(self) -> slice:
        return slice(self.base_dim, self.dim)

    def base_point(self, p: Sequence[float]) -> np.ndarray:
        return as_point(p, self.dim)[self.base_slice]

    def fiber_point(self, p: Sequence[float]) -> np.ndarray:
        return as_point(p, self.dim)[self.fiber_slice]

    def embed_base(self, vec: Sequence[float]) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.base_slice] = np.asarray(vec, dtype=float)
        return out

    def embed_fiber(self, vec: Sequence[float]) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.fiber_slice] = np.asarray(vec, dtype=float)
        return out

    def warp_value(self, p: Sequence[float]) -> float:
        return eval_jet(self.warp, self.base_point(p), 0).value

    def validate_point(self, p: Sequence[float]) -> np.ndarray:
        """Check F > 0 and positive-definiteness of the assembled metric at p."""
        point = as_point(p, self.dim)
        f = self.warp_value(point)
        if f <= 0.0:
            raise PositivityError(
                f"warping function {self.warp} = {f} is not positive at point "
                f"{point.tolist()}"
            )
        metric_at(self.chart, point)  # raises MetricError when not SPD
        return point


def build_warped(
    base: ChartMetric, fiber: ChartMetric, warp: ScalarExpr | str
) -> WarpedProduct:
    """Assemble base x_F fiber as one chart with block metric diag(g1, F^2 g2)."""
    if isinstance(warp, str):
        warp = parse(warp, base.names)
    if warp.vars != base.names:
        try:
            warp = warp.rebase(base.names)
        except Exception as err:
            raise WarpedProductError(
                f"warping function must reference only base coordinates {base.names}: {err}"
            ) from None
    collisions = set(base.names) & set(fiber.names)
    if collisions:
        raise WarpedProductError(
            f"base and fiber share coordinate names {sorted(collisions)}"
        )
    names = base.names + fiber.names
    m, k = base.dim, fiber.dim
    zero = ScalarExpr.constant(names, 0.0)
    warp_lifted = warp.rebase(names)
    warp_sq = warp_lifted * warp_lifted
    rows: list[list[ScalarExpr]] = [[zero] * (m + k) for _ in range(m + k)]
    for i in range(m):
        for j in range(i, m):
            entry = base.g[i][j].rebase(names)
            rows[i][j] = rows[j][i] = entry
    for i in range(k):
        for j in range(i, k):
            entry = warp_sq * fiber.g[i][j].rebase(names)
            rows[m + i][m + j] = rows[m + j][m + i] = entry
    chart = ChartMetric.from_rows(names, rows)
    return WarpedProduct(base, fiber, warp, chart, warp_lifted)


def lift_scalar(wp: WarpedProduct, side: Side, h: ScalarExpr) -> ScalarExpr:
    """Extend a factor function to the product (constant on the other factor)."""
    factor = wp.base if side == "base" else wp.fiber
    if h.vars != factor.names:
        raise WarpedProductError(
            f"scalar is over {h.vars}, expected the {side} chart {factor.names}"
        )
    return h.rebase(wp.chart.names)


def lift_field(wp: WarpedProduct, side: Side, field: VectorField) -> VectorField:
    """Extend a factor vector field by zero components on the other factor."""
    if side not in ("base", "fiber"):
        raise WarpedProductError(f"side must be 'base' or 'fiber', got {side!r}")
    factor = wp.base if side == "base" else wp.fiber
    if field.names != factor.names or field.dim != factor.dim:
        raise WarpedProductError(
            f"field is over {field.names}, expected the {side} chart {factor.names}"
        )
    names = wp.chart.names
    zero = ScalarExpr.constant(names, 0.0)
    lifted = [zero] * wp.dim
    offset = 0 if side == "base" else wp.base_dim
    for k, comp in enumerate(field.components):
        lifted[offset + k] = comp.rebase(names)
    return VectorField(tuple(lifted))


def split_at(wp: WarpedProduct, vec: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Split a tangent vector into (nor, tan): horizontal and vertical parts."""
    v = np.asarray(vec, dtype=float).reshape(-1)
    if v.shape[0] != wp.dim:
        raise WarpedProductError(f"vector has length {v.shape[0]}, chart dim is {wp.dim}")
    nor = v.copy()
    tan = v.copy()
    nor[wp.fiber_slice] = 0.0
    tan[wp.base_slice] = 0.0
    return nor, tan


def grad_lift_residual(wp: WarpedProduct, h: ScalarExpr, p: Sequence[float]) -> float:
    """Max-norm gap between grad(h on product) and the lift of grad(h on base)."""
    point = as_point(p, wp.dim)
    lifted = lift_scalar(wp, "base", h)
    full = gradient_at(wp.chart, lifted, point)
    on_base = gradient_at(wp.base, h, wp.base_point(point))
    return float(np.max(np.abs(full - wp.embed_base(on_base))))


def oneill_residuals_at(
    wp: WarpedProduct,
    X: VectorField,
    Y: VectorField,
    V: VectorField,
    W: VectorField,
    p: Sequence[float],
) -> tuple[float, float, float, float]:
    """Residuals of the four warped-product Levi-Civita decomposition rules.

    1. nabla_X Y equals the lift of the base covariant derivative.
    2. nabla_X V equals (X.F / F) V.
    3. nor nabla_V W equals -(g(V,W)/F) grad F.
    4. tan nabla_V W equals the lift of the fiber covariant derivative.
    """
    point = wp.validate_point(p)
    bp, fp = wp.base_point(point), wp.fiber_point(point)
    lc = levi_civita(wp.chart)
    xl = lift_field(wp, "base", X)
    yl = lift_field(wp, "base", Y)
    vl = lift_field(wp, "fiber", V)
    wl = lift_field(wp, "fiber", W)

    r1 = np.max(
        np.abs(
            cov_deriv_at(lc, xl, yl, point)
            - wp.embed_base(cov_deriv_at(levi_civita(wp.base), X, Y, bp))
        )
    )

    f_jet = eval_jet(wp.warp, bp, 1)
    x_vals = np.array([eval_jet(c, bp, 0).value for c in X.components])
    v_vals = np.array([eval_jet(c, point, 0).value for c in vl.components])
    xf_over_f = (x_vals @ f_jet.grad) / f_jet.value
    r2 = np.max(np.abs(cov_deriv_at(lc, xl, vl, point) - xf_over_f * v_vals))

    g, _ = metric_at(wp.chart, point)
    w_vals = np.array([eval_jet(c, point, 0).value for c in wl.components])
    gvw = v_vals @ g @ w_vals
    grad_f = gradient_at(wp.chart, wp.warp_lifted, point)
    nab_vw = cov_deriv_at(lc, vl, wl, point)
    nor, tan = split_at(wp, nab_vw)
    r3 = np.max(np.abs(nor + (gvw / f_jet.value) * grad_f))

    r4 = np.max(
        np.abs(
            tan - wp.embed_fiber(cov_deriv_at(levi_civita(wp.fiber), V, W, fp))
        )
    )
    return float(r1), float(r2), float(r3), float(r4)
