"""Shared chart fixtures and random-field helpers."""

import numpy as np
import pytest

from warpgeo.expr import ScalarExpr
from warpgeo.geometry import ChartMetric, VectorField


@pytest.fixture
def polar_chart() -> ChartMetric:
    """Flat plane in polar coordinates: diag(1, r^2)."""
    return ChartMetric.from_rows(("r", "theta"), [["1", "0"], ["0", "r^2"]])


@pytest.fixture
def hyperbolic_chart() -> ChartMetric:
    """Hyperbolic plane: diag(1, exp(2r))."""
    return ChartMetric.from_rows(("r", "theta"), [["1", "0"], ["0", "exp(2*r)"]])


@pytest.fixture
def identity_chart() -> ChartMetric:
    return ChartMetric.from_rows(("x", "y"), [["1", "0"], ["0", "1"]])


def random_polynomial(names, rng, degree=2) -> ScalarExpr:
    """c0 + sum c_i x_i + sum c_ij x_i x_j with coefficients in (-1, 1)."""
    n = len(names)
    acc = ScalarExpr.constant(names, rng.uniform(-1, 1))
    for i in range(n):
        xi = ScalarExpr.coordinate(names, i)
        acc = acc + ScalarExpr.constant(names, rng.uniform(-1, 1)) * xi
        if degree >= 2:
            for j in range(i, n):
                xj = ScalarExpr.coordinate(names, j)
                acc = acc + ScalarExpr.constant(names, rng.uniform(-1, 1)) * xi * xj
    return acc


def random_field(names, rng, degree=2) -> VectorField:
    return VectorField(
        tuple(random_polynomial(names, rng, degree) for _ in range(len(names)))
    )


def sample_box(rng, lo_hi_pairs, n):
    lows = np.array([lo for lo, _ in lo_hi_pairs])
    highs = np.array([hi for _, hi in lo_hi_pairs])
    return [rng.uniform(lows, highs) for _ in range(n)]
