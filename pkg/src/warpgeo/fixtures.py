"""Canonical warped-product fixtures with their sampling boxes.

Three 2D fixtures with analytically known behavior (flat polar plane,
hyperbolic plane, round sphere) plus a 3D fixture with a two-dimensional flat
fiber, which is the smallest setting where a block-preserving (1,1) tensor
can have a nonzero skew part on the fiber block.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import ChartMetric
from .warped import WarpedProduct, build_warped

__all__ = ["Fixture", "polar", "hyperbolic", "sphere", "torus3", "FIXTURES"]

Box = tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class Fixture:
    name: str
    wp: WarpedProduct
    box: Box  # per assembled coordinate


def _line(name: str) -> ChartMetric:
    return ChartMetric.from_rows((name,), [["1"]])


def polar() -> Fixture:
    """Flat plane as a warped product: diag(1, r^2)."""
    wp = build_warped(_line("r"), _line("theta"), "r")
    return Fixture("polar", wp, ((0.5, 3.0), (0.1, 6.0)))


def hyperbolic() -> Fixture:
    """Hyperbolic plane: diag(1, exp(2r)), sectional curvature -1."""
    wp = build_warped(_line("r"), _line("theta"), "exp(r)")
    return Fixture("hyperbolic", wp, ((-1.0, 1.0), (0.1, 6.0)))


def sphere() -> Fixture:
    """Round sphere slice: diag(1, sin(r)^2) away from the poles, curvature +1."""
    wp = build_warped(_line("r"), _line("theta"), "sin(r)")
    return Fixture("sphere", wp, ((0.4, 2.7), (0.1, 6.0)))


def torus3() -> Fixture:
    """1D base warped over a flat 2D fiber: diag(1, e^{2r}, e^{2r})."""
    fiber = ChartMetric.from_rows(("s", "t"), [["1", "0"], ["0", "1"]])
    wp = build_warped(_line("r"), fiber, "exp(r)")
    return Fixture("torus3", wp, ((-0.8, 0.8), (-2.0, 2.0), (-2.0, 2.0)))


FIXTURES = {
    "polar": polar,
    "hyperbolic": hyperbolic,
    "sphere": sphere,
    "torus3": torus3,
}
