"""Parser and jet-arithmetic tests, checked against finite differences."""

import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpgeo.expr import (
    DomainError,
    ExprError,
    Jet,
    ParseError,
    ScalarExpr,
    eval_jet,
    fd_derivative,
    parse,
)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


class TestParse:
    def test_power_evaluates(self):
        e = parse("r^2", ["r", "theta"])
        assert eval_jet(e, (3.0, 1.0), order=0).value == 9.0

    def test_known_identity(self):
        e = parse("sin(pi/2)", ["x"])
        assert eval_jet(e, (17.3,), order=0).value == pytest.approx(1.0, abs=1e-15)

    def test_trailing_operator_rejected(self):
        with pytest.raises(ParseError) as err:
            parse("x1 + ", ["x1"])
        assert "position" in str(err.value)

    def test_empty_input_rejected(self):
        with pytest.raises(ParseError, match="empty"):
            parse("   ", ["x"])

    def test_unknown_identifier(self):
        with pytest.raises(ParseError, match="unknown identifier 'q'"):
            parse("q + 1", ["x"])

    def test_unknown_function(self):
        with pytest.raises(ParseError, match="unknown function"):
            parse("foo(x)", ["x"])

    def test_reserved_names_rejected_as_vars(self):
        with pytest.raises(ExprError, match="reserved"):
            parse("pi", ["pi"])

    def test_duplicate_vars_rejected(self):
        with pytest.raises(ExprError, match="distinct"):
            parse("x", ["x", "x"])

    def test_unbalanced_paren(self):
        with pytest.raises(ParseError):
            parse("(x + 1", ["x"])

    def test_unicode_names(self):
        e = parse("r * sin(θ)", ["r", "θ"])
        assert eval_jet(e, (2.0, math.pi / 2), order=0).value == pytest.approx(2.0)

    @pytest.mark.parametrize(
        "source,expected",
        [
            ("2^3^2", 512.0),  # right-associative power
            ("2 - 3 - 4", -5.0),  # left-associative subtraction
            ("12 / 3 / 2", 2.0),  # left-associative division
            ("-2^2", -4.0),  # power binds tighter than unary minus
            ("2^-3", 0.125),
            ("1 + 2 * 3", 7.0),
            ("(1 + 2) * 3", 9.0),
            ("2 * 3 ^ 2", 18.0),
            ("--2", 2.0),
            ("1.5e2 + .25", 150.25),
        ],
    )
    def test_precedence(self, source, expected):
        e = parse(source, ["x"])
        assert eval_jet(e, (0.3,), order=0).value == pytest.approx(expected, rel=1e-15)

    def test_overflowing_constant_rejected(self):
        with pytest.raises(ParseError, match="overflow"):
            parse("1e999", ["x"])


# ---------------------------------------------------------------------------
# jet evaluation against analytic values
# ---------------------------------------------------------------------------


class TestEvalJet:
    def test_square_full_jet(self):
        e = parse("r^2", ["r", "theta"])
        jet = eval_jet(e, (3.0, 1.0), order=2)
        assert jet.value == 9.0
        npt.assert_allclose(jet.grad, [6.0, 0.0], atol=0)
        npt.assert_allclose(jet.hess, [[2.0, 0.0], [0.0, 0.0]], atol=0)

    def test_exponential_gradient(self):
        e = parse("exp(2*r)", ["r", "theta"])
        jet = eval_jet(e, (0.0, 0.0), order=1)
        assert jet.value == 1.0
        npt.assert_allclose(jet.grad, [2.0, 0.0], atol=0)
        assert jet.hess is None

    def test_product_gradient_matches_fd(self):
        # expected values frozen from the central-difference oracle
        e = parse("r*sin(θ)", ["r", "θ"])
        p = (2.0, math.pi / 6)
        jet = eval_jet(e, p, order=1)
        fd = [fd_derivative(e, p, axis, 1e-5) for axis in (0, 1)]
        assert jet.value == pytest.approx(1.0, abs=1e-15)
        npt.assert_allclose(jet.grad, fd, rtol=1e-6)
        npt.assert_allclose(jet.grad, [0.5, 2.0 * math.cos(math.pi / 6)], rtol=1e-14)

    def test_order_zero_matches_plain_arithmetic(self):
        e = parse("(x + 2) * x / 3 - x^3", ["x"])
        x = 1.7
        jet = eval_jet(e, (x,), order=0)
        assert jet.grad is None and jet.hess is None
        assert jet.value == pytest.approx((x + 2) * x / 3 - x**3, rel=1e-15)

    def test_division_by_zero_names_subexpression(self):
        e = parse("1 / (x - 1)", ["x"])
        with pytest.raises(DomainError) as err:
            eval_jet(e, (1.0,), order=1)
        assert "x - 1" in str(err.value)

    def test_log_domain_error(self):
        e = parse("log(x)", ["x"])
        with pytest.raises(DomainError, match="log"):
            eval_jet(e, (-2.0,), order=0)

    def test_sqrt_domain_error(self):
        e = parse("sqrt(x)", ["x"])
        with pytest.raises(DomainError, match="sqrt"):
            eval_jet(e, (-1.0,), order=0)

    def test_negative_base_integer_power_allowed(self):
        e = parse("x^3", ["x"])
        jet = eval_jet(e, (-2.0,), order=2)
        assert jet.value == -8.0
        npt.assert_allclose(jet.grad, [12.0])
        npt.assert_allclose(jet.hess, [[-12.0]])

    def test_negative_base_fractional_power_rejected(self):
        e = parse("x^0.5", ["x"])
        with pytest.raises(DomainError, match="positive base"):
            eval_jet(e, (-2.0,), order=0)

    def test_varying_exponent(self):
        e = parse("x^x", ["x"])
        jet = eval_jet(e, (2.0,), order=1)
        assert jet.value == pytest.approx(4.0)
        npt.assert_allclose(jet.grad, [4.0 * (math.log(2.0) + 1.0)], rtol=1e-12)

    def test_dimension_mismatch(self):
        e = parse("x", ["x"])
        with pytest.raises(ExprError, match="dimension"):
            eval_jet(e, (1.0, 2.0), order=0)


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------


class TestFdDerivative:
    def test_square(self):
        e = parse("r^2", ["r", "theta"])
        assert fd_derivative(e, (3.0, 0.0), 0, 1e-5) == pytest.approx(6.0, abs=1e-9)

    def test_sine_at_origin(self):
        e = parse("sin(θ)", ["x", "θ"])
        assert fd_derivative(e, (0.0, 0.0), 1, 1e-5) == pytest.approx(1.0, abs=1e-10)

    def test_step_must_be_positive(self):
        e = parse("x", ["x"])
        with pytest.raises(ExprError, match="step"):
            fd_derivative(e, (0.0,), 0, 0.0)

    def test_domain_error_propagates_from_shifted_point(self):
        e = parse("log(x)", ["x"])
        with pytest.raises(DomainError):
            fd_derivative(e, (1e-6,), 0, 1e-5)


# ---------------------------------------------------------------------------
# randomized cross-checks
# ---------------------------------------------------------------------------


def _random_expression(rng, names):
    """A random polynomial/trig mix, safe on the sampled box."""
    terms = []
    for _ in range(rng.integers(1, 4)):
        coeff = f"{rng.uniform(-2, 2):.6f}"
        var = names[rng.integers(0, len(names))]
        kind = rng.integers(0, 4)
        if kind == 0:
            terms.append(f"{coeff} * {var}^{rng.integers(1, 4)}")
        elif kind == 1:
            terms.append(f"{coeff} * sin({var})")
        elif kind == 2:
            terms.append(f"{coeff} * cos({var} * {f'{rng.uniform(0.5, 2):.6f}'})")
        else:
            other = names[rng.integers(0, len(names))]
            terms.append(f"{coeff} * {var} * {other}")
    return " + ".join(terms)


@pytest.mark.parametrize(
    "func,center",
    [
        ("sin", 0.7),
        ("cos", 0.7),
        ("tan", 0.6),
        ("exp", 0.3),
        ("log", 1.7),
        ("sqrt", 2.1),
        ("sinh", 0.5),
        ("cosh", 0.5),
        ("tanh", 0.5),
    ],
)
def test_every_function_node_matches_fd(func, center):
    # chain-rule composite so both axes carry nonzero derivatives
    e = parse(f"{func}(0.8*x + 0.3*y) * (1 + 0.1*y)", ("x", "y"))
    p = (center, 0.4)
    jet = eval_jet(e, p, order=2)
    step = 1e-5
    for axis in range(2):
        fd = fd_derivative(e, p, axis, step)
        assert abs(jet.grad[axis] - fd) <= 1e-6 * max(1.0, abs(jet.grad[axis]))
        # second order: central difference of the exact gradient
        hi, lo = list(p), list(p)
        hi[axis] += step
        lo[axis] -= step
        g_hi = eval_jet(e, hi, order=1).grad
        g_lo = eval_jet(e, lo, order=1).grad
        fd_hess = (g_hi - g_lo) / (2 * step)
        npt.assert_allclose(jet.hess[axis], fd_hess, rtol=1e-5, atol=1e-6)


def test_jet_gradient_matches_fd_on_random_expressions():
    rng = np.random.default_rng(20240817)
    names = ("x", "y", "z")
    for _ in range(100):
        e = parse(_random_expression(rng, names), names)
        p = rng.uniform(-1.5, 1.5, size=3)
        jet = eval_jet(e, p, order=1)
        for axis in range(3):
            fd = fd_derivative(e, p, axis, 1e-5)
            assert abs(jet.grad[axis] - fd) <= 1e-6 * max(1.0, abs(jet.grad[axis]))


def test_quadratic_hessian_is_constant_in_p():
    rng = np.random.default_rng(7)
    e = parse("2*x^2 - 3*x*y + 0.5*y^2 + 4*x - 1", ["x", "y"])
    expected = np.array([[4.0, -3.0], [-3.0, 1.0]])
    for _ in range(20):
        p = rng.uniform(-5, 5, size=2)
        jet = eval_jet(e, p, order=2)
        npt.assert_allclose(jet.hess, expected, atol=1e-12)
        npt.assert_allclose(jet.hess, jet.hess.T, atol=0)


def test_parse_print_round_trip_on_random_expressions():
    rng = np.random.default_rng(99)
    names = ("x", "y", "z")
    for _ in range(100):
        e = parse(_random_expression(rng, names), names)
        back = parse(str(e), names)
        p = rng.uniform(-1.5, 1.5, size=3)
        assert eval_jet(back, p, 0).value == pytest.approx(
            eval_jet(e, p, 0).value, rel=1e-15, abs=1e-15
        )


# hypothesis: structured expression trees survive a print/parse cycle exactly


@st.composite
def _expr_trees(draw, names=("x", "y")):
    def atom():
        return st.one_of(
            st.floats(min_value=0.0, max_value=9.0).map(
                lambda v: ScalarExpr.constant(names, v)
            ),
            st.integers(0, len(names) - 1).map(
                lambda i: ScalarExpr.coordinate(names, i)
            ),
        )

    def compose(children):
        return st.one_of(
            st.tuples(children, children).map(lambda ab: ab[0] + ab[1]),
            st.tuples(children, children).map(lambda ab: ab[0] - ab[1]),
            st.tuples(children, children).map(lambda ab: ab[0] * ab[1]),
            children.map(lambda a: -a),
        )

    return draw(st.recursive(atom(), compose, max_leaves=12))


@settings(max_examples=80, deadline=None)
@given(_expr_trees(), st.floats(-3, 3), st.floats(-3, 3))
def test_round_trip_is_evaluation_identical(tree, x, y):
    reparsed = parse(str(tree), tree.vars)
    a = eval_jet(tree, (x, y), order=2)
    b = eval_jet(reparsed, (x, y), order=2)
    assert a.value == b.value
    npt.assert_array_equal(a.grad, b.grad)
    npt.assert_array_equal(a.hess, b.hess)


def test_rebase_lifts_and_restricts():
    e = parse("r^2 + sin(r)", ["r"])
    lifted = e.rebase(("r", "theta"))
    assert eval_jet(lifted, (2.0, 9.9), 0).value == eval_jet(e, (2.0,), 0).value
    restricted = lifted.rebase(("r",))
    assert str(restricted) == str(e)
    with pytest.raises(ExprError, match="not available"):
        parse("r + theta", ["r", "theta"]).rebase(("r",))


def test_jet_constant_and_coordinate_shapes():
    c = Jet.constant(2.0, 3, 2)
    assert c.order == 2 and c.grad.shape == (3,) and c.hess.shape == (3, 3)
    x = Jet.coordinate(5.0, 1, 3, 1)
    npt.assert_array_equal(x.grad, [0.0, 1.0, 0.0])
    assert (x * x).value == 25.0
    npt.assert_array_equal((x * x).grad, [0.0, 10.0, 0.0])
