import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kktflow.expr import (
    Add,
    Const,
    DomainError,
    Mul,
    Neg,
    ParseError,
    Pow,
    Sub,
    Var,
    eval_grad,
    parse,
    to_text,
)


def central_diff(e, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for k in range(len(x)):
        d = np.zeros_like(x)
        d[k] = step
        out[k] = (e(x + d) - e(x - d)) / (2 * step)
    return out


# --- parsing -------------------------------------------------------------------


def test_parse_sum():
    assert parse("x1 + x2", 2).root == Add(Var(0), Var(1))


def test_parse_polynomial():
    assert parse("x1^2 - 2*x1", 1).root == Sub(Pow(Var(0), Const(2.0)), Mul(Const(2.0), Var(0)))


def test_unbalanced_parenthesis_offset():
    with pytest.raises(ParseError) as err:
        parse("sin(x3", 3)
    assert err.value.offset == 6


@pytest.mark.parametrize(
    "text, n, message",
    [
        ("x4", 3, "out of range"),
        ("y1 + 1", 1, "unknown"),
        ("foo(x1)", 1, "unknown"),
        ("x1 +", 1, ""),
        ("1e999", 1, ""),
        ("x1 x2", 2, ""),
    ],
)
def test_parse_errors(text, n, message):
    with pytest.raises(ParseError) as err:
        parse(text, n)
    assert message in str(err.value)


def test_offsets_are_bytes():
    with pytest.raises(ParseError) as err:
        parse("x1 + # ", 1)
    assert err.value.offset == 5


def test_precedence():
    assert parse("-x1^2", 1).root == Neg(Pow(Var(0), Const(2.0)))
    assert parse("2^-x1", 1).root == Pow(Const(2.0), Neg(Var(0)))
    assert parse("x1^2^3", 1).root == Pow(Var(0), Pow(Const(2.0), Const(3.0)))
    assert parse("x1 - x2 - x3", 3).root == Sub(Sub(Var(0), Var(1)), Var(2))
    assert parse("x1 / x2 * x3", 3)([6.0, 2.0, 3.0]) == 9.0


def test_negative_square_value():
    assert parse("-x1^2", 1)([3.0]) == -9.0


# --- evaluation ------------------------------------------------------------------


def test_product_rule():
    v, g = eval_grad(parse("x1*x2", 2), [3.0, 4.0])
    assert v == 12.0
    np.testing.assert_array_equal(g, [4.0, 3.0])


def test_quadratic_minimum():
    v, g = eval_grad(parse("x1^2 + x2^2", 2), [0.0, 0.0])
    assert v == 0.0
    np.testing.assert_array_equal(g, [0.0, 0.0])


def test_exp_sin_against_finite_differences():
    e = parse("exp(x1)*sin(x2)", 2)
    x = [0.0, math.pi / 2]
    v, g = eval_grad(e, x)
    assert v == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(g, central_diff(e, x), atol=1e-9)
    np.testing.assert_allclose(g, [1.0, 0.0], atol=1e-15)


@pytest.mark.parametrize(
    "text, x",
    [
        ("log(x1)", [0.0]),
        ("log(x1)", [-1.0]),
        ("sqrt(x1)", [-1.0]),
        ("1 / x1", [0.0]),
        ("x1^(-1)", [0.0]),
        ("x1^0.5", [-2.0]),
        ("exp(x1)", [1e6]),
    ],
)
def test_domain_errors_name_node(text, x):
    with pytest.raises(DomainError) as err:
        eval_grad(parse(text, 1), x)
    assert "x1" in str(err.value)


def test_sqrt_at_zero_reports_node():
    with pytest.raises(DomainError):
        eval_grad(parse("sqrt(x1)", 1), [0.0])


def test_compiled_matches_tree_walk():
    e = parse("sin(x1*x2) + x3^3/(1 + x1^2) - log(2 + cos(x2)) * sqrt(1 + x3^2)", 3)
    x = np.array([0.3, -1.2, 0.7])
    v, g = e.eval_grad(x)
    d = e.eval_dual(x)
    assert v == pytest.approx(d.value, rel=1e-15)
    np.testing.assert_allclose(g, d.partials, rtol=1e-14)


def test_abs_is_nonsmooth():
    assert not parse("abs(x1)", 1).is_smooth
    assert parse("sin(x1)", 1).is_smooth


def test_wrong_dimension():
    with pytest.raises(ValueError):
        parse("x1", 2).eval_grad([1.0])


# --- properties -------------------------------------------------------------------

N_VARS = 3
leaves = st.one_of(
    st.integers(1, N_VARS).map(lambda k: f"x{k}"),
    st.floats(0.1, 3.0).map(lambda c: repr(round(c, 3))),
)


def _extend(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*"), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        st.tuples(children, children).map(lambda t: f"({t[0]}) / (1.5 + ({t[1]})^2)"),
        children.map(lambda c: f"({c})^2"),
        children.map(lambda c: f"-{c}"),
        children.map(lambda c: f"sin({c})"),
        children.map(lambda c: f"cos({c})"),
        children.map(lambda c: f"exp(0.1*sin({c}))"),
        children.map(lambda c: f"log(1 + ({c})^2)"),
        children.map(lambda c: f"sqrt(1 + ({c})^2)"),
    )


expressions = st.recursive(leaves, _extend, max_leaves=8)
points = st.lists(st.floats(-1.5, 1.5), min_size=N_VARS, max_size=N_VARS)


@settings(max_examples=100, deadline=None)
@given(expressions, points)
def test_gradient_matches_central_differences(text, x):
    e = parse(text, N_VARS)
    _, g = e.eval_grad(x)
    fd = central_diff(e, x)
    scale = 1.0 + abs(e(x))
    for k in range(N_VARS):
        assert abs(g[k] - fd[k]) <= 1e-6 * max(abs(g[k]), 1.0) * scale


@settings(max_examples=200, deadline=None)
@given(expressions)
def test_print_then_parse_is_identity(text):
    e = parse(text, N_VARS)
    assert parse(to_text(e.root), N_VARS).root == e.root


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_printed_constants_keep_their_value(c):
    # parsing never yields negative constants, but printed ones must evaluate the same
    node = Pow(Mul(Const(c), Var(0)), Const(2.0))
    assert parse(to_text(node), 1)([1.5]) == (c * 1.5) ** 2


@pytest.mark.parametrize(
    "text, affine",
    [
        ("x1 + 2*x2 - 3", True),
        ("-(x1 - x2)/4", True),
        ("2^3*x1 + sin(1)", True),
        ("x1*x2", False),
        ("x1^2", False),
        ("1/x1", False),
        ("exp(x1)", False),
    ],
)
def test_affinity(text, affine):
    assert parse(text, 2).is_affine is affine
