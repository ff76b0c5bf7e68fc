import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vhstab.dsl import (
    ArityError,
    Binary,
    Const,
    DomainError,
    ExprSyntaxError,
    MissingBinding,
    UnknownVariable,
    Var,
    evaluate,
    parse,
    print_canonical,
)

from conftest import random_expression


def ev(text, **b):
    return evaluate(parse(text), b)


def test_product_of_three_variables():
    e = parse("x*y*z", {"x", "y", "z"})
    assert e.ast == Binary("*", Binary("*", Var("x"), Var("y")), Var("z"))
    assert e.variables == {"x", "y", "z"}


def test_kernel_style_expression_parses():
    e = parse("exp(-(r+s+t))*v", {"r", "s", "t", "v"})
    assert e.variables == {"r", "s", "t", "v"}


def test_unknown_variable_is_rejected():
    with pytest.raises(UnknownVariable) as info:
        parse("x*q", {"x", "y", "z"})
    assert info.value.name == "q"
    assert info.value.position == 2


@pytest.mark.parametrize(
    "text, expected",
    [
        ("x*y*z", 6.0),
        ("min(x, y)", 1.0),
        ("2+3*4", 14.0),
        ("(2+3)*4", 20.0),
        ("-2^2", -4.0),
        ("2^-1", 0.5),
        ("2**3**2", 512.0),
        ("1.5e1 - 5E-1", 14.5),
        ("max(x, -y)", 1.0),
        ("--x", 1.0),
        ("10/4/5", 0.5),
        ("8-3-2", 3.0),
    ],
)
def test_arithmetic(text, expected):
    assert ev(text, x=1.0, y=2.0, z=3.0) == expected


def test_eval_examples():
    assert evaluate(parse("exp(-(r+s+t))*v"), {"r": 0, "s": 0, "t": 0, "v": 5}) == 5.0
    assert evaluate(parse("min(x, y)"), {"x": 0.2, "y": 0.7}) == 0.2


@pytest.mark.parametrize(
    "text, exc",
    [
        ("", ExprSyntaxError),
        ("1 +", ExprSyntaxError),
        ("(1 + 2", ExprSyntaxError),
        ("1 2", ExprSyntaxError),
        ("x $ y", ExprSyntaxError),
        ("foo(x)", ExprSyntaxError),
        ("exp(x, y)", ArityError),
        ("min(x)", ArityError),
        ("pow(x)", ArityError),
    ],
)
def test_parse_errors(text, exc):
    with pytest.raises(exc):
        parse(text)


def test_syntax_error_position():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x + * y")
    assert info.value.position == 4


@pytest.mark.parametrize("text", ["sqrt(x - 2)", "1/(x - 1)", "(x - 3)^0.5", "0^(-1)", "exp(1000*x)"])
def test_domain_errors(text):
    with pytest.raises(DomainError):
        ev(text, x=1.0)


def test_domain_error_reports_array_index():
    x = np.array([4.0, 1.0, -1.0])
    with pytest.raises(DomainError) as info:
        evaluate(parse("sqrt(x)"), {"x": x})
    assert info.value.index == (2,)


def test_missing_binding():
    with pytest.raises(MissingBinding):
        ev("x + y", x=1.0)


def test_negative_base_with_integer_exponent_is_fine():
    assert ev("x^3", x=-2.0) == -8.0


def test_array_evaluation_matches_scalar():
    e = parse("sin(x)*exp(-y) + max(x, y)^2")
    xs = np.linspace(0, 1, 7)
    ys = np.linspace(-1, 2, 7)
    arr = evaluate(e, {"x": xs, "y": ys})
    for a, b, val in zip(xs, ys, arr):
        assert evaluate(e, {"x": float(a), "y": float(b)}) == val


@pytest.mark.parametrize(
    "text, canonical",
    [("1.5", "1.5"), ("x+y*z", "(x + (y * z))"), ("-x", "(-x)"), ("min(x,2)", "min(x, 2.0)")],
)
def test_print_canonical(text, canonical):
    assert print_canonical(parse(text)) == canonical


def test_negative_constant_prints_parenthesised():
    assert print_canonical(Const(-2.5)) == "(-2.5)"


def _eval_or_error(e, b):
    try:
        return evaluate(e, b)
    except DomainError:
        return "domain"


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_round_trip_random_ast(seed):
    rng = np.random.default_rng(seed)
    e = random_expression(rng)
    again = parse(print_canonical(e), {"x", "y", "z"})
    for _ in range(5):
        b = {k: float(rng.normal() * 2) for k in "xyz"}
        first = _eval_or_error(e, b)
        second = _eval_or_error(again, b)
        if isinstance(first, float) and math.isnan(first):
            assert math.isnan(second)
        else:
            assert first == second


def test_evaluation_is_pure_and_thread_safe():
    e = parse("sin(x)*cos(y) + sqrt(abs(x*y)) / (1 + x^2)")
    b = {"x": 0.37, "y": -1.2}
    expected = evaluate(e, b)
    results = []

    def work():
        results.extend(evaluate(e, b) for _ in range(200))

    threads = [threading.Thread(target=work) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert set(results) == {expected}
