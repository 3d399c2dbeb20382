import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchvi.exprlang import (Binary, Call, ExprDomainError, ExprNameError, ExprSyntaxError, Num,
                               UnboundVariableError, Unary, Var, evaluate, free_vars, parse, pretty)


def test_precedence_example():
    e = parse("x1^2 + 2*t")
    assert e.root == Binary("add", Binary("pow", Var("x1"), Num(2.0)), Binary("mul", Num(2.0), Var("t")))


def test_call_example():
    e = parse("pos(y_1_1 - y_2_1 + 0.5)")
    inner = Binary("add", Binary("sub", Var("y_1_1"), Var("y_2_1")), Num(0.5))
    assert e.root == Call("pos", (inner,))


def test_unknown_function():
    with pytest.raises(ExprNameError, match="foo"):
        parse("foo(x1)")


@pytest.mark.parametrize("src", ["x1 +", "(x1", "x1 $ 2", "2 3", "max(x1)", ""])
def test_syntax_errors_carry_position(src):
    with pytest.raises(ExprSyntaxError) as info:
        parse(src)
    assert 0 <= info.value.position <= len(src)


@pytest.mark.parametrize("name", ["x0", "y_1", "w", "z", "xx1"])
def test_bad_variable_names(name):
    with pytest.raises(ExprNameError):
        parse(name)


def test_left_associativity_and_unary_minus():
    assert evaluate(parse("8 - 3 - 2"), {}) == 3.0
    assert evaluate(parse("2^3^2"), {}) == 64.0
    assert evaluate(parse("-x1^2"), {"x1": 3.0}) == 9.0
    assert evaluate(parse("16 / 4 / 2"), {}) == 2.0


def test_eval_examples():
    assert evaluate(parse("pos(-3)"), {}) == 0.0
    assert evaluate(parse("x1^2+2*t"), {"x1": 3.0, "t": 1.0}) == 11.0
    with pytest.raises(ExprDomainError):
        evaluate(parse("log(x1)"), {"x1": 0.0})


def test_domain_errors_are_reported():
    for src, env in [("sqrt(x1)", {"x1": -1.0}), ("1/x1", {"x1": 0.0}), ("pow(x1, 0.5)", {"x1": -2.0})]:
        with pytest.raises(ExprDomainError):
            evaluate(parse(src), env)


def test_unbound_variable():
    with pytest.raises(UnboundVariableError):
        evaluate(parse("x1 + t"), {"x1": 1.0})


def test_free_vars_examples():
    assert free_vars(parse("x1+t")) == {"x1", "t"}
    assert free_vars(parse("3.0")) == frozenset()
    assert free_vars(parse("y_1_2 * z1")) == {"y_1_2", "z1"}


def test_functions_and_vectorization():
    x = np.array([-2.0, 0.5, 3.0])
    e = parse("max(abs(x1), 1) + min(x1, 0, 1) + neg(x1) + exp(0) + cos(0) + sin(0) + sqrt(4)")
    got = evaluate(e, {"x1": x})
    want = np.maximum(np.abs(x), 1) + np.minimum(x, 0) + np.maximum(-x, 0) + 1 + 1 + 0 + 2
    np.testing.assert_allclose(got, want)


def test_expressions_are_hashable_and_callable():
    e = parse("x1 + 1")
    assert e(x1=2.0) == 3.0
    assert hash(e) == hash(parse("x1 + 1"))


# -- properties ---------------------------------------------------------------

_leaf = st.one_of(
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False).map(Num),
    st.sampled_from(["t", "x1", "x2", "z1", "y_1_2"]).map(Var),
)


def _extend(children):
    return st.one_of(
        st.builds(Unary, st.just("neg"), children),
        st.builds(Binary, st.sampled_from(["add", "sub", "mul", "div", "pow"]), children, children),
        st.builds(lambda a: Call("pos", (a,)), children),
        st.builds(lambda a, b, c: Call("max", (a, b, c)), children, children, children),
        st.builds(lambda a, b: Call("pow", (a, b)), children, children),
    )


asts = st.recursive(_leaf, _extend, max_leaves=12)


@given(asts)
def test_pretty_round_trip(node):
    text = pretty(node)
    again = parse(text)
    assert again.root == node
    assert pretty(again) == text


@given(st.floats(min_value=-1e12, max_value=1e12, allow_nan=False))
def test_pos_minus_neg(a):
    p = evaluate(parse("pos(x1)"), {"x1": a})
    n = evaluate(parse("neg(x1)"), {"x1": a})
    assert p >= 0 and n >= 0
    assert p - n == a


@settings(max_examples=50)
@given(asts, st.floats(-3, 3), st.floats(-3, 3))
def test_evaluation_is_pure(node, x, t):
    env = {"t": t, "x1": x, "x2": 0.5, "z1": 1.5, "y_1_2": -0.25}
    e = parse(pretty(node))
    try:
        first = evaluate(e, dict(env))
    except (ExprDomainError, OverflowError, ZeroDivisionError):
        return
    second = evaluate(e, dict(env))
    assert (math.isnan(first) and math.isnan(second)) or first == second
