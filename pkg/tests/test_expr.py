"""Expression parsing, printing, evaluation and problem-file ingestion."""

import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ivpcover.errors import DomainError
from ivpcover.expr import (
    Add,
    Constant,
    Div,
    Mul,
    Neg,
    NonIntegerExponent,
    Param,
    PowInt,
    Sub,
    UnknownIdentifier,
    Var,
    eval_expr,
    expr_variables,
    format_expr,
    parse_expr,
    parse_problem_text,
)
from ivpcover.intervals import Box, Interval

X, Y = Var(0, "x"), Var(1, "y")


def _lift_fr(v: Fraction) -> Fraction:
    return v


# -- parsing -------------------------------------------------------------


def test_parse_volterra_structure():
    e = parse_expr("a*x*(1-y)", ["x", "y"], ["a", "b"])
    assert e == Mul(Mul(Param("a"), X), Sub(Constant(Fraction(1)), Y))


def test_parse_single_variable():
    assert parse_expr("x", ["x", "y"]) == X


def test_parse_unbalanced_paren_position():
    with pytest.raises(SyntaxError, match="position 7"):
        parse_expr("x^2 - (", ["x"])


def test_parse_precedence_pow_over_neg():
    # -x^2 is -(x^2), not (-x)^2
    assert parse_expr("-x^2", ["x"]) == Neg(PowInt(X, 2))


def test_parse_left_associative():
    e = parse_expr("x-y-x", ["x", "y"])
    assert e == Sub(Sub(X, Y), X)
    e = parse_expr("x/y/x", ["x", "y"])
    assert e == Div(Div(X, Y), X)


def test_parse_pow_chain_left_associative():
    assert parse_expr("x^2^3", ["x"]) == PowInt(PowInt(X, 2), 3)


def test_parse_decimal_and_scientific_literals_exact():
    assert parse_expr("0.1", ["x"]) == Constant(Fraction(1, 10))
    assert parse_expr("2.5e-3", ["x"]) == Constant(Fraction(1, 400))
    assert parse_expr(".5", ["x"]) == Constant(Fraction(1, 2))


def test_parse_unknown_identifier():
    with pytest.raises(UnknownIdentifier, match="z"):
        parse_expr("x+z", ["x", "y"], ["a"])


def test_parse_non_integer_exponent():
    with pytest.raises(NonIntegerExponent):
        parse_expr("x^y", ["x", "y"])
    with pytest.raises(NonIntegerExponent):
        parse_expr("x^2.5", ["x"])
    with pytest.raises(NonIntegerExponent):
        parse_expr("x^-1", ["x"])


def test_parse_empty_and_garbage():
    with pytest.raises(SyntaxError):
        parse_expr("   ", ["x"])
    with pytest.raises(SyntaxError):
        parse_expr("x ? y", ["x", "y"])
    with pytest.raises(SyntaxError):
        parse_expr("x y", ["x", "y"])


# -- evaluation ----------------------------------------------------------


def test_eval_volterra_at_point():
    # hand substitution: 2*1*(1-3) = -4 and -1*3*(1-1) = 0
    variables = ["x", "y"]
    f0 = parse_expr("a*x*(1-y)", variables, ["a", "b"])
    f1 = parse_expr("-b*y*(1-x)", variables, ["a", "b"])
    env = [Fraction(1), Fraction(3)]
    params = {"a": Fraction(2), "b": Fraction(1)}
    assert eval_expr(f0, env, params, _lift_fr) == -4
    assert eval_expr(f1, env, params, _lift_fr) == 0


def test_eval_identity_over_interval():
    iv = Interval(0, 1)
    assert eval_expr(X, [iv, Interval(5, 6)], {}, Interval.from_fraction) == iv


def test_eval_dependency_widening_allowed():
    e = parse_expr("x*x - x^2", ["x"])
    r = eval_expr(e, [Interval(-1, 1)], {}, Interval.from_fraction)
    assert r.contains(0.0)  # true range is {0}; wider is fine, truncation not


def test_eval_division_domain_error():
    e = parse_expr("1/x", ["x"])
    with pytest.raises(DomainError):
        eval_expr(e, [Interval(-1, 1)], {}, Interval.from_fraction)
    r = eval_expr(e, [Interval(2, 4)], {}, Interval.from_fraction)
    assert r.contains(0.25) and r.contains(0.5)


# -- random tree strategies ------------------------------------------------

_names = ["x", "y", "z"]
_pnames = ["a", "b"]

_leaf = st.one_of(
    st.integers(min_value=0, max_value=2).map(lambda i: Var(i, _names[i])),
    st.sampled_from([Param("a"), Param("b")]),
    st.tuples(
        st.integers(min_value=-50, max_value=50),
        st.integers(min_value=0, max_value=3),
    ).map(lambda t: Constant(Fraction(t[0], 10 ** t[1]))),
)


def _node(children):
    return st.one_of(
        st.tuples(children, children).map(lambda t: Add(*t)),
        st.tuples(children, children).map(lambda t: Sub(*t)),
        st.tuples(children, children).map(lambda t: Mul(*t)),
        children.map(Neg),
        st.tuples(children, st.integers(min_value=0, max_value=4)).map(
            lambda t: PowInt(*t)
        ),
    )


exprs = st.recursive(_leaf, _node, max_leaves=12)

_small = st.floats(min_value=-4.0, max_value=4.0, allow_nan=False)


@st.composite
def _box3(draw):
    ivs = []
    for _ in range(3):
        a, b = draw(_small), draw(_small)
        ivs.append(Interval(min(a, b), max(a, b)))
    return Box(ivs)


@given(exprs, _box3(), st.data())
@settings(max_examples=400)
def test_point_eval_inside_interval_eval(e, box, data):
    pt = [
        data.draw(st.floats(min_value=iv.lo, max_value=iv.hi, allow_nan=False))
        for iv in box
    ]
    params_f = {"a": Fraction(2), "b": Fraction(1, 3)}
    exact = eval_expr(e, [Fraction(p) for p in pt], params_f, _lift_fr)
    enclosure = eval_expr(
        e,
        list(box.ivs),
        {k: Interval.from_fraction(v) for k, v in params_f.items()},
        Interval.from_fraction,
    )
    assume(not math.isinf(enclosure.lo) and not math.isinf(enclosure.hi))
    assert Fraction(enclosure.lo) <= exact <= Fraction(enclosure.hi)


# Negative constants only arise as Neg(Constant) when parsed, so the
# structural fixpoint is stated over parser-producible trees.
_leaf_parseable = st.one_of(
    st.integers(min_value=0, max_value=2).map(lambda i: Var(i, _names[i])),
    st.sampled_from([Param("a"), Param("b")]),
    st.tuples(
        st.integers(min_value=0, max_value=50),
        st.integers(min_value=0, max_value=3),
    ).map(lambda t: Constant(Fraction(t[0], 10 ** t[1]))),
)

parseable_exprs = st.recursive(_leaf_parseable, _node, max_leaves=12)


@given(parseable_exprs)
@settings(max_examples=400)
def test_parse_print_parse_fixpoint(e):
    text = format_expr(e)
    again = parse_expr(text, _names, _pnames)
    assert again == e


def test_expr_variables():
    e = parse_expr("a*x*(1-y)", ["x", "y", "z"], ["a"])
    assert expr_variables(e) == {0, 1}


# -- problem files ---------------------------------------------------------

VOLTERRA_TEXT = """\
# classic two-species model
name volterra
dim 2
vars x y
param a 2
param b 1
rhs x a*x*(1-y)
rhs y -b*y*(1-x)
init_center 1.0 3.0
init_radius 0.1 0.1
"""


def test_parse_problem_roundtrip():
    system, init = parse_problem_text(VOLTERRA_TEXT)
    assert system.name == "volterra"
    assert system.dim == 2
    assert system.var_names == ("x", "y")
    assert system.params == {"a": Fraction(2), "b": Fraction(1)}
    assert len(init) == 2
    # outward-rounded exact bounds: 1 ± 1/10, 3 ± 1/10
    assert Fraction(init[0].lo) <= Fraction(9, 10) <= Fraction(1) <= Fraction(
        11, 10
    ) <= Fraction(init[0].hi)
    assert Fraction(init[1].lo) <= Fraction(29, 10)
    assert Fraction(init[1].hi) >= Fraction(31, 10)
    assert init[0].width() <= 0.2 + 1e-15


def test_problem_f_box_and_f_point():
    system, init = parse_problem_text(VOLTERRA_TEXT)
    v = system.f_point([1.0, 3.0])
    assert v == (-4.0, 0.0)
    fb = system.f_box(Box.point([1.0, 3.0]))
    assert fb[0].contains(-4.0) and fb[1].contains(0.0)


def test_problem_rational_param_outward():
    text = VOLTERRA_TEXT.replace("param a 2", "param a 8/3")
    system, _ = parse_problem_text(text)
    assert system.params["a"] == Fraction(8, 3)
    ivs = system.param_intervals()
    assert Fraction(ivs["a"].lo) <= Fraction(8, 3) <= Fraction(ivs["a"].hi)
    assert ivs["a"].lo < ivs["a"].hi  # 8/3 is not a binary float


@pytest.mark.parametrize(
    "mutate",
    [
        lambda t: t.replace("name volterra\n", ""),
        lambda t: t.replace("init_radius 0.1 0.1", "init_radius 0.1"),
        lambda t: t.replace("dim 2", "dim 3"),
        lambda t: t.replace("rhs y", "rhs z"),
        lambda t: t + "bogus_key 1\n",
        lambda t: t + "rhs x x\n",
        lambda t: t.replace("init_radius 0.1 0.1", "init_radius -0.1 0.1"),
    ],
)
def test_problem_file_errors(mutate):
    with pytest.raises(ValueError):
        parse_problem_text(mutate(VOLTERRA_TEXT))
