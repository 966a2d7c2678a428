"""Interval, box and ball operations against exact rational oracles."""

import math
from fractions import Fraction

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from ivpcover import DomainError
from ivpcover.intervals import (
    Ball,
    Box,
    Interval,
    ball_to_box,
    box_to_ball,
    iv_div,
    iv_mul,
    iv_pow,
    norm2_up,
    split_box,
)

coord = st.floats(min_value=-1e100, max_value=1e100, allow_nan=False)


@st.composite
def intervals(draw, elements=coord):
    a = draw(elements)
    b = draw(elements)
    return Interval(min(a, b), max(a, b))


@st.composite
def boxes(draw, dim=None):
    n = dim if dim is not None else draw(st.integers(min_value=1, max_value=4))
    return Box([draw(intervals(coord)) for _ in range(n)])


def _corners(iv: Interval):
    return (Fraction(iv.lo), Fraction(iv.hi))


# -- exact small cases ----------------------------------------------------


def test_add_exact_integers():
    assert Interval(1, 2) + Interval(3, 4) == Interval(4, 6)


def test_sub_exact_integers():
    assert Interval(1, 2) - Interval(3, 4) == Interval(-3, -1)


def test_mul_exact_integers():
    assert iv_mul(Interval(-1, 2), Interval(3, 4)) == Interval(-4, 8)


def test_div_exact_powers_of_two():
    assert iv_div(Interval(1, 2), Interval(4, 8)) == Interval(0.125, 0.5)


def test_div_by_zero_straddling_raises():
    with pytest.raises(DomainError):
        iv_div(Interval(1, 2), Interval(-1, 1))


def test_pow_even_straddling():
    assert iv_pow(Interval(-1, 2), 2) == Interval(0, 4)


def test_pow_odd_preserves_sign():
    assert iv_pow(Interval(-2, 3), 3) == Interval(-8, 27)


def test_neg_and_scale():
    assert -Interval(-1, 2) == Interval(-2, 1)
    assert Interval(1, 2).scale(-3.0) == Interval(-6, -3)
    assert 2 * Interval(1, 2) == Interval(2, 4)


# -- soundness properties -------------------------------------------------


@given(intervals(), intervals())
def test_add_contains_endpoint_sums(a, b):
    c = a + b
    for x in _corners(a):
        for y in _corners(b):
            assert Fraction(c.lo) <= x + y <= Fraction(c.hi)


@given(intervals(), intervals())
def test_mul_contains_endpoint_products(a, b):
    c = iv_mul(a, b)
    for x in _corners(a):
        for y in _corners(b):
            assert Fraction(c.lo) <= x * y <= Fraction(c.hi)


@given(intervals(), intervals())
def test_sub_contains_endpoint_differences(a, b):
    c = a - b
    for x in _corners(a):
        for y in _corners(b):
            assert Fraction(c.lo) <= x - y <= Fraction(c.hi)


@given(intervals(), intervals())
def test_div_contains_endpoint_quotients(a, b):
    assume(not b.contains(0.0))
    c = iv_div(a, b)
    for x in _corners(a):
        for y in _corners(b):
            q = x / y
            if not math.isinf(c.lo):
                assert Fraction(c.lo) <= q
            if not math.isinf(c.hi):
                assert q <= Fraction(c.hi)


@given(intervals(st.floats(min_value=-1e30, max_value=1e30)),
       st.integers(min_value=0, max_value=12))
def test_pow_contains_endpoint_powers(a, n):
    c = iv_pow(a, n)
    for x in _corners(a):
        v = x ** n  # Fraction power: exact
        if not math.isinf(c.lo):
            assert Fraction(c.lo) <= v
        if not math.isinf(c.hi):
            assert v <= Fraction(c.hi)
    if n % 2 == 0 and a.contains(0.0) and n > 0:
        assert c.contains(0.0)


@given(intervals(st.floats(min_value=-1e30, max_value=1e30)),
       st.integers(min_value=2, max_value=8))
def test_pow_no_dependency_blowup(a, n):
    """iv_pow tracks the true range; a naive mul chain may be much wider.

    Both are valid enclosures computed along different float paths, so they
    can disagree by a few ulps in either direction, but iv_pow must never be
    wider by more than that, and on zero-straddling even powers its lower
    bound is exact where the chain's is badly negative.
    """
    c = iv_pow(a, n)
    chain = a
    for _ in range(n - 1):
        chain = iv_mul(chain, a)
    slack_hi = 8 * math.ulp(max(abs(c.hi), abs(chain.hi), 1e-300))
    slack_lo = 8 * math.ulp(max(abs(c.lo), abs(chain.lo), 1e-300))
    assert c.hi <= chain.hi + slack_hi
    assert c.lo >= chain.lo - slack_lo
    if n % 2 == 0 and a.lo < 0.0 < a.hi:
        assert c.lo == 0.0 and chain.lo <= 0.0


@given(intervals())
def test_mid_rad_reconstruct(a):
    m = a.mid()
    assert a.contains(m)
    r = a.rad()
    assert Fraction(m) - Fraction(r) <= Fraction(a.lo)
    assert Fraction(a.hi) <= Fraction(m) + Fraction(r)


@given(st.fractions())
def test_from_fraction_tight(fr):
    iv = Interval.from_fraction(fr)
    assert Fraction(iv.lo) <= fr <= Fraction(iv.hi)
    assert iv.hi == iv.lo or math.nextafter(iv.lo, math.inf) == iv.hi


@given(intervals(), intervals())
def test_hull_and_intersect(a, b):
    h = a.hull(b)
    assert h.contains_interval(a) and h.contains_interval(b)
    c = a.intersect(b)
    if c is None:
        assert a.hi < b.lo or b.hi < a.lo
    else:
        assert a.contains_interval(c) and b.contains_interval(c)


@given(st.lists(st.floats(min_value=-1e100, max_value=1e100), min_size=1, max_size=6))
def test_norm2_up_bounds_exact_norm(v):
    r = norm2_up(v)
    assert Fraction(r) ** 2 >= sum(Fraction(x) ** 2 for x in v)


# -- boxes ----------------------------------------------------------------


@given(boxes())
def test_split_tiles_parent(box):
    children = split_box(box)
    assert len(children) == 2 ** len(box)
    for ch in children:
        assert box.contains_box(ch)
    # midpoint of the parent lies in every child's closure of one orthant;
    # parent corners must each lie in exactly one child
    for corner in [tuple(iv.lo for iv in box), tuple(iv.hi for iv in box)]:
        assert any(ch.contains_point(corner) for ch in children)


@given(boxes(dim=2))
def test_split_volume_preserved(box):
    children = split_box(box)
    assume(box.volume() > 0 and box.volume() < 1e200)
    total = sum(ch.volume() for ch in children)
    assert total == pytest.approx(box.volume(), rel=1e-9)


@given(boxes(), st.data())
def test_box_contains_sampled_point(box, data):
    pt = [
        data.draw(st.floats(min_value=iv.lo, max_value=iv.hi, allow_nan=False))
        for iv in box
    ]
    assert box.contains_point(pt)


@given(boxes(dim=3), boxes(dim=3))
def test_minkowski_sum_contains_corner_sums(a, b):
    c = a.minkowski_sum(b)
    for ia, ib, ic in zip(a, b, c):
        for x in _corners(ia):
            for y in _corners(ib):
                assert Fraction(ic.lo) <= x + y <= Fraction(ic.hi)


@given(boxes())
def test_box_ball_roundtrip_contains(box):
    ball = box_to_ball(box)
    back = ball_to_box(ball)
    assert back.contains_box(box)


@given(boxes())
def test_ball_contains_box_corners_exactly(box):
    ball = box_to_ball(box)
    r2 = Fraction(ball.radius) ** 2
    for corner in _corner_tuples(box):
        d2 = sum(
            (Fraction(x) - Fraction(c)) ** 2 for x, c in zip(corner, ball.center)
        )
        assert d2 <= r2


def _corner_tuples(box: Box):
    import itertools

    return itertools.product(*[(iv.lo, iv.hi) for iv in box])


def test_ball_to_box_outward():
    b = Ball((0.1, -0.2), 0.3)
    bx = ball_to_box(b)
    for i in range(2):
        c, r = Fraction(b.center[i]), Fraction(b.radius)
        assert Fraction(bx[i].lo) <= c - r
        assert Fraction(bx[i].hi) >= c + r


def test_box_point_and_from_center():
    b = Box.from_center([1.0, 2.0], [0.5, 0.25])
    assert b.contains_point([1.5, 2.25]) and b.contains_point([0.5, 1.75])
    p = Box.point([3.0, 4.0])
    assert p.width_max() == 0.0 and p.mid() == (3.0, 4.0)
