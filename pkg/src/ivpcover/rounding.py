"""Directed rounding for binary64 arithmetic.

Python cannot portably switch the FPU rounding mode, so every primitive here
computes the round-to-nearest result and then corrects it.  For +, -, *, /
and sqrt the correction is exact: an error-free transformation (two-sum /
Dekker two-product) recovers the sign of the rounding error, so the directed
result is the true directed rounding whenever the operands are in the safe
exponent range.  Outside that range, and for transcendental functions, the
result is nudged one or two units in the last place outward, which is the
documented fallback path.

All functions take and return Python floats and never raise on infinities;
NaN inputs are the caller's bug and propagate.
"""

import math

_INF = math.inf
# Dekker splitting fails near overflow; two-product error terms are inexact
# in the subnormal range.  Stay well clear of both.
_BIG = 6.7e291
_TINY = 1.5e-287


def next_down(x: float) -> float:
    return math.nextafter(x, -_INF)


def next_up(x: float) -> float:
    return math.nextafter(x, _INF)


def _two_sum_err(a: float, b: float, s: float) -> float:
    bb = s - a
    return (a - (s - bb)) + (b - bb)


def add_down(a: float, b: float) -> float:
    s = a + b
    if math.isinf(s):
        return s if s < 0 else math.nextafter(_INF, 0.0)
    if abs(s) > _BIG:
        return next_down(s)
    e = _two_sum_err(a, b, s)
    return next_down(s) if e < 0.0 else s


def add_up(a: float, b: float) -> float:
    s = a + b
    if math.isinf(s):
        return s if s > 0 else -math.nextafter(_INF, 0.0)
    if abs(s) > _BIG:
        return next_up(s)
    e = _two_sum_err(a, b, s)
    return next_up(s) if e > 0.0 else s


def sub_down(a: float, b: float) -> float:
    return add_down(a, -b)


def sub_up(a: float, b: float) -> float:
    return add_up(a, -b)


_SPLITTER = 134217729.0  # 2**27 + 1


def _two_prod_err(a: float, b: float, p: float) -> float:
    # Dekker: valid because callers guard the exponent range.
    ah = a * _SPLITTER
    ah = ah - (ah - a)
    al = a - ah
    bh = b * _SPLITTER
    bh = bh - (bh - b)
    bl = b - bh
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


def mul_down(a: float, b: float) -> float:
    p = a * b
    if p == 0.0:
        # Exact unless underflow; a true tiny nonzero product may round to 0.
        if a != 0.0 and b != 0.0 and (a > 0.0) != (b > 0.0):
            return -5e-324
        return 0.0
    if math.isinf(p):
        return p if p < 0 else math.nextafter(_INF, 0.0)
    if not (_TINY < abs(p) < _BIG) or abs(a) > _BIG or abs(b) > _BIG:
        return next_down(p)
    e = _two_prod_err(a, b, p)
    return next_down(p) if e < 0.0 else p


def mul_up(a: float, b: float) -> float:
    p = a * b
    if p == 0.0:
        if a != 0.0 and b != 0.0 and (a > 0.0) == (b > 0.0):
            return 5e-324
        return 0.0
    if math.isinf(p):
        return p if p > 0 else -math.nextafter(_INF, 0.0)
    if not (_TINY < abs(p) < _BIG) or abs(a) > _BIG or abs(b) > _BIG:
        return next_up(p)
    e = _two_prod_err(a, b, p)
    return next_up(p) if e > 0.0 else p


def div_down(a: float, b: float) -> float:
    if a == 0.0:
        return 0.0
    q = a / b
    if math.isinf(q) or q == 0.0 or not (_TINY < abs(q) < _BIG) \
            or not (_TINY < abs(a) < _BIG) or not (_TINY < abs(b) < _BIG):
        return q if math.isinf(q) and q < 0 else next_down(q)
    # q*b versus a decides whether q over- or under-shoots a/b.
    p = q * b
    e = _two_prod_err(q, b, p)
    if b > 0.0:
        high = p > a or (p == a and e > 0.0)
    else:
        high = p < a or (p == a and e < 0.0)
    return next_down(q) if high else q


def div_up(a: float, b: float) -> float:
    if a == 0.0:
        return 0.0
    q = a / b
    if math.isinf(q) or q == 0.0 or not (_TINY < abs(q) < _BIG) \
            or not (_TINY < abs(a) < _BIG) or not (_TINY < abs(b) < _BIG):
        return q if math.isinf(q) and q > 0 else next_up(q)
    p = q * b
    e = _two_prod_err(q, b, p)
    if b > 0.0:
        low = p < a or (p == a and e < 0.0)
    else:
        low = p > a or (p == a and e > 0.0)
    return next_up(q) if low else q


def sqrt_down(x: float) -> float:
    if x <= 0.0:
        return 0.0
    s = math.sqrt(x)
    # guard on x, not s: the verification product s*s must stay in the
    # range where Dekker's error term is exact
    if not (_TINY < x < _BIG):
        return next_down(s)
    p = s * s
    e = _two_prod_err(s, s, p)
    high = p > x or (p == x and e > 0.0)
    return next_down(s) if high else s


def sqrt_up(x: float) -> float:
    if x <= 0.0:
        return 0.0
    s = math.sqrt(x)
    if not (_TINY < x < _BIG):
        return next_up(s)
    p = s * s
    e = _two_prod_err(s, s, p)
    low = p < x or (p == x and e < 0.0)
    return next_up(s) if low else s


def _exp_rn(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return _INF


def _expm1_rn(x: float) -> float:
    try:
        return math.expm1(x)
    except OverflowError:
        return _INF


def exp_down(x: float) -> float:
    # libm exp is faithfully rounded at worst; two ulps covers it.
    v = _exp_rn(x)
    if math.isinf(v):
        return math.nextafter(_INF, 0.0)
    return next_down(next_down(v))


def exp_up(x: float) -> float:
    v = _exp_rn(x)
    if math.isinf(v):
        return v
    return next_up(next_up(v))


def expm1_down(x: float) -> float:
    v = _expm1_rn(x)
    if math.isinf(v):
        return math.nextafter(_INF, 0.0)
    return next_down(next_down(v))


def expm1_up(x: float) -> float:
    v = _expm1_rn(x)
    if math.isinf(v):
        return v
    return next_up(next_up(v))


def pow_down(x: float, n: int) -> float:
    """x**n rounded down, for x >= 0 and integer n >= 0."""
    if n == 0:
        return 1.0
    r = 1.0
    acc = x
    m = n
    first = True
    while m:
        if m & 1:
            r = acc if first else mul_down(r, acc)
            first = False
        m >>= 1
        if m:
            acc = mul_down(acc, acc)
    return r


def pow_up(x: float, n: int) -> float:
    """x**n rounded up, for x >= 0 and integer n >= 0."""
    if n == 0:
        return 1.0
    r = 1.0
    acc = x
    m = n
    first = True
    while m:
        if m & 1:
            r = acc if first else mul_up(r, acc)
            first = False
        m >>= 1
        if m:
            acc = mul_up(acc, acc)
    return r


def nthroot_down(x: float, p: int) -> float:
    """x**(1/p) rounded down, for x >= 0 and integer p >= 1."""
    if x <= 0.0:
        return 0.0
    if p == 1:
        return x
    r = math.pow(x, 1.0 / p)
    while pow_up(r, p) > x:  # libm error can reach many ulps at extremes
        r = next_down(r)
    return r


def nthroot_up(x: float, p: int) -> float:
    """x**(1/p) rounded up, for x >= 0 and integer p >= 1."""
    if x <= 0.0:
        return 0.0
    if p == 1:
        return x
    r = math.pow(x, 1.0 / p)
    while pow_down(r, p) < x:  # libm error can reach many ulps at extremes
        r = next_up(r)
    return r
