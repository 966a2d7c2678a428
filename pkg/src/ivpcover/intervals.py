"""Closed intervals, boxes and balls with outward rounding.

`Interval` endpoints are binary64 floats and every arithmetic operation
rounds the lower endpoint down and the upper endpoint up, so the true real
result set is always contained in the returned interval.  Scalars mixed into
interval arithmetic are treated as exact point intervals (a float *is* an
exact rational).

A `Box` is an axis-aligned product of intervals; a `Ball` is a Euclidean
ball given by a float center and an up-rounded radius.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .errors import DomainError
from .rounding import (
    add_down,
    add_up,
    div_down,
    div_up,
    mul_down,
    mul_up,
    next_down,
    next_up,
    pow_down,
    pow_up,
    sqrt_up,
    sub_down,
    sub_up,
)


class Interval:
    """A nonempty closed interval [lo, hi] with lo <= hi."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float):
        self.lo = float(lo)
        self.hi = float(hi)

    @staticmethod
    def point(x: float) -> "Interval":
        return Interval(x, x)

    @staticmethod
    def from_fraction(fr: Fraction) -> "Interval":
        """Tightest float interval containing an exact rational."""
        f = float(fr)
        if f == fr:
            return Interval(f, f)
        if f > fr:
            return Interval(next_down(f), f)
        return Interval(f, next_up(f))

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Interval):
            return NotImplemented
        return self.lo == other.lo and self.hi == other.hi

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))

    # -- queries ---------------------------------------------------------

    def mid(self) -> float:
        m = 0.5 * (self.lo + self.hi)
        if not (self.lo <= m <= self.hi):  # overflow in lo+hi
            m = 0.5 * self.lo + 0.5 * self.hi
        return min(max(m, self.lo), self.hi)

    def width(self) -> float:
        return sub_up(self.hi, self.lo)

    def rad(self) -> float:
        """Radius around mid(), rounded up."""
        m = self.mid()
        return max(sub_up(self.hi, m), sub_up(m, self.lo))

    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    def mig(self) -> float:
        if self.lo > 0.0:
            return self.lo
        if self.hi < 0.0:
            return -self.hi
        return 0.0

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def intersect(self, other: "Interval") -> "Interval | None":
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return None
        return Interval(lo, hi)

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    # -- arithmetic ------------------------------------------------------

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __add__(self, other: "Interval | float | int") -> "Interval":
        if isinstance(other, Interval):
            return Interval(add_down(self.lo, other.lo), add_up(self.hi, other.hi))
        o = float(other)
        return Interval(add_down(self.lo, o), add_up(self.hi, o))

    __radd__ = __add__

    def __sub__(self, other: "Interval | float | int") -> "Interval":
        if isinstance(other, Interval):
            return Interval(sub_down(self.lo, other.hi), sub_up(self.hi, other.lo))
        o = float(other)
        return Interval(sub_down(self.lo, o), sub_up(self.hi, o))

    def __rsub__(self, other: "float | int") -> "Interval":
        o = float(other)
        return Interval(sub_down(o, self.hi), sub_up(o, self.lo))

    def __mul__(self, other: "Interval | float | int") -> "Interval":
        if isinstance(other, Interval):
            return iv_mul(self, other)
        return self.scale(float(other))

    __rmul__ = __mul__

    def scale(self, c: float) -> "Interval":
        if c >= 0.0:
            return Interval(mul_down(c, self.lo), mul_up(c, self.hi))
        return Interval(mul_down(c, self.hi), mul_up(c, self.lo))

    def __truediv__(self, other: "Interval | float | int") -> "Interval":
        if not isinstance(other, Interval):
            other = Interval.point(float(other))
        return iv_div(self, other)

    def __rtruediv__(self, other: "float | int") -> "Interval":
        return iv_div(Interval.point(float(other)), self)

    def __pow__(self, n: int) -> "Interval":
        return iv_pow(self, n)


def iv_mul(a: Interval, b: Interval) -> Interval:
    al, ah, bl, bh = a.lo, a.hi, b.lo, b.hi
    if al >= 0.0:
        if bl >= 0.0:
            return Interval(mul_down(al, bl), mul_up(ah, bh))
        if bh <= 0.0:
            return Interval(mul_down(ah, bl), mul_up(al, bh))
        return Interval(mul_down(ah, bl), mul_up(ah, bh))
    if ah <= 0.0:
        if bl >= 0.0:
            return Interval(mul_down(al, bh), mul_up(ah, bl))
        if bh <= 0.0:
            return Interval(mul_down(ah, bh), mul_up(al, bl))
        return Interval(mul_down(al, bh), mul_up(al, bl))
    if bl >= 0.0:
        return Interval(mul_down(al, bh), mul_up(ah, bh))
    if bh <= 0.0:
        return Interval(mul_down(ah, bl), mul_up(al, bl))
    return Interval(
        min(mul_down(al, bh), mul_down(ah, bl)),
        max(mul_up(al, bl), mul_up(ah, bh)),
    )


def iv_div(a: Interval, b: Interval) -> Interval:
    if b.lo <= 0.0 <= b.hi:
        raise DomainError(f"division by an interval containing zero: {b}")
    lo = min(
        div_down(a.lo, b.lo), div_down(a.lo, b.hi),
        div_down(a.hi, b.lo), div_down(a.hi, b.hi),
    )
    hi = max(
        div_up(a.lo, b.lo), div_up(a.lo, b.hi),
        div_up(a.hi, b.lo), div_up(a.hi, b.hi),
    )
    return Interval(lo, hi)


def iv_pow(a: Interval, n: int) -> Interval:
    if n < 0:
        raise DomainError("negative integer powers are not supported")
    if n == 0:
        return Interval(1.0, 1.0)
    if n == 1:
        return Interval(a.lo, a.hi)
    if n % 2 == 1:
        return Interval(_pow_signed_down(a.lo, n), _pow_signed_up(a.hi, n))
    if a.lo >= 0.0:
        return Interval(pow_down(a.lo, n), pow_up(a.hi, n))
    if a.hi <= 0.0:
        return Interval(pow_down(-a.hi, n), pow_up(-a.lo, n))
    return Interval(0.0, pow_up(a.mag(), n))


def _pow_signed_down(x: float, n: int) -> float:
    return pow_down(x, n) if x >= 0.0 else -pow_up(-x, n)


def _pow_signed_up(x: float, n: int) -> float:
    return pow_up(x, n) if x >= 0.0 else -pow_down(-x, n)


def norm2_up(v: Sequence[float]) -> float:
    """Euclidean norm of a float vector, rounded up."""
    s = 0.0
    for x in v:
        s = add_up(s, mul_up(x, x))
    return sqrt_up(s)


# -- boxes ---------------------------------------------------------------


class Box:
    """An axis-aligned product of intervals."""

    __slots__ = ("ivs",)

    def __init__(self, ivs: Iterable[Interval]):
        self.ivs = tuple(ivs)

    @staticmethod
    def point(xs: Sequence[float]) -> "Box":
        return Box(Interval.point(float(x)) for x in xs)

    @staticmethod
    def from_center(center: Sequence[float], radii: Sequence[float]) -> "Box":
        return Box(
            Interval(sub_down(c, r), add_up(c, r))
            for c, r in zip(center, radii)
        )

    def __len__(self) -> int:
        return len(self.ivs)

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.ivs)

    def __getitem__(self, i: int) -> Interval:
        return self.ivs[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Box):
            return NotImplemented
        return self.ivs == other.ivs

    def __hash__(self) -> int:
        return hash(self.ivs)

    def __repr__(self) -> str:
        inner = ", ".join(f"[{iv.lo:.6g}, {iv.hi:.6g}]" for iv in self.ivs)
        return f"Box({inner})"

    def mid(self) -> tuple[float, ...]:
        return tuple(iv.mid() for iv in self.ivs)

    def widths(self) -> tuple[float, ...]:
        return tuple(iv.width() for iv in self.ivs)

    def width_max(self) -> float:
        return max(iv.width() for iv in self.ivs)

    def rad_max(self) -> float:
        return max(iv.rad() for iv in self.ivs)

    def volume(self) -> float:
        v = 1.0
        for iv in self.ivs:
            v *= iv.hi - iv.lo
        return v

    def contains_point(self, xs: Sequence[float]) -> bool:
        return all(iv.contains(float(x)) for iv, x in zip(self.ivs, xs))

    def contains_box(self, other: "Box") -> bool:
        return all(a.contains_interval(b) for a, b in zip(self.ivs, other.ivs))

    def intersect(self, other: "Box") -> "Box | None":
        out = []
        for a, b in zip(self.ivs, other.ivs):
            iv = a.intersect(b)
            if iv is None:
                return None
            out.append(iv)
        return Box(out)

    def hull(self, other: "Box") -> "Box":
        return Box(a.hull(b) for a, b in zip(self.ivs, other.ivs))

    def minkowski_sum(self, other: "Box") -> "Box":
        return Box(a + b for a, b in zip(self.ivs, other.ivs))


def split_box(box: Box) -> list[Box]:
    """Bisect every coordinate at its midpoint: 2**n congruent sub-boxes."""
    halves = []
    for iv in box:
        m = iv.mid()
        halves.append((Interval(iv.lo, m), Interval(m, iv.hi)))
    return [Box(combo) for combo in itertools.product(*halves)]


# -- balls ---------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    """Euclidean ball: all points within `radius` of `center` in 2-norm."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def contains_point(self, xs: Sequence[float]) -> bool:
        d = sum((x - c) ** 2 for x, c in zip(xs, self.center))
        return d <= self.radius * self.radius


def box_to_ball(box: Box) -> Ball:
    """Smallest certified enclosing ball centered at the box midpoint."""
    m = box.mid()
    half = [max(sub_up(iv.hi, c), sub_up(c, iv.lo)) for iv, c in zip(box, m)]
    return Ball(m, norm2_up(half))


def ball_to_box(ball: Ball) -> Box:
    """Tightest box containing the ball (outward rounded)."""
    return Box.from_center(ball.center, [ball.radius] * len(ball.center))
