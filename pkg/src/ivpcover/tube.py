"""Taylor curves, the tube step-size bound, and tube-based enclosures.

A Taylor curve steps the degree-p Taylor polynomial from node to node with a
fixed mini-step.  If the mini-step is at most the bound h_taylor(p, h, M, mu,
delta), the curve stays within Euclidean distance delta of the true
trajectory of its start point over [0, h] (provided the image-inclusion
checks hold), so balls around the curve give end- and full-enclosures whose
radius grows like r0 * e^(mu*t) + delta instead of compounding box hulls.

All step-size arithmetic rounds toward a smaller step and all enclosure
radii round up, so every returned set is certified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .expr import OdeSystem
from .intervals import Ball, Box, Interval, iv_mul, iv_pow
from .jets import eval_series, eval_series_point, taylor_coeffs
from .rounding import (
    add_up,
    div_down,
    exp_up,
    expm1_up,
    expm1_down,
    mul_down,
    mul_up,
    nthroot_down,
    pow_up,
    sub_down,
)

__all__ = [
    "TaylorCurve",
    "TubeParams",
    "h_taylor",
    "g_sequence",
    "g_closed_form",
    "taylor_curve_eval",
    "curve_range_box",
    "tube_end_enclosure",
    "tube_full_enclosure",
    "check_image_inclusion",
]


def h_taylor(p: int, h: float, m_bar: float, mu_bar: float, delta: float) -> float:
    """Largest certified tube mini-step (rounded down; +inf when M = 0).

    mu > 0:  (mu*delta / (M*(e^(mu*h) - 1)))^(1/p)
    mu = 0:  (delta / (M*h))^(1/p)
    mu < 0:  min( (mu*delta / (2M*(e^(mu*h) - 1)))^(1/p), -1/mu )
    """
    if p < 1:
        raise ValueError("degree p must be >= 1")
    if h <= 0.0:
        raise ValueError("horizon h must be positive")
    if m_bar < 0.0:
        raise ValueError("coefficient bound must be nonnegative")
    if delta <= 0.0:
        raise ValueError("tube radius delta must be positive")
    if m_bar == 0.0:
        return math.inf
    if mu_bar > 0.0:
        num = mul_down(mu_bar, delta)
        den = mul_up(m_bar, expm1_up(mul_up(mu_bar, h)))
        return nthroot_down(div_down(num, den), p)
    if mu_bar == 0.0:
        return nthroot_down(div_down(delta, mul_up(m_bar, h)), p)
    # mu < 0: both mu*delta and e^(mu*h)-1 are negative; work with magnitudes
    num = mul_down(-mu_bar, delta)
    den = mul_up(mul_up(2.0, m_bar), -expm1_down(mul_down(mu_bar, h)))
    root = nthroot_down(div_down(num, den), p)
    return min(root, div_down(1.0, -mu_bar))


def g_sequence(m_bar: float, mu_bar: float, h_bar: float, p: int, m: int) -> list[float]:
    """Accumulated tube-error recurrence G_0 = 0, G_i = M*hb^(p+1) + G_{i-1}*e^(mu*hb)."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    step = m_bar * h_bar ** (p + 1)
    grow = math.exp(mu_bar * h_bar)
    out = [0.0]
    for _ in range(m):
        out.append(step + out[-1] * grow)
    return out


def g_closed_form(m_bar: float, mu_bar: float, h_bar: float, p: int, i: int) -> float:
    """Closed form of G_i.

    For mu != 0: M*hb^(p+1) * (e^(i*mu*hb) - 1)/(e^(mu*hb) - 1).  The mu = 0
    limit of that expression is i * M * hb^(p+1), which matches the
    recurrence, so that is what this returns for mu = 0.
    """
    step = m_bar * h_bar ** (p + 1)
    if mu_bar == 0.0:
        return i * step
    x = mu_bar * h_bar
    return step * math.expm1(i * x) / math.expm1(x)


@dataclass
class TaylorCurve:
    """Piecewise Taylor polynomial trajectory with materialized nodes."""

    system: OdeSystem
    q0: tuple[float, ...]
    h_bar: float
    degree: int
    nodes: list[tuple[float, ...]] = field(default_factory=list)
    node_coeffs: list[list[Box]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.h_bar <= 0.0:
            raise ValueError("curve step must be positive")
        if not self.nodes:
            self.nodes.append(tuple(float(x) for x in self.q0))

    def ensure_nodes(self, count: int) -> None:
        """Materialize nodes[0..count] and coefficients at nodes[0..count-1]."""
        while len(self.node_coeffs) < count or len(self.nodes) <= count:
            i = len(self.node_coeffs)
            if i >= len(self.nodes):
                break
            cs = taylor_coeffs(self.system, Box.point(self.nodes[i]), self.degree)
            self.node_coeffs.append(cs)
            if len(self.nodes) == i + 1:
                nxt = eval_series_point(cs, self.h_bar)
                self.nodes.append(nxt.mid())

    def coeffs_at(self, i: int) -> list[Box]:
        self.ensure_nodes(i + 1)
        return self.node_coeffs[i]


def _piece_index(curve: TaylorCurve, t: float) -> tuple[int, float]:
    if t < 0.0:
        raise ValueError("curve evaluated at negative time")
    i = int(t / curve.h_bar)
    s = t - i * curve.h_bar
    if s < 0.0:  # float guard
        i, s = i - 1, t - (i - 1) * curve.h_bar
    return i, min(s, curve.h_bar)


def taylor_curve_eval(curve: TaylorCurve, t: float) -> tuple[float, ...]:
    """Point on the curve at time t (midpoint of the outward evaluation)."""
    i, s = _piece_index(curve, t)
    if s == 0.0:
        curve.ensure_nodes(i)
        return curve.nodes[i]
    cs = curve.coeffs_at(i)
    return eval_series_point(cs, s).mid()


def curve_range_box(curve: TaylorCurve, h: float) -> Box:
    """Box hull of the curve's polynomial range over [0, h], piece by piece."""
    if h <= 0.0:
        return Box.point(curve.nodes[0])
    n_full, rem = divmod(h, curve.h_bar)
    pieces = int(n_full) + (1 if rem > 0.0 else 0)
    hull: Box | None = None
    for i in range(pieces):
        span = curve.h_bar if i < pieces - 1 or rem == 0.0 else rem
        r = eval_series(curve.coeffs_at(i), Interval(0.0, span))
        hull = r if hull is None else hull.hull(r)
    assert hull is not None
    return hull


@dataclass(frozen=True)
class TubeParams:
    """Certified tube data for one (E0, h, F1) stage."""

    degree: int
    delta: float
    mu_bar: float
    m_bar: float
    h_bar: float

    def __post_init__(self) -> None:
        if self.delta <= 0.0:
            raise ValueError("delta must be positive")
        if self.h_bar <= 0.0:
            raise ValueError("mini-step must be positive")


def _check_step_bound(h: float, tp: TubeParams) -> None:
    bound = h_taylor(tp.degree, h, tp.m_bar, tp.mu_bar, tp.delta)
    if tp.h_bar > bound:
        raise ValueError(
            f"tube mini-step {tp.h_bar} exceeds certified bound {bound}"
        )


def tube_end_enclosure(
    E0: Ball, h: float, tp: TubeParams, curve: TaylorCurve
) -> Ball:
    """Ball at curve(h) with radius r0*e^(mu*h) + delta; contains End(E0, h)."""
    _check_step_bound(h, tp)
    center = taylor_curve_eval(curve, h)
    radius = add_up(mul_up(E0.radius, exp_up(mul_up(tp.mu_bar, h))), tp.delta)
    return Ball(center, radius)


def tube_full_enclosure(
    E0: Ball, h: float, tp: TubeParams, curve: TaylorCurve
) -> Box:
    """Curve range over [0,h] inflated by delta + max(r0, r0*e^(mu*h))."""
    _check_step_bound(h, tp)
    grown = mul_up(E0.radius, exp_up(mul_up(tp.mu_bar, h)))
    r = add_up(tp.delta, max(E0.radius, grown))
    rng = curve_range_box(curve, h)
    return Box(
        Interval(sub_down(iv.lo, r), add_up(iv.hi, r)) for iv in rng
    )


def check_image_inclusion(
    system: OdeSystem,
    q: tuple[float, ...],
    h_bar: float,
    p: int,
    F1: Box,
    tail: Box | None = None,
) -> bool:
    """Sufficient check that all trajectories from q stay in F1 over [0, h_bar].

    Verifies Tay_q([0,h]) + [0,h]^(p+1) * f^[p+1](F1) inside F1.  The
    polynomial range is evaluated piecewise in time (the hull over a
    partition encloses the range with far less interval wrapping than one
    whole-step evaluation, which matters once F1 has been refined close to
    the true flow tube).  A precomputed enclosure of f^[p+1] over F1 may be
    passed as `tail` to avoid recomputing the jet.  Any arithmetic failure
    returns False (conservative).
    """
    try:
        cs = taylor_coeffs(system, Box.point(q), p)
        if tail is None:
            tail = taylor_coeffs(system, F1, p + 1)[p + 1]
        hp = Interval(0.0, pow_up(h_bar, p + 1))
        remainder = [iv_mul(hp, tail[v]) for v in range(len(tail))]
        for pieces in (8, 32, 128):
            if _pieces_inside(cs, remainder, F1, h_bar, pieces):
                return True
        return False
    except Exception:
        return False


def _pieces_inside(
    cs: list[Box],
    remainder: list[Interval],
    F1: Box,
    h_bar: float,
    pieces: int,
) -> bool:
    for piece in range(pieces):
        lo = h_bar * piece / pieces
        hi = h_bar if piece == pieces - 1 else h_bar * (piece + 1) / pieces
        rng = eval_series(cs, Interval(lo, hi))
        total = Box(rng[v] + remainder[v] for v in range(len(rng)))
        if not F1.contains_box(total):
            return False
    return True
