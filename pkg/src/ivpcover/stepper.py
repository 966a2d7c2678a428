"""One-step enclosure operators.

step_a produces an a-priori full enclosure by first-order Picard inflation
(halving the step until the iteration contracts).  direct computes the
mean-value end-enclosure

    Tay_{m}(t) + t^k f^[k](F1) + (sum_i t^i J_{f^[i]}(E0)) (E0 - m)

whose three terms are called the point value, point error and range
enclosure below.  e1_combined tightens direct with the Taylor-tube ball:
either by intersecting with the tube enclosure box (general case) or, when
the tube degree is k-1, term by term against the centered boxes [-delta,
delta]^n and [-r0 e^(mu h), r0 e^(mu h)]^n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InternalSoundnessViolation, StepFailure
from .expr import OdeSystem
from .intervals import (
    Ball,
    Box,
    Interval,
    ball_to_box,
    box_to_ball,
    iv_mul,
    iv_pow,
    norm2_up,
)
from .jets import eval_series, taylor_coeffs, taylor_coeffs_and_jacobians
from .rounding import add_up, exp_up, mul_up
from .tube import (
    TaylorCurve,
    TubeParams,
    h_taylor,
    tube_end_enclosure,
    tube_full_enclosure,
)

__all__ = [
    "Quad",
    "step_a",
    "DirectParts",
    "prepare_direct",
    "direct_parts_eval",
    "direct_eval",
    "direct",
    "e1_combined",
]


@dataclass(frozen=True)
class Quad:
    """One admissible stage: F encloses all of Image(e_prev, h), e_next its end."""

    e_prev: Box
    h: float
    full: Box
    e_next: Box


def _finite(box: Box) -> bool:
    return all(math.isfinite(iv.lo) and math.isfinite(iv.hi) for iv in box)


def _inflate(box: Box, rel: float, absolute: float) -> Box:
    out = []
    for iv in box:
        m = iv.mid()
        r = add_up(mul_up(iv.rad(), rel), absolute)
        out.append(Interval(m - r, m + r))
    return Box(out)


def step_a(
    system: OdeSystem, E0: Box, h_request: float
) -> tuple[float, Box]:
    """A-priori full enclosure: h <= h_request with F containing Image(E0, h).

    Candidate F = hull(E0, E0 + [0,h] f(E0)) inflated (factor 1.1, +1e-6);
    Picard iterate F' = E0 + [0,h] f(F) up to 20 times looking for F' in F;
    halve h on failure.  Below h_request * 2^-40 raise StepFailure.
    """
    if h_request <= 0.0:
        raise ValueError("step request must be positive")
    h = h_request
    h_min = h_request * 2.0**-40
    while h >= h_min:
        span = Interval(0.0, h)
        f0 = system.f_box(E0)
        cand = E0.hull(E0.minkowski_sum(Box(iv_mul(span, fv) for fv in f0)))
        F = _inflate(cand, 1.1, 1e-6)
        for _ in range(20):
            if not _finite(F):  # overflowed: this h cannot work
                break
            fF = system.f_box(F)
            F_new = Box(
                e + iv_mul(span, fv) for e, fv in zip(E0, fF)
            )
            if _finite(F_new) and F.contains_box(F_new):
                # contraction established: F_new is a valid enclosure; two
                # extra sweeps tighten it further
                F = F_new
                for _ in range(2):
                    fF = system.f_box(F)
                    F = Box(e + iv_mul(span, fv) for e, fv in zip(E0, fF))
                return h, F
            F = F_new
        h *= 0.5
    raise StepFailure(
        f"no a-priori enclosure for steps down to {h_min:g} "
        f"(requested {h_request:g})"
    )


@dataclass
class DirectParts:
    """Shared jet evaluations for repeated direct() calls on one (E0, F1)."""

    system: OdeSystem
    E0: Box
    F1: Box
    k: int
    mid: tuple[float, ...]
    center_coeffs: list[Box]  # f^[i](m), i = 0..k-1
    mats: list[list[list[Interval]]]  # J_{f^[i]}(E0), i = 0..k-1
    diff: Box  # E0 - m
    tail: Box  # f^[k](F1)

    def m_bar(self) -> float:
        """Tube coefficient bound sharing this object's tail (p = k-1)."""
        return norm2_up([iv.mag() for iv in self.tail])


def prepare_direct(system: OdeSystem, E0: Box, F1: Box, k: int) -> DirectParts:
    if k < 1:
        raise ValueError("order must be at least 1")
    m = E0.mid()
    center_coeffs = taylor_coeffs(system, Box.point(m), k - 1)
    _, mats = taylor_coeffs_and_jacobians(system, E0, k)
    diff = Box(iv - c for iv, c in zip(E0, m))
    tail = taylor_coeffs(system, F1, k)[k]
    return DirectParts(system, E0, F1, k, m, center_coeffs, mats, diff, tail)


def _re_vector(parts: DirectParts, t: Interval) -> Box:
    """(sum_i t^i J_{f^[i]}(E0)) * (E0 - m), evaluated row by row."""
    n = len(parts.E0)
    k = parts.k
    # accumulated matrix A = sum t^i M_i
    t_pow = Interval(1.0, 1.0)
    A = [row[:] for row in parts.mats[0]]
    for i in range(1, k):
        t_pow = iv_mul(t_pow, t)
        Mi = parts.mats[i]
        for r in range(n):
            Ar = A[r]
            Mir = Mi[r]
            for c in range(n):
                Ar[c] = Ar[c] + iv_mul(t_pow, Mir[c])
    out = []
    for r in range(n):
        acc = Interval(0.0, 0.0)
        for c in range(n):
            acc = acc + iv_mul(A[r][c], parts.diff[c])
        out.append(acc)
    return Box(out)


def direct_parts_eval(parts: DirectParts, t: "float | Interval") -> tuple[Box, Box, Box]:
    """(point, point_error, range_enclosure) at time t or over t = [0, h]."""
    t_iv = t if isinstance(t, Interval) else Interval(float(t), float(t))
    point = eval_series(parts.center_coeffs, t_iv)
    tk = iv_pow(t_iv, parts.k)
    pe = Box(iv_mul(tk, tv) for tv in parts.tail)
    re = _re_vector(parts, t_iv)
    return point, pe, re


def direct_eval(parts: DirectParts, t: "float | Interval") -> Box:
    point, pe, re = direct_parts_eval(parts, t)
    return point.minkowski_sum(pe).minkowski_sum(re)


def direct(
    system: OdeSystem, E0: Box, t: "float | Interval", F1: Box, k: int
) -> Box:
    """Mean-value end-enclosure (t = h) or full-enclosure refinement (t = [0,h])."""
    return direct_eval(prepare_direct(system, E0, F1, k), t)


def _centered_box(n: int, r: float) -> Box:
    return Box([Interval(-r, r)] * n)


def e1_combined(
    system: OdeSystem,
    E0: Box,
    t: "float | Interval",
    F1: Box,
    k: int,
    p: int,
    delta: float,
    mu_bar: float,
    m_bar: float,
    curve: TaylorCurve,
    parts: DirectParts | None = None,
) -> Box:
    """Tube-tightened enclosure; always a subset of direct's result.

    Caller must have verified the tube preconditions: curve rooted at
    mid(E0) with mini-step at most h_taylor, and the image-inclusion checks
    along the nodes.
    """
    if parts is None:
        parts = prepare_direct(system, E0, F1, k)
    t_iv = t if isinstance(t, Interval) else Interval(float(t), float(t))
    h = t_iv.hi
    n = len(E0)
    r0 = box_to_ball(E0).radius
    grow = exp_up(mul_up(mu_bar, h))

    if curve.q0 != parts.mid:
        raise ValueError("tube curve must be rooted at mid(E0)")

    if p == k - 1:
        # term-wise: the tube bounds the point error by delta and the spread
        # by r0 e^(mu h); valid only when h itself is a certified mini-step
        bound = h_taylor(p, max(h, 1e-300), m_bar, mu_bar, delta)
        if h > bound:
            raise ValueError(
                f"step {h} exceeds the certified tube bound {bound}; "
                "term-wise tightening needs h <= h_taylor"
            )
        point, pe, re = direct_parts_eval(parts, t_iv)
        spread = mul_up(r0, max(1.0, grow)) if isinstance(t, Interval) \
            else mul_up(r0, grow)
        pe_cut = pe.intersect(_centered_box(n, delta))
        re_cut = re.intersect(_centered_box(n, spread))
        if pe_cut is None or re_cut is None:
            raise InternalSoundnessViolation(
                "tube term bounds disjoint from direct terms"
            )
        return point.minkowski_sum(pe_cut).minkowski_sum(re_cut)

    tp = TubeParams(degree=p, delta=delta, mu_bar=mu_bar, m_bar=m_bar,
                    h_bar=curve.h_bar)
    if isinstance(t, Interval):
        tube_box = tube_full_enclosure(Ball(curve.q0, r0), h, tp, curve)
    else:
        ball = tube_end_enclosure(Ball(curve.q0, r0), h, tp, curve)
        tube_box = ball_to_box(ball)
    d = direct_eval(parts, t_iv)
    out = d.intersect(tube_box)
    if out is None:
        raise InternalSoundnessViolation(
            "tube enclosure disjoint from direct enclosure"
        )
    return out
