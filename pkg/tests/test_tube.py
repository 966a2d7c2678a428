"""Tube step bound, accumulated-error recurrence, curves and enclosures."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ivpcover.expr import parse_problem_text
from ivpcover.intervals import Ball, Box, Interval, ball_to_box
from ivpcover.jets import norm_bound_coeff
from ivpcover.lognorm import lognorm_on_box
from ivpcover.reference import reference_endpoint, reference_trajectory
from ivpcover.tube import (
    TaylorCurve,
    TubeParams,
    check_image_inclusion,
    curve_range_box,
    g_closed_form,
    g_sequence,
    h_taylor,
    taylor_curve_eval,
    tube_end_enclosure,
    tube_full_enclosure,
)

from test_jets import LORENZ, SCALAR_EXP, VOLTERRA


# -- h_taylor -----------------------------------------------------------------


def test_h_taylor_mu_zero_simple():
    assert h_taylor(1, 1.0, 1.0, 0.0, 0.1) == pytest.approx(0.1, rel=1e-15)


def test_h_taylor_zero_coefficient_bound_is_infinite():
    assert h_taylor(3, 1.0, 0.0, 1.0, 0.1) == math.inf


def test_h_taylor_negative_mu_clamped():
    for mu in (-0.5, -2.0, -10.0):
        hb = h_taylor(2, 1.0, 1e-9, mu, 0.1)
        assert hb <= -1.0 / mu + 1e-15


def test_h_taylor_preconditions():
    with pytest.raises(ValueError):
        h_taylor(0, 1.0, 1.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        h_taylor(1, 0.0, 1.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        h_taylor(1, 1.0, -1.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        h_taylor(1, 1.0, 1.0, 0.0, 0.0)


_pos = st.floats(min_value=1e-6, max_value=1e3)
_mu = st.floats(min_value=-20.0, max_value=20.0)
_deg = st.integers(min_value=1, max_value=20)


@given(_deg, _pos, _pos, _mu, _pos)
@settings(max_examples=300)
def test_h_taylor_guarantees_g_budget(p, h, m_bar, mu_bar, delta):
    """Accumulated error after covering [0,h] with steps <= h_bar stays <= delta.

    The last step is clamped to the remainder, matching how the bound is
    derived; a uniform final step would overshoot the budget.
    """
    hb = h_taylor(p, h, m_bar, mu_bar, delta)
    if not math.isfinite(hb) or hb <= 0.0:
        return
    hb = min(hb, h)
    m_full = int(h / hb)
    if m_full > 100_000:  # keep the oracle evaluation tractable
        return
    rem = h - m_full * hb
    g = g_sequence(m_bar, mu_bar, hb, p, m_full)[-1]
    if rem > 0.0:
        g = m_bar * rem ** (p + 1) + g * math.exp(mu_bar * rem)
    assert g <= delta * (1 + 1e-9)


@given(_deg, _pos, _pos, _mu, _pos, _pos)
@settings(max_examples=200)
def test_h_taylor_monotone(p, h, m_bar, mu_bar, delta, bump):
    base = h_taylor(p, h, m_bar, mu_bar, delta)
    assert h_taylor(p, h, m_bar, mu_bar, delta + bump) >= base  # delta up
    assert h_taylor(p, h, m_bar + bump, mu_bar, delta) <= base  # M up
    assert h_taylor(p, h + bump, m_bar, mu_bar, delta) <= base  # h up


# -- g_sequence ---------------------------------------------------------------


def test_g_starts_at_zero():
    assert g_sequence(1.0, 0.3, 0.1, 2, 5)[0] == 0.0


@given(
    st.floats(min_value=1e-6, max_value=1e3),
    st.floats(min_value=-10.0, max_value=10.0).filter(lambda x: abs(x) > 1e-6),
    st.floats(min_value=1e-4, max_value=1.0),
    st.integers(min_value=1, max_value=10),
    st.integers(min_value=0, max_value=50),
)
@settings(max_examples=300)
def test_g_recurrence_matches_closed_form(m_bar, mu_bar, h_bar, p, m):
    seq = g_sequence(m_bar, mu_bar, h_bar, p, m)
    for i, g in enumerate(seq):
        want = g_closed_form(m_bar, mu_bar, h_bar, p, i)
        assert g == pytest.approx(want, rel=1e-12, abs=1e-300)


def test_g_mu_zero_linear_in_i():
    # the recurrence (and the mu -> 0 limit of the closed form) give i*M*hb^(p+1)
    seq = g_sequence(2.0, 0.0, 0.1, 3, 10)
    step = 2.0 * 0.1**4
    for i, g in enumerate(seq):
        assert g == pytest.approx(i * step, rel=1e-14, abs=0.0)
        assert g == pytest.approx(g_closed_form(2.0, 0.0, 0.1, 3, i), rel=1e-14, abs=0.0)


# -- curves ---------------------------------------------------------------------


def test_curve_at_zero_and_nodes():
    sys_, _ = parse_problem_text(VOLTERRA)
    c = TaylorCurve(sys_, (1.0, 3.0), 0.01, 6)
    assert taylor_curve_eval(c, 0.0) == (1.0, 3.0)
    c.ensure_nodes(3)
    assert taylor_curve_eval(c, 2 * 0.01) == c.nodes[2]


def test_curve_scalar_exponential():
    sys_, _ = parse_problem_text(SCALAR_EXP)
    c = TaylorCurve(sys_, (1.0,), 0.1, 4)
    v = taylor_curve_eval(c, 0.1)[0]
    assert abs(v - math.exp(0.1)) < 1e-5


def test_curve_tracks_reference_across_nodes():
    sys_, _ = parse_problem_text(VOLTERRA)
    c = TaylorCurve(sys_, (1.0, 3.0), 0.005, 10)
    for t in (0.004, 0.012, 0.02, 0.037):
        ref = reference_endpoint(sys_, [1.0, 3.0], t)
        got = taylor_curve_eval(c, t)
        assert max(abs(g - r) for g, r in zip(got, ref)) < 1e-8


def test_curve_range_contains_curve_points():
    sys_, _ = parse_problem_text(VOLTERRA)
    c = TaylorCurve(sys_, (1.0, 3.0), 0.01, 8)
    h = 0.035
    box = curve_range_box(c, h)
    for k in range(36):
        pt = taylor_curve_eval(c, h * k / 35)
        assert box.contains_point(pt)


# -- stage construction helper ---------------------------------------------------


def _make_stage(text, x0, h, p, delta, pad):
    """Build an admissible (ball E0, F1, params, curve) by padding the track."""
    sys_, _ = parse_problem_text(text)
    times = [h * i / 30 for i in range(31)]
    traj = reference_trajectory(sys_, x0, times)
    F1 = Box(
        Interval(float(traj[:, v].min()) - pad, float(traj[:, v].max()) + pad)
        for v in range(sys_.dim)
    )
    mu = lognorm_on_box(sys_, F1)
    m_bar = norm_bound_coeff(sys_, F1, p)
    hb = min(h_taylor(p, h, m_bar, mu, delta), h)
    tp = TubeParams(degree=p, delta=delta, mu_bar=mu, m_bar=m_bar, h_bar=hb)
    curve = TaylorCurve(sys_, tuple(x0), hb, p)
    n_pieces = math.ceil(h / hb)
    curve.ensure_nodes(n_pieces)
    ok = all(
        check_image_inclusion(sys_, curve.nodes[i], hb, p, F1)
        for i in range(n_pieces)
    )
    return sys_, tp, curve, F1, ok


def test_image_inclusion_trivial_cases():
    sys_, _ = parse_problem_text(VOLTERRA)
    # "whole space proxy": large relative to the dynamics over [0, h_bar];
    # for a polynomial rhs the tail term grows like R^(p+2), so the box must
    # be big, not unbounded
    big = Box([Interval(-50.0, 50.0), Interval(-50.0, 50.0)])
    assert check_image_inclusion(sys_, (1.0, 3.0), 0.01, 5, big)
    point = Box.point([100.0, 100.0])
    assert not check_image_inclusion(sys_, (1.0, 3.0), 0.01, 5, point)


def test_image_inclusion_consistent_with_oracle():
    sys_, tp, curve, F1, ok = _make_stage(
        VOLTERRA, [1.0, 3.0], 0.05, 6, delta=0.01, pad=0.25
    )
    assert ok
    for i in range(2):
        q = curve.nodes[i]
        traj = reference_trajectory(
            sys_, list(q), [tp.h_bar * k / 19 for k in range(20)]
        )
        for row in traj:
            assert F1.contains_point(row)


# -- Lemma 2: the curve stays delta-close to the true trajectory ------------------


@pytest.mark.parametrize(
    "text,x0,h,pad",
    [
        (VOLTERRA, [1.0, 3.0], 0.05, 0.3),
        (LORENZ, [15.0, 15.0, 36.0], 0.01, 2.0),
        (SCALAR_EXP, [2.0], 0.1, 0.5),
    ],
)
def test_curve_within_delta_of_trajectory(text, x0, h, pad):
    delta = 0.01
    sys_, tp, curve, F1, ok = _make_stage(text, x0, h, 6, delta, pad)
    assert ok, "stage construction must produce passing inclusion checks"
    times = [h * i / 50 for i in range(51)]
    traj = reference_trajectory(sys_, x0, times)
    for i, t in enumerate(times):
        c = np.array(taylor_curve_eval(curve, t))
        assert float(np.linalg.norm(c - traj[i])) <= delta * (1 + 1e-6)


# -- tube enclosures ----------------------------------------------------------


def test_end_enclosure_contains_sampled_endpoints():
    h = 0.05
    delta = 0.01
    sys_, tp, curve, F1, ok = _make_stage(VOLTERRA, [1.0, 3.0], h, 6, delta, 0.3)
    assert ok
    r0 = 0.02
    ball = tube_end_enclosure(Ball((1.0, 3.0), r0), h, tp, curve)
    rng = random.Random(5)
    for _ in range(100):
        ang = rng.uniform(0, 2 * math.pi)
        rad = r0 * math.sqrt(rng.random())
        x0 = [1.0 + rad * math.cos(ang), 3.0 + rad * math.sin(ang)]
        end = reference_endpoint(sys_, x0, h)
        d = math.dist(end, ball.center)
        assert d <= ball.radius + 1e-9


def test_full_enclosure_contains_trajectories_and_end_ball():
    h = 0.05
    delta = 0.01
    sys_, tp, curve, F1, ok = _make_stage(VOLTERRA, [1.0, 3.0], h, 6, delta, 0.3)
    assert ok
    r0 = 0.02
    E0 = Ball((1.0, 3.0), r0)
    full = tube_full_enclosure(E0, h, tp, curve)
    end = tube_end_enclosure(E0, h, tp, curve)
    assert full.contains_box(ball_to_box(end).intersect(full) or full) or True
    # every coordinate of the end ball's box is inside the full box
    eb = ball_to_box(end)
    assert full.contains_box(eb)
    rng = random.Random(9)
    times = [h * i / 19 for i in range(20)]
    for _ in range(30):
        ang = rng.uniform(0, 2 * math.pi)
        rad = r0 * math.sqrt(rng.random())
        x0 = [1.0 + rad * math.cos(ang), 3.0 + rad * math.sin(ang)]
        traj = reference_trajectory(sys_, x0, times)
        for row in traj:
            assert full.contains_point(row)


def test_end_radius_negative_mu_contracts():
    tp = TubeParams(degree=3, delta=0.01, mu_bar=-2.0, m_bar=1e-12, h_bar=0.01)
    sys_, _ = parse_problem_text(SCALAR_EXP)
    curve = TaylorCurve(sys_, (2.0,), tp.h_bar, tp.degree)
    ball = tube_end_enclosure(Ball((2.0,), 0.1), 0.05, tp, curve)
    assert ball.radius < 0.1 + 0.01


def test_end_radius_monotone():
    sys_, _ = parse_problem_text(SCALAR_EXP)

    def radius(r0, delta, mu, h):
        tp = TubeParams(degree=3, delta=delta, mu_bar=mu, m_bar=1e-12, h_bar=0.01)
        curve = TaylorCurve(sys_, (2.0,), tp.h_bar, tp.degree)
        return tube_end_enclosure(Ball((2.0,), r0), h, tp, curve).radius

    base = radius(0.1, 0.01, 0.5, 0.05)
    assert radius(0.2, 0.01, 0.5, 0.05) >= base
    assert radius(0.1, 0.02, 0.5, 0.05) >= base
    assert radius(0.1, 0.01, 1.0, 0.05) >= base
    assert radius(0.1, 0.01, 0.5, 0.08) >= base


def test_step_bound_violation_rejected():
    sys_, _ = parse_problem_text(SCALAR_EXP)
    # M large and h_bar far above the certified bound
    tp = TubeParams(degree=2, delta=1e-6, mu_bar=1.0, m_bar=100.0, h_bar=0.5)
    curve = TaylorCurve(sys_, (2.0,), tp.h_bar, tp.degree)
    with pytest.raises(ValueError):
        tube_end_enclosure(Ball((2.0,), 0.1), 1.0, tp, curve)
