"""Scaffold data structure: staged enclosures with refinable mini-steps.

A scaffold stores, for an initial box E0 and a time grid 0 = t_0 < ... <
t_m, one quad per stage plus a mini-scaffold that subdivides the stage
into 2^level uniform mini-steps.  extend() appends stages until the
horizon; refine() runs phases of per-stage refinement until the end box
is narrow enough or a SplitRequest says the initial box itself must be
bisected.

Stage refinement dispatches per mini-step size: Taylor-tube tightening
when the mini-step is below the certified bound, plain order-k
re-stepping at doubled resolution (bisect) otherwise.  All refinements
intersect with the previous boxes, so enclosures only ever shrink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import InternalSoundnessViolation, ResourceLimit, StepFailure
from .expr import OdeSystem
from .intervals import Box, Interval, box_to_ball, norm2_up, split_box
from .jets import eval_series, norm_bound_coeff, taylor_coeffs
from .lognorm import lognorm_on_box
from .rounding import (
    add_up,
    exp_up,
    mul_up,
    pow_up,
    sqrt_up,
    sub_down,
    sub_up,
)
from .stepper import direct_eval, e1_combined, prepare_direct, step_a
from .tube import TaylorCurve, check_image_inclusion, h_taylor

__all__ = [
    "SolverConfig",
    "Stats",
    "Stage",
    "Scaffold",
    "SplitRequest",
    "new_scaffold",
    "extend",
    "refine_stage",
    "bisect_stage",
    "taylor_tube_stage",
    "refine",
    "split",
    "dump",
]

DELTA_FLOOR = 2.0**-40


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by scaffold refinement and the cover algorithm."""

    degree: int = 19  # tube polynomial degree p
    order: int = 20  # one-step method order k
    delta_frac: float = 0.1  # tube radius as a fraction of end-box width
    use_tube: bool = True
    use_bisect: bool = True
    lognorm_method: str = "eig"
    growth_step: float = 0.008  # max slice length for the log-norm quadrature
    max_phases: int = 64  # refinement phases per refine() call
    stall_ratio: float = 0.98  # progress threshold between phases
    max_level: int = 16  # mini-step subdivision cap
    max_stages: int = 4096
    max_scaffolds: int = 1 << 20


@dataclass
class Stats:
    """Operation counters; stepb counts prepare_direct-grade jet runs."""

    stepb_calls: int = 0
    tube_calls: int = 0
    bisect_calls: int = 0
    degradations: int = 0
    phases: int = 0
    splits: int = 0
    extends: int = 0

    def merge(self, other: "Stats") -> None:
        self.stepb_calls += other.stepb_calls
        self.tube_calls += other.tube_calls
        self.bisect_calls += other.bisect_calls
        self.degradations += other.degradations
        self.phases += other.phases
        self.splits += other.splits
        self.extends += other.extends

    def as_dict(self) -> dict[str, int]:
        return {
            "stepb_calls": self.stepb_calls,
            "tube_calls": self.tube_calls,
            "bisect_calls": self.bisect_calls,
            "degradations": self.degradations,
            "phases": self.phases,
            "splits": self.splits,
            "extends": self.extends,
        }


@dataclass
class Stage:
    """One time step [t0, t1] subdivided into 2^level uniform mini-steps.

    e_vec[j] encloses states at t0 + j*h_hat (e_vec[0] is the previous
    stage's end box), f_vec[j] encloses all states during mini-step j.
    mu_bar / m_bar / delta / h_tay are the stage's tube parameters,
    recomputed from the current f_vec after every refinement.
    """

    t0: float
    t1: float
    level: int
    e_vec: list[Box]
    f_vec: list[Box]
    mu_bar: float
    m_bar: float
    delta: float
    h_tay: float
    growth: float = 0.0  # integral bound on the log-norm over [t0, t1]
    ball_center: tuple[float, ...] | None = None  # certified end ball, if any
    ball_radius: float = math.inf

    @property
    def h(self) -> float:
        return self.t1 - self.t0

    @property
    def h_hat(self) -> float:
        return (self.t1 - self.t0) / (1 << self.level)

    @property
    def e_end(self) -> Box:
        return self.e_vec[-1]

    def f_hull(self) -> Box:
        hull = self.f_vec[0]
        for f in self.f_vec[1:]:
            hull = hull.hull(f)
        return hull

    def copy(self) -> "Stage":
        return replace(self, e_vec=list(self.e_vec), f_vec=list(self.f_vec))


@dataclass(frozen=True)
class SplitRequest:
    """Refinement cannot reach the target width; bisect the initial box."""

    reason: str
    growth_sum: float  # sum of mu_bar_i * h_i over the stages
    threshold: float  # growth_sum above this forces the split


@dataclass
class Scaffold:
    system: OdeSystem
    e0: Box
    config: SolverConfig
    stages: list[Stage] = field(default_factory=list)
    stats: Stats = field(default_factory=Stats)

    @property
    def m(self) -> int:
        return len(self.stages)

    @property
    def t(self) -> float:
        return self.stages[-1].t1 if self.stages else 0.0

    @property
    def e_m(self) -> Box:
        return self.stages[-1].e_end if self.stages else self.e0


def new_scaffold(system: OdeSystem, e0: Box, config: SolverConfig) -> Scaffold:
    return Scaffold(system=system, e0=e0, config=config)


# ---------------------------------------------------------------------------
# stage parameter maintenance


def _tube_delta(cfg: SolverConfig, e_end: Box) -> float:
    return max(cfg.delta_frac * e_end.width_max(), DELTA_FLOOR)


def _recompute_params(s: Scaffold, st: Stage) -> None:
    cfg = s.config
    hull = st.f_hull()
    st.mu_bar = lognorm_on_box(s.system, hull, method=cfg.lognorm_method)
    st.m_bar = norm_bound_coeff(s.system, hull, cfg.degree)
    st.delta = _tube_delta(cfg, st.e_end)
    st.h_tay = h_taylor(cfg.degree, st.h, st.m_bar, st.mu_bar, st.delta)


def _coarse_growth(s: Scaffold, st: Stage) -> float:
    """Upper sum of the log-norm over the stage from its mini full boxes."""
    h_hat = st.h_hat
    total = 0.0
    for f in st.f_vec:
        mu = lognorm_on_box(s.system, f, method=s.config.lognorm_method)
        total = add_up(total, mul_up(mu, h_hat))
    return total


def _intersect_or_raise(a: Box, b: Box, what: str) -> Box:
    out = a.intersect(b)
    if out is None:
        raise InternalSoundnessViolation(f"{what}: enclosures disjoint")
    return out


# ---------------------------------------------------------------------------
# extend


def extend(s: Scaffold, horizon: float) -> None:
    """Append one stage, stepping from the current end toward the horizon."""
    if s.t >= horizon:
        raise ValueError("scaffold already reaches the horizon")
    if s.m >= s.config.max_stages:
        raise ResourceLimit(f"more than {s.config.max_stages} stages")
    cfg = s.config
    e_prev = s.e_m
    t0 = s.t
    request = horizon - t0
    h, f_apriori = step_a(s.system, e_prev, request)
    if h == request:
        t1 = horizon
    else:
        # keep the float grid inside the certified window: t1 - t0 <= h
        t1 = t0 + h
        while t1 - t0 > h:
            t1 = math.nextafter(t1, t0)
    d = t1 - t0
    if d <= 0.0:
        raise StepFailure(f"time step below float resolution at t={t0:.9g}")
    parts = prepare_direct(s.system, e_prev, f_apriori, cfg.order)
    s.stats.stepb_calls += 1
    f1 = _intersect_or_raise(
        direct_eval(parts, Interval(0.0, d)), f_apriori, "extend full"
    )
    e1 = _intersect_or_raise(direct_eval(parts, d), f1, "extend end")
    st = Stage(
        t0=t0, t1=t1, level=0, e_vec=[e_prev, e1], f_vec=[f1],
        mu_bar=0.0, m_bar=0.0, delta=1.0, h_tay=0.0,
    )
    _recompute_params(s, st)
    st.growth = mul_up(st.mu_bar, d)
    s.stages.append(st)
    s.stats.extends += 1


def extend_to(s: Scaffold, horizon: float) -> None:
    """Extend until the scaffold reaches the horizon exactly."""
    while s.t < horizon:
        extend(s, horizon)


# ---------------------------------------------------------------------------
# per-stage refinement


def _chain_into_next(s: Scaffold, i: int) -> None:
    """Propagate stage i's refined end box into stage i+1's start slot."""
    if i < s.m:
        nxt = s.stages[i]  # stage i+1, zero-based
        cur = s.stages[i - 1]
        nxt.e_vec[0] = _intersect_or_raise(
            nxt.e_vec[0], cur.e_end, "stage chaining"
        )


def _dist_up(a: tuple[float, ...], b: tuple[float, ...]) -> float:
    """Euclidean distance between two points, rounded up."""
    total = 0.0
    for x, y in zip(a, b):
        d = abs(x - y)
        total = add_up(total, mul_up(d, d))
    return sqrt_up(total)


def _reseeded_radius(node: tuple[float, ...], box: Box) -> float:
    """Radius around `node` covering `box` (ball re-seed after a failed check)."""
    b = box_to_ball(box)
    return add_up(b.radius, _dist_up(b.center, node))


def taylor_tube_stage(s: Scaffold, i: int) -> None:
    """Tighten stage i's mini-quads with the Taylor-tube ball channel.

    One polynomial curve is rooted at the tightest certified center for
    the stage's start states -- the previous stage's ball center when that
    ball is smaller than the start box's own ball, the box midpoint
    otherwise.  Around its nodes a ball carries Lemma-1 growth plus the
    per-step curve deviation across the mini-steps, so the radius never
    pays a box/ball conversion between stages.

    Certified mini-steps are cut into time slices no longer than
    `growth_step`.  Each slice box = (curve range over the slice, fattened
    by the reach radius)
    intersected with the old full box contains both the true states and the
    curve-rooted exact solution during the slice, so its log-norm drives
    the radius recurrence and an upper sum for the stage growth.  Every
    mini end/full box is the intersection of the order-k step result, the
    ball/slice boxes, and the old box.
    """
    st = s.stages[i - 1]
    cfg = s.config
    k, p = cfg.order, cfg.degree
    n_mini = 1 << st.level
    h_hat = st.h_hat
    ball_live = cfg.use_tube

    seed = box_to_ball(st.e_vec[0])
    q0, radius = seed.center, seed.radius
    if ball_live and i >= 2:
        prev = s.stages[i - 2]
        if prev.ball_center is not None and prev.ball_radius < radius:
            q0, radius = prev.ball_center, prev.ball_radius
    curve = TaylorCurve(s.system, q0, h_hat, p)

    growth_total = 0.0
    new_e: list[Box] = [st.e_vec[0]]
    new_f: list[Box] = []
    e_prev = st.e_vec[0]
    for j in range(1, n_mini + 1):
        f_old = st.f_vec[j - 1]
        e_old = st.e_vec[j]
        tail = taylor_coeffs(s.system, f_old, p + 1)[p + 1]
        m_bar_j = norm2_up([iv.mag() for iv in tail])

        certified = False
        r_reach = math.inf
        if ball_live:
            bound = h_taylor(p, h_hat, m_bar_j, st.mu_bar, st.delta)
            if h_hat <= bound:
                curve.ensure_nodes(j)
                certified = check_image_inclusion(
                    s.system, curve.nodes[j - 1], h_hat, p, f_old, tail=tail
                )
            if not certified:
                s.stats.degradations += 1
        local_err = mul_up(m_bar_j, pow_up(h_hat, p + 1))
        if certified:
            # reach radius: a-priori bound on |true state - curve| anywhere
            # in the mini-step, from the stage-level log-norm
            stretch = exp_up(mul_up(max(st.mu_bar, 0.0), h_hat))
            r_reach = add_up(mul_up(radius, stretch), local_err)

        # the order-k direct step only sharpens boxes the ball cannot
        # already dominate; skip its jet run when the ball is far tighter
        if 2.0 * r_reach > 0.25 * min(e_old.widths()):
            parts = prepare_direct(s.system, e_prev, f_old, k)
            s.stats.stepb_calls += 1
            if certified and p == k - 1:
                mini_curve = TaylorCurve(s.system, e_prev.mid(), h_hat, p)
                e_new = e1_combined(
                    s.system, e_prev, h_hat, f_old, k, p, st.delta,
                    st.mu_bar, m_bar_j, mini_curve, parts=parts,
                )
                f_new = e1_combined(
                    s.system, e_prev, Interval(0.0, h_hat), f_old, k, p,
                    st.delta, st.mu_bar, m_bar_j, mini_curve, parts=parts,
                )
            else:
                e_new = direct_eval(parts, h_hat)
                f_new = direct_eval(parts, Interval(0.0, h_hat))
            e_new = _intersect_or_raise(e_new, e_old, "tube end")
            f_new = _intersect_or_raise(f_new, f_old, "tube full")
        else:
            e_new, f_new = e_old, f_old

        if certified:
            coeffs = curve.coeffs_at(j - 1)
            slices = max(1, min(64, math.ceil(h_hat / cfg.growth_step)))
            cuts = [h_hat * q / slices for q in range(slices)] + [h_hat]
            hull: Box | None = None
            for a, b in zip(cuts, cuts[1:]):
                piece = eval_series(coeffs, Interval(a, b))
                slice_box = Box(
                    Interval(sub_down(iv.lo, r_reach), add_up(iv.hi, r_reach))
                    for iv in piece
                )
                slice_box = _intersect_or_raise(slice_box, f_old,
                                                "tube slice")
                mu_s = lognorm_on_box(s.system, slice_box,
                                      method=cfg.lognorm_method)
                dt = sub_up(b, a) if mu_s > 0.0 else sub_down(b, a)
                g_s = mul_up(mu_s, dt)
                growth_total = add_up(growth_total, g_s)
                radius = mul_up(radius, exp_up(g_s))
                hull = slice_box if hull is None else hull.hull(slice_box)
            r_next = add_up(radius, local_err)
            node = curve.nodes[j]
            ball_box = Box(
                Interval(sub_down(c, r_next), add_up(c, r_next))
                for c in node
            )
            e_new = _intersect_or_raise(e_new, ball_box, "tube ball end")
            assert hull is not None
            f_new = _intersect_or_raise(f_new, hull, "tube ball full")
            radius = r_next
            s.stats.tube_calls += 1
        else:
            mu_c = lognorm_on_box(s.system, f_new,
                                  method=cfg.lognorm_method)
            growth_total = add_up(growth_total, mul_up(mu_c, h_hat))
            if ball_live:
                # the channel lost certification for this mini-step:
                # re-anchor the ball on the refined end box so later steps
                # can use it
                curve.ensure_nodes(j)
                radius = _reseeded_radius(curve.nodes[j], e_new)

        new_e.append(e_new)
        new_f.append(f_new)
        e_prev = e_new

    st.e_vec = new_e
    st.f_vec = new_f
    if ball_live:
        st.ball_center = curve.nodes[n_mini]
        st.ball_radius = radius
    else:
        st.ball_center = None
        st.ball_radius = math.inf
    _recompute_params(s, st)
    st.growth = growth_total
    _chain_into_next(s, i)


def bisect_stage(s: Scaffold, i: int) -> None:
    """Halve stage i's mini-step, re-stepping each half at order k."""
    st = s.stages[i - 1]
    cfg = s.config
    if st.level + 1 > cfg.max_level:
        raise ResourceLimit(
            f"stage {i} would exceed mini-step level {cfg.max_level}"
        )
    k = cfg.order
    half = st.h_hat / 2.0
    new_e: list[Box] = [st.e_vec[0]]
    new_f: list[Box] = []
    e_prev = st.e_vec[0]
    for j in range(1, (1 << st.level) + 1):
        f_old = st.f_vec[j - 1]
        e_old = st.e_vec[j]
        for second_half in (False, True):
            f_apriori = f_old
            try:
                h_got, f_fresh = step_a(s.system, e_prev, half)
                if h_got == half:
                    cut = f_fresh.intersect(f_old)
                    if cut is not None:
                        f_apriori = cut
            except StepFailure:
                pass  # the old full box still covers the half-step
            parts = prepare_direct(s.system, e_prev, f_apriori, k)
            s.stats.stepb_calls += 1
            s.stats.bisect_calls += 1
            f_new = _intersect_or_raise(
                direct_eval(parts, Interval(0.0, half)), f_apriori,
                "bisect full",
            )
            e_new = direct_eval(parts, half)
            e_new = _intersect_or_raise(e_new, f_new, "bisect end in full")
            if second_half:
                e_new = _intersect_or_raise(e_new, e_old, "bisect end")
            new_f.append(f_new)
            new_e.append(e_new)
            e_prev = e_new
    st.level += 1
    st.e_vec = new_e
    st.f_vec = new_f
    st.ball_center = None
    st.ball_radius = math.inf
    _recompute_params(s, st)
    st.growth = _coarse_growth(s, st)
    _chain_into_next(s, i)


def refine_stage(s: Scaffold, i: int) -> None:
    """Refine stage i in place: tube when certified, bisect otherwise.

    With bisection disabled, stages whose mini-step exceeds the certified
    bound still get an order-k intersection pass (the tube tightening
    simply stays off for uncertified mini-steps).
    """
    if not 1 <= i <= s.m:
        raise ValueError(f"stage index {i} out of range 1..{s.m}")
    st = s.stages[i - 1]
    cfg = s.config
    if cfg.use_bisect and (not cfg.use_tube or st.h_hat > st.h_tay):
        bisect_stage(s, i)
    else:
        taylor_tube_stage(s, i)


# ---------------------------------------------------------------------------
# the refine loop and splitting


def _growth_sum(s: Scaffold) -> float:
    total = 0.0
    for st in s.stages:
        total = add_up(total, st.growth)
    return total


def _split_fires(s: Scaffold, eps: float) -> tuple[bool, float, float]:
    """diam(E0) * e^(sum mu_i h_i) > eps/2, in log form to avoid overflow."""
    diam = 2.0 * box_to_ball(s.e0).radius
    if diam <= 0.0:
        return False, _growth_sum(s), math.inf
    growth = _growth_sum(s)
    threshold = math.log(0.5 * eps / diam)
    return growth > threshold, growth, threshold


def refine(s: Scaffold, eps: float) -> SplitRequest | None:
    """Run refinement phases until width_max(E_m) <= eps or a split is due.

    Returns None on success (scaffold refined in place) or a SplitRequest
    when the initial box must be bisected.  The split criterion is
    diam(E0) * e^(sum_i mu_bar_i h_i) > eps/2: by the growth lemma the
    points of E0 can spread to eps/2 apart regardless of how tightly the
    stages are refined, so only shrinking E0 helps.

    Ordering rules that keep the criterion meaningful:
    - a box wider than eps/2 splits outright (no log-norm involved);
    - otherwise a split is only requested with log-norms freshened by a
      refinement phase in this call (inherited stage data may carry loose
      bounds, which can only overstate the growth sum);
    - the criterion outranks plain width success, so a scaffold whose end
      box happens to fit eps still splits when the growth bound says the
      true reachable set cannot be covered at eps/2 granularity.
    """
    if eps <= 0.0:
        raise ValueError("target width must be positive")
    diam = 2.0 * box_to_ball(s.e0).radius
    if diam > 0.5 * eps:
        return SplitRequest("initial box wider than eps/2", 0.0, 0.0)
    fires, growth, threshold = _split_fires(s, eps)
    if not fires and s.e_m.width_max() <= eps:
        return None  # satisfied, nothing recomputed
    prev_width = s.e_m.width_max()
    for _ in range(s.config.max_phases):
        for i in range(1, s.m + 1):
            refine_stage(s, i)
        s.stats.phases += 1
        fires, growth, threshold = _split_fires(s, eps)
        if fires:
            return SplitRequest("growth bound exceeds eps/2", growth,
                                threshold)
        width = s.e_m.width_max()
        if width <= eps:
            return None
        if width >= s.config.stall_ratio * prev_width:
            return SplitRequest("refinement stalled", growth, threshold)
        prev_width = width
    fires, growth, threshold = _split_fires(s, eps)
    return SplitRequest("phase budget exhausted", growth, threshold)


def split(s: Scaffold) -> list[Scaffold]:
    """2^n children, one per half-box of E0, inheriting all stages."""
    children = []
    for sub in split_box(s.e0):
        child = Scaffold(system=s.system, e0=sub, config=s.config,
                         stages=[st.copy() for st in s.stages])
        if child.stages:
            first = child.stages[0]
            cut = first.e_vec[0].intersect(sub)
            first.e_vec[0] = cut if cut is not None else sub
        children.append(child)
    s.stats.splits += 1
    return children


# ---------------------------------------------------------------------------
# debugging


def _fmt_box(b: Box) -> str:
    return ";".join(f"{iv.lo:.17g},{iv.hi:.17g}" for iv in b)


def dump(s: Scaffold) -> str:
    """Line-oriented scaffold state for inspection and golden tests."""
    lines = [f"scaffold m={s.m} t={s.t:.17g} e0={_fmt_box(s.e0)}"]
    for idx, st in enumerate(s.stages, start=1):
        lines.append(
            f"stage {idx} t={st.t1:.17g} level={st.level} "
            f"mu={st.mu_bar:.6g} h_taylor={st.h_tay:.6g} "
            f"E={_fmt_box(st.e_end)} F={_fmt_box(st.f_hull())}"
        )
    return "\n".join(lines) + "\n"
