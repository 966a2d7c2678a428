"""Epsilon-covers of reachable end sets by adaptive initial-box subdivision.

`end_cover` drives the whole solver: it keeps a depth-first queue of
scaffolds, extends each one to the horizon, refines it toward the target
width, and splits its initial box whenever refinement reports that the
target is out of reach.  The finished end boxes form a cover of the exact
end set; `verify_cover` spot-checks that containment against a
high-precision (non-validated) reference integrator, and the CSV helpers
give the cover a stable on-disk form.
"""

from __future__ import annotations

import csv
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import ResourceLimit, StepFailure
from .expr import OdeSystem
from .intervals import Box
from .reference import reference_endpoint
from .scaffold import (
    Scaffold,
    SolverConfig,
    Stats,
    extend_to,
    new_scaffold,
    refine,
    split,
)

__all__ = [
    "Cover",
    "CoverageReport",
    "end_cover",
    "verify_cover",
    "write_cover_csv",
    "read_cover_csv",
]


@dataclass
class Cover:
    """A finite set of boxes whose union contains the reachable end set."""

    boxes: list[Box]
    epsilon: float
    horizon: float
    scaffolds: int  # scaffolds processed, counting split parents
    stats: Stats = field(default_factory=Stats)
    wall_seconds: float = 0.0

    @property
    def size(self) -> int:
        return len(self.boxes)

    def contains_point(self, xs: Sequence[float]) -> bool:
        return any(box.contains_point(xs) for box in self.boxes)


def _fmt_box(b: Box) -> str:
    return ";".join(f"{iv.lo:.17g},{iv.hi:.17g}" for iv in b)


def _check_splittable(s: Scaffold, children: list[Scaffold]) -> None:
    # Halving a box at ulp scale can reproduce the parent verbatim, which
    # would cycle forever; that only happens when the initial set is
    # already degenerate, so give up with a clear message instead.
    if any(child.e0 == s.e0 for child in children):
        raise ResourceLimit(
            "initial box too narrow to subdivide further at "
            f"{_fmt_box(s.e0)}; the target width cannot be met"
        )


def _process(
    s: Scaffold, horizon: float, epsilon: float
) -> tuple[Box | None, list[Scaffold]]:
    """Advance one scaffold: returns (finished box, []) or (None, children)."""
    try:
        extend_to(s, horizon)
        request = refine(s, epsilon)
    except StepFailure as exc:
        raise StepFailure(
            f"{exc} (scaffold at t={s.t:.9g}, initial box {_fmt_box(s.e0)})"
        ) from exc
    if request is None:
        return s.e_m, []
    children = split(s)
    _check_splittable(s, children)
    return None, children


def _drain_serial(
    root: Scaffold, horizon: float, epsilon: float
) -> tuple[list[Box], Stats, int]:
    cfg = root.config
    boxes: list[Box] = []
    totals = Stats()
    queue = [root]
    processed = 0
    while queue:
        s = queue.pop()
        processed += 1
        if processed > cfg.max_scaffolds:
            raise ResourceLimit(
                f"more than {cfg.max_scaffolds} scaffolds processed"
            )
        finished, children = _process(s, horizon, epsilon)
        totals.merge(s.stats)
        if finished is not None:
            boxes.append(finished)
        else:
            queue.extend(children)
    return boxes, totals, processed


def _drain_threaded(
    root: Scaffold, horizon: float, epsilon: float, workers: int
) -> tuple[list[Box], Stats, int]:
    """Same contract as the serial drain, with a shared LIFO work pool.

    Each scaffold is owned by exactly one worker while it is being
    processed; the finished-box list is an append-only sink guarded by the
    pool lock, so box order (but nothing else) depends on scheduling.
    """
    cfg = root.config
    boxes: list[Box] = []
    totals = Stats()
    queue = [root]
    cond = threading.Condition()
    state = {"active": 0, "processed": 0, "error": None}

    def loop() -> None:
        while True:
            with cond:
                while not queue and state["active"] > 0 and not state["error"]:
                    cond.wait()
                if state["error"] or (not queue and state["active"] == 0):
                    cond.notify_all()
                    return
                s = queue.pop()
                state["active"] += 1
                state["processed"] += 1
                if state["processed"] > cfg.max_scaffolds:
                    state["error"] = ResourceLimit(
                        f"more than {cfg.max_scaffolds} scaffolds processed"
                    )
                    state["active"] -= 1
                    cond.notify_all()
                    return
            try:
                finished, children = _process(s, horizon, epsilon)
            except Exception as exc:  # propagate to the caller
                with cond:
                    if state["error"] is None:
                        state["error"] = exc
                    state["active"] -= 1
                    cond.notify_all()
                return
            with cond:
                totals.merge(s.stats)
                if finished is not None:
                    boxes.append(finished)
                else:
                    queue.extend(children)
                state["active"] -= 1
                cond.notify_all()

    threads = [threading.Thread(target=loop) for _ in range(workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if state["error"] is not None:
        raise state["error"]
    return boxes, totals, state["processed"]


def end_cover(
    system: OdeSystem,
    b0: Box,
    horizon: float,
    epsilon: float,
    config: SolverConfig | None = None,
    workers: int = 1,
) -> Cover:
    """Cover the end set reachable from ``b0`` at time ``horizon``.

    The queue starts with a single stage-free scaffold on ``b0`` and is
    drained depth-first: pop, extend to the horizon, refine toward
    ``epsilon``; a successful refinement contributes its end box, a split
    request replaces the scaffold by its half-box children.  The union of
    live initial boxes plus the finished boxes' origins tiles ``b0`` at
    every instant, so no trajectory is ever dropped.
    """
    if len(b0) != system.dim:
        raise ValueError("initial box dimension does not match the system")
    if not horizon > 0.0:
        raise ValueError("horizon must be positive")
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    cfg = config if config is not None else SolverConfig()
    start = time.perf_counter()
    root = new_scaffold(system, b0, cfg)
    if workers <= 1:
        boxes, totals, processed = _drain_serial(root, horizon, epsilon)
    else:
        boxes, totals, processed = _drain_threaded(
            root, horizon, epsilon, workers
        )
    wall = time.perf_counter() - start
    return Cover(
        boxes=boxes,
        epsilon=epsilon,
        horizon=horizon,
        scaffolds=processed,
        stats=totals,
        wall_seconds=wall,
    )


# ---------------------------------------------------------------------------
# empirical verification


@dataclass(frozen=True)
class CoverageReport:
    """Sampling check of a cover against a high-precision reference solver."""

    samples: int
    contained: int
    escape_distance: float  # worst distance from an uncovered endpoint to the cover
    max_center_gap: float  # worst distance from a box center to its nearest endpoint

    @property
    def fraction(self) -> float:
        return self.contained / self.samples if self.samples else 1.0


def _distance_to_box(point: np.ndarray, box: Box) -> float:
    gaps = [
        max(iv.lo - x, x - iv.hi, 0.0) for iv, x in zip(box, point)
    ]
    return float(np.hypot.reduce(gaps))


def verify_cover(
    system: OdeSystem,
    b0: Box,
    horizon: float,
    cover: Cover,
    samples: int = 1000,
    seed: int = 0,
) -> CoverageReport:
    """Integrate random initial points and test membership in the cover.

    Containment of every sampled endpoint is necessary for soundness (the
    reference integrator is accurate to ~1e-12, far below any practical
    epsilon), so a fraction below 1.0 indicates a real bug.  The center-gap
    statistic is a diagnostic for over-approximation: a box center far from
    every sampled endpoint suggests the cover is much larger than the end
    set.
    """
    rng = np.random.default_rng(seed)
    lows = np.array([iv.lo for iv in b0])
    highs = np.array([iv.hi for iv in b0])
    points = rng.uniform(lows, highs, size=(samples, len(b0)))
    endpoints = np.array(
        [reference_endpoint(system, tuple(p), horizon) for p in points]
    )
    contained = 0
    escape = 0.0
    for ep in endpoints:
        if cover.contains_point(ep):
            contained += 1
        else:
            escape = max(
                escape, min(_distance_to_box(ep, box) for box in cover.boxes)
            )
    max_gap = 0.0
    for box in cover.boxes:
        center = np.array(box.mid())
        gap = float(np.min(np.linalg.norm(endpoints - center, axis=1)))
        max_gap = max(max_gap, gap)
    return CoverageReport(
        samples=samples,
        contained=contained,
        escape_distance=escape,
        max_center_gap=max_gap,
    )


# ---------------------------------------------------------------------------
# CSV persistence


def _cover_header(dim: int) -> list[str]:
    cols = ["box_index"]
    for i in range(1, dim + 1):
        cols.extend([f"lo_{i}", f"hi_{i}"])
    return cols


def write_cover_csv(cover: Cover, fh: TextIO) -> None:
    """One row per box, then the run statistics as '# key value' comments."""
    dim = len(cover.boxes[0]) if cover.boxes else 0
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(_cover_header(dim))
    for idx, box in enumerate(cover.boxes):
        row: list[object] = [idx]
        for iv in box:
            row.extend([repr(iv.lo), repr(iv.hi)])
        writer.writerow(row)
    footer = {
        "boxes": cover.size,
        "epsilon": repr(cover.epsilon),
        "horizon": repr(cover.horizon),
        "scaffolds": cover.scaffolds,
        **cover.stats.as_dict(),
        "wall_seconds": f"{cover.wall_seconds:.3f}",
    }
    for key, value in footer.items():
        fh.write(f"# {key} {value}\n")


def read_cover_csv(lines: Iterable[str]) -> tuple[list[Box], dict[str, str]]:
    """Parse a cover CSV back into boxes plus the footer key-value block."""
    from .intervals import Interval

    boxes: list[Box] = []
    footer: dict[str, str] = {}
    rows = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line.lstrip("# ").partition(" ")
            footer[key] = value
        else:
            rows.append(line)
    for row in csv.reader(rows[1:]):  # skip the header row
        values = [float(v) for v in row[1:]]
        boxes.append(
            Box(
                Interval(values[2 * i], values[2 * i + 1])
                for i in range(len(values) // 2)
            )
        )
    return boxes, footer
