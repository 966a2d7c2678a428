"""Command-line front end: solve problems, reproduce the benchmark tables.

Three entry modes share one flag set:

* default — cover a problem's end set once and verify it by sampling;
* ``--experiment sigma`` — compare the direct full-enclosure against the
  tube-tightened one over a (delta, order) grid, one CSV row each;
* ``--experiment cover`` — run the end-cover algorithm over a grid of
  Taylor degrees and emit size/step-count rows.

Exit codes: 0 success, 1 solver failure (StepFailure / ResourceLimit or a
failed sampling verification), 2 usage errors.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence, TextIO

from .endcover import end_cover, verify_cover, write_cover_csv
from .errors import ResourceLimit, StepFailure
from .expr import OdeSystem, parse_problem_file
from .intervals import Box, Interval
from .jets import norm_bound_coeff
from .lognorm import lognorm_on_box
from .problems import (
    BUILTIN_NAMES,
    COVER_BENCHMARKS,
    SIGMA_BENCHMARKS,
    builtin_problem,
)
from .scaffold import SolverConfig
from .stepper import direct_eval, e1_combined, prepare_direct, step_a
from .tube import TaylorCurve, check_image_inclusion, h_taylor

__all__ = [
    "main",
    "load_problem",
    "sigma_row",
    "run_sigma_experiment",
    "run_cover_experiment",
    "SIGMA_DELTAS",
    "SIGMA_ORDERS",
    "COVER_DEGREES",
]

SIGMA_DELTAS = (0.1, 0.01, 0.001)
SIGMA_ORDERS = (1, 3, 7, 20)
COVER_DEGREES = (1, 3, 5, 7, 19)


def load_problem(spec: str) -> tuple[OdeSystem, Box]:
    """Resolve a problem name or file path to (system, initial box)."""
    if spec in BUILTIN_NAMES:
        return builtin_problem(spec)
    path = Path(spec)
    if path.is_file():
        return parse_problem_file(path)
    known = ", ".join(BUILTIN_NAMES)
    raise KeyError(f"unknown problem {spec!r}; built-ins: {known}")


# ---------------------------------------------------------------------------
# sigma experiment: direct vs tube-tightened full enclosures


@dataclass(frozen=True)
class SigmaRow:
    problem: str
    delta: float
    order: int
    h_bar: float
    mu_bar: float
    m_bar: float
    sigma: float


def sigma_row(
    system: OdeSystem,
    e0: Box,
    horizon: float,
    f1: Box,
    delta: float,
    order: int,
    lognorm_method: str = "eig",
) -> SigmaRow:
    """One grid cell: h_bar, the two full enclosures and their volume ratio.

    The tube degree is order - 1 (the term-wise tightening case), except
    that order 1 is run at degree 1 since the step-size bound needs a
    degree of at least one.
    """
    k = order
    p = max(1, k - 1)
    mu = lognorm_on_box(system, f1, lognorm_method)
    parts = prepare_direct(system, e0, f1, k)
    m_bar = parts.m_bar() if p == k - 1 else norm_bound_coeff(system, f1, p)
    h_bar = min(horizon, h_taylor(p, horizon, m_bar, mu, delta))
    span = Interval(0.0, h_bar)
    d_full = direct_eval(parts, span)
    sigma = 1.0
    curve = TaylorCurve(system, e0.mid(), h_bar, p)
    if check_image_inclusion(system, curve.q0, h_bar, p, f1):
        e1_full = e1_combined(
            system, e0, span, f1, k, p, delta, mu, m_bar, curve, parts
        )
        vol_e1 = e1_full.volume()
        if vol_e1 > 0.0:
            sigma = d_full.volume() / vol_e1
    return SigmaRow(system.name, delta, k, h_bar, mu, m_bar, sigma)


def run_sigma_experiment(
    system: OdeSystem,
    e0: Box,
    horizon: float,
    out: TextIO,
    fixed_f1: Box | None = None,
    deltas: Sequence[float] = SIGMA_DELTAS,
    orders: Sequence[int] = SIGMA_ORDERS,
    lognorm_method: str = "eig",
) -> list[SigmaRow]:
    """Emit the (delta, order) grid as CSV, sorted delta desc / order asc.

    Without ``fixed_f1`` the a-priori enclosure comes from the first-order
    step; the achieved step then replaces the horizon so every bound is
    evaluated on inputs it is valid for.
    """
    if fixed_f1 is not None:
        h_eff, f1 = horizon, fixed_f1
    else:
        h_eff, f1 = step_a(system, e0, horizon)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["problem", "delta", "order", "h_bar", "mu_bar", "m_bar", "sigma"]
    )
    rows = []
    for delta in sorted(deltas, reverse=True):
        for order in sorted(orders):
            row = sigma_row(
                system, e0, h_eff, f1, delta, order, lognorm_method
            )
            rows.append(row)
            writer.writerow(
                [
                    row.problem,
                    repr(row.delta),
                    row.order,
                    repr(row.h_bar),
                    repr(row.mu_bar),
                    repr(row.m_bar),
                    repr(row.sigma),
                ]
            )
    # the order-1 rows cannot use the paper-layout degree p = order - 1 = 0
    # (the step bound needs p >= 1), so both readings are recorded here
    out.write("# order_1_note degree p=1 used; p=order-1 would be 0\n")
    return rows


# ---------------------------------------------------------------------------
# cover experiment: end-cover sizes and step counts over a degree grid


def run_cover_experiment(
    system: OdeSystem,
    e0: Box,
    horizon: float,
    epsilon: float,
    out: TextIO,
    degrees: Sequence[int] = COVER_DEGREES,
    base_config: SolverConfig | None = None,
    workers: int = 1,
) -> None:
    """One end-cover run per degree; partial rows are kept on resource limits."""
    base = base_config if base_config is not None else SolverConfig()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        [
            "problem",
            "T",
            "epsilon",
            "degree",
            "bisect",
            "tube",
            "cover_size",
            "stepb_calls",
            "tube_calls",
            "bisect_calls",
            "wall_seconds",
        ]
    )
    for degree in degrees:
        cfg = replace(base, degree=degree)
        try:
            cover = end_cover(system, e0, horizon, epsilon, cfg, workers)
        except ResourceLimit as exc:
            out.write(f"# aborted degree={degree} {exc}\n")
            out.flush()
            raise
        writer.writerow(
            [
                system.name,
                repr(horizon),
                repr(epsilon),
                degree,
                int(cfg.use_bisect),
                int(cfg.use_tube),
                cover.size,
                cover.stats.stepb_calls,
                cover.stats.tube_calls,
                cover.stats.bisect_calls,
                f"{cover.wall_seconds:.3f}",
            ]
        )
        out.flush()


# ---------------------------------------------------------------------------
# argument handling


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ivpcover",
        description="Rigorous end-set covers for polynomial ODE initial "
        "value problems.",
    )
    parser.add_argument(
        "--problem",
        required=True,
        help="built-in name (%s) or a problem file path"
        % ", ".join(BUILTIN_NAMES),
    )
    parser.add_argument("--horizon", type=float, help="time horizon T > 0")
    parser.add_argument(
        "--epsilon", type=float, help="target cover box width > 0"
    )
    parser.add_argument(
        "--degree", type=int, help="Taylor curve degree p (default 19)"
    )
    parser.add_argument(
        "--order", type=int, help="direct-step Taylor order k (default 20)"
    )
    parser.add_argument(
        "--no-bisect",
        action="store_true",
        help="disable mini-step bisection refinement",
    )
    parser.add_argument(
        "--no-tube",
        action="store_true",
        help="disable tube-based tightening",
    )
    parser.add_argument(
        "--delta-frac",
        type=float,
        help="tube radius as a fraction of the current end-box width",
    )
    parser.add_argument(
        "--experiment",
        choices=("sigma", "cover"),
        help="run a benchmark table instead of a single cover",
    )
    parser.add_argument(
        "--out", default="-", help="output CSV path ('-' for stdout)"
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=0,
        help="seed for verification sampling",
    )
    parser.add_argument(
        "--workers", type=int, default=1, help="parallel scaffold workers"
    )
    parser.add_argument(
        "--fixed-f1",
        help="comma-separated lo,hi per coordinate: pin the a-priori "
        "enclosure used by the sigma experiment",
    )
    return parser


def _parse_fixed_f1(text: str, dim: int, parser: argparse.ArgumentParser) -> Box:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        parser.error(f"--fixed-f1 expects comma-separated floats, got {text!r}")
    if len(values) != 2 * dim:
        parser.error(
            f"--fixed-f1 needs {2 * dim} values (lo,hi per coordinate), "
            f"got {len(values)}"
        )
    ivs = []
    for i in range(dim):
        lo, hi = values[2 * i], values[2 * i + 1]
        if not lo <= hi:
            parser.error(f"--fixed-f1 coordinate {i + 1} has lo > hi")
        ivs.append(Interval(lo, hi))
    return Box(ivs)


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    cfg = SolverConfig()
    updates: dict[str, object] = {}
    if args.degree is not None:
        if args.degree < 1:
            raise ValueError("--degree must be at least 1")
        updates["degree"] = args.degree
    if args.order is not None:
        if args.order < 1:
            raise ValueError("--order must be at least 1")
        updates["order"] = args.order
    if args.delta_frac is not None:
        if not 0.0 < args.delta_frac:
            raise ValueError("--delta-frac must be positive")
        updates["delta_frac"] = args.delta_frac
    if args.no_bisect:
        updates["use_bisect"] = False
    if args.no_tube:
        updates["use_tube"] = False
    return replace(cfg, **updates) if updates else cfg


def _open_out(path: str) -> TextIO:
    if path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8", newline="")


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        system, e0 = load_problem(args.problem)
    except (KeyError, OSError, ValueError) as exc:
        print(f"ivpcover: {exc}", file=sys.stderr)
        return 2

    try:
        cfg = _solver_config(args)
    except ValueError as exc:
        print(f"ivpcover: {exc}", file=sys.stderr)
        return 2

    if args.epsilon is not None and not args.epsilon > 0.0:
        print("ivpcover: --epsilon must be positive", file=sys.stderr)
        return 2
    if args.horizon is not None and not args.horizon > 0.0:
        print("ivpcover: --horizon must be positive", file=sys.stderr)
        return 2

    is_builtin = args.problem in BUILTIN_NAMES

    out = None
    try:
        if args.experiment == "sigma":
            if args.horizon is not None:
                horizon = args.horizon
            elif is_builtin:
                horizon = SIGMA_BENCHMARKS[args.problem].horizon
            else:
                print(
                    "ivpcover: --horizon is required for file problems",
                    file=sys.stderr,
                )
                return 2
            fixed = None
            if args.fixed_f1 is not None:
                fixed = _parse_fixed_f1(args.fixed_f1, system.dim, parser)
            orders = (
                (args.order,) if args.order is not None else SIGMA_ORDERS
            )
            out = _open_out(args.out)
            run_sigma_experiment(
                system,
                e0,
                horizon,
                out,
                fixed_f1=fixed,
                orders=orders,
                lognorm_method=cfg.lognorm_method,
            )
            return 0

        # the remaining modes all need a horizon and an epsilon
        if args.horizon is not None:
            horizon = args.horizon
        elif is_builtin:
            horizon = COVER_BENCHMARKS[args.problem].horizon
        else:
            print(
                "ivpcover: --horizon is required for file problems",
                file=sys.stderr,
            )
            return 2
        if args.epsilon is not None:
            epsilon = args.epsilon
        elif is_builtin:
            epsilon = COVER_BENCHMARKS[args.problem].epsilon
        else:
            print(
                "ivpcover: --epsilon is required for file problems",
                file=sys.stderr,
            )
            return 2

        if args.experiment == "cover":
            degrees = (
                (args.degree,) if args.degree is not None else COVER_DEGREES
            )
            out = _open_out(args.out)
            run_cover_experiment(
                system,
                e0,
                horizon,
                epsilon,
                out,
                degrees=degrees,
                base_config=cfg,
                workers=args.workers,
            )
            return 0

        # single run: cover, verify by sampling, write the boxes
        cover = end_cover(system, e0, horizon, epsilon, cfg, args.workers)
        report = verify_cover(
            system, e0, horizon, cover, samples=1000, seed=args.seed
        )
        out = _open_out(args.out)
        write_cover_csv(cover, out)
        print(
            f"cover size {cover.size}, horizon {horizon}, epsilon {epsilon}; "
            f"containment {report.fraction:.3f} "
            f"({report.contained}/{report.samples} sampled endpoints)",
            file=sys.stderr,
        )
        if report.contained != report.samples:
            print(
                "ivpcover: sampled endpoints escaped the cover "
                f"(worst distance {report.escape_distance:.3g})",
                file=sys.stderr,
            )
            return 1
        return 0
    except (StepFailure, ResourceLimit) as exc:
        print(f"ivpcover: {exc}", file=sys.stderr)
        return 1
    finally:
        if out is not None and out is not sys.stdout:
            out.close()


if __name__ == "__main__":
    raise SystemExit(main())
