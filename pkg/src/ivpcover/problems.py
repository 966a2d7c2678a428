"""Built-in benchmark problems and their standard experiment inputs.

Five classical polynomial systems exercise qualitatively different flow
behavior: bounded oscillation (Volterra), damped oscillation (the Van der
Pol variant used here), finite-time escape nearby (Asymptote), chaotic
divergence (Lorenz), and mild spiraling (Rossler).  Each entry carries the
canonical initial box; the benchmark tables give the horizons, targets,
and fixed a-priori enclosures used by the experiment drivers.
"""

from __future__ import annotations

from dataclasses import dataclass

from .expr import OdeSystem, parse_problem_text
from .intervals import Box

__all__ = [
    "BUILTIN_NAMES",
    "builtin_problem",
    "builtin_problem_text",
    "CoverBenchmark",
    "SigmaBenchmark",
    "COVER_BENCHMARKS",
    "SIGMA_BENCHMARKS",
]

_VOLTERRA = """\
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

_VANDERPOL = """\
name vanderpol
dim 2
vars x y
param c 1
rhs x y
rhs y c*(1-x^2)*y - x
init_center -3.0 3.0
init_radius 0.1 0.1
"""

_ASYMPTOTE = """\
name asymptote
dim 2
vars x y
rhs x x^2
rhs y -y^2 + 7*x
init_center -1.5 8.5
init_radius 0.01 0.01
"""

_LORENZ = """\
name lorenz
dim 3
vars x y z
param sigma 10
param rho 28
param beta 8/3
rhs x sigma*(y-x)
rhs y x*(rho-z)-y
rhs z x*y-beta*z
init_center 15 15 36
init_radius 0.001 0.001 0.001
"""

_ROSSLER = """\
name rossler
dim 3
vars x y z
param a 0.2
param b 0.2
param c 5.7
rhs x -y-z
rhs y x+a*y
rhs z b+z*(x-c)
init_center 1 2 3
init_radius 0.1 0.1 0.1
"""

_BUILTIN = {
    "volterra": _VOLTERRA,
    "vanderpol": _VANDERPOL,
    "asymptote": _ASYMPTOTE,
    "lorenz": _LORENZ,
    "rossler": _ROSSLER,
}

BUILTIN_NAMES = tuple(_BUILTIN)


def builtin_problem_text(name: str) -> str:
    """The problem-file text of a built-in, for round-trip and file tests."""
    try:
        return _BUILTIN[name]
    except KeyError:
        known = ", ".join(BUILTIN_NAMES)
        raise KeyError(f"unknown problem {name!r}; built-ins: {known}") from None


def builtin_problem(name: str) -> tuple[OdeSystem, Box]:
    """Parse a built-in problem into (system, initial box)."""
    return parse_problem_text(builtin_problem_text(name))


@dataclass(frozen=True)
class CoverBenchmark:
    """Standard horizon and cover target for a built-in problem."""

    horizon: float
    epsilon: float


@dataclass(frozen=True)
class SigmaBenchmark:
    """Fixed inputs for the enclosure-comparison experiment.

    The a-priori enclosure is pinned (rather than produced by the adaptive
    first step) so that step-size and volume-ratio outputs are computed on
    identical inputs across implementations.
    """

    horizon: float
    f1_center: tuple[float, ...]
    f1_radius: tuple[float, ...]


COVER_BENCHMARKS = {
    "volterra": CoverBenchmark(horizon=2.0, epsilon=0.01),
    "vanderpol": CoverBenchmark(horizon=2.0, epsilon=0.01),
    "asymptote": CoverBenchmark(horizon=1.0, epsilon=0.01),
    "lorenz": CoverBenchmark(horizon=1.0, epsilon=1.0),
    "rossler": CoverBenchmark(horizon=2.0, epsilon=1.0),
}

SIGMA_BENCHMARKS = {
    "volterra": SigmaBenchmark(0.1, (0.75, 3.0), (0.36, 0.20)),
    "vanderpol": SigmaBenchmark(0.05, (-2.9, 2.4), (0.19, 0.71)),
    "asymptote": SigmaBenchmark(0.04, (-1.5, 6.8), (0.059, 1.7)),
    "lorenz": SigmaBenchmark(0.027, (15.0, 13.0, 38.0), (0.26, 2.2, 1.8)),
    "rossler": SigmaBenchmark(0.1, (0.74, 2.1, 2.3), (0.37, 0.18, 0.85)),
}
