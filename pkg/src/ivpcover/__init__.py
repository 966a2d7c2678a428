"""Validated enclosures and epsilon-covers for polynomial ODE initial value problems.

The package computes guaranteed end-enclosures and full-enclosures of the
reachable set of an autonomous polynomial ODE from a box of initial
conditions, and assembles epsilon-covers of the end set by adaptive
subdivision.  All set arithmetic is outward-rounded interval arithmetic, so
every reported box is a mathematically rigorous enclosure.
"""

from .intervals import Interval, Box, Ball, box_to_ball, ball_to_box, split_box
from .errors import DomainError, StepFailure, ResourceLimit, InternalSoundnessViolation

__all__ = [
    "Interval",
    "Box",
    "Ball",
    "box_to_ball",
    "ball_to_box",
    "split_box",
    "DomainError",
    "StepFailure",
    "ResourceLimit",
    "InternalSoundnessViolation",
]
