"""Error types raised by the solver."""


class DomainError(ValueError):
    """Invalid mathematical input: empty interval, division through zero, NaN."""


class StepFailure(RuntimeError):
    """A-priori enclosure could not be established above the minimum step size."""


class ResourceLimit(RuntimeError):
    """The solver exceeded a configured work bound before meeting the target."""


class InternalSoundnessViolation(AssertionError):
    """Two independently valid enclosures turned out disjoint.

    This can only happen through an implementation bug, never through
    conservative rounding, so it is raised loudly instead of being repaired.
    """
