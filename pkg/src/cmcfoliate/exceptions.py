"""Exception hierarchy.

Input problems derive from ``ValueError`` so they compose with code that
already catches validation errors; solver failures derive from
``RuntimeError`` and carry diagnostics.
"""


class CMCError(Exception):
    """Base class for all package errors."""


class InputError(CMCError, ValueError):
    """Malformed or inconsistent input."""


class FewerThanTwoDirections(InputError):
    pass


class NotInDomain(InputError):
    """A point is not strictly inside the regular domain."""


class PreconditionError(InputError):
    pass


class SlopeViolation(CMCError, RuntimeError):
    """A graph is not (uniformly) spacelike where it has to be."""

    def __init__(self, message, max_slope=None):
        super().__init__(message)
        self.max_slope = max_slope


class NewtonDiverged(CMCError, RuntimeError):
    def __init__(self, message, last_residual=None, damping_history=None):
        super().__init__(message)
        self.last_residual = last_residual
        self.damping_history = list(damping_history or [])


class NoStabilization(CMCError, RuntimeError):
    """The window restriction kept moving; ``last`` holds the latest one."""

    def __init__(self, message, differences=None, last=None):
        super().__init__(message)
        self.differences = list(differences or [])
        self.last = last


class OrderingViolation(CMCError, RuntimeError):
    pass


class FlowDegenerate(CMCError, RuntimeError):
    """The normal flow stops being an immersion."""

    def __init__(self, message, min_det=None):
        super().__init__(message)
        self.min_det = min_det


class DomainNotNested(PreconditionError):
    pass


class ProbeOutsideDomain(PreconditionError):
    pass


class ProbeNotBelowSurface(PreconditionError):
    pass
