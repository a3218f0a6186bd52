"""Exception types shared across the package."""


class CCPDEError(Exception):
    """Base class for all package errors."""


class DomainError(CCPDEError):
    """A point lies outside the working box of a frame or grid."""


class SingularFrameError(CCPDEError):
    """The frame loses pointwise linear independence at the given point."""

    def __init__(self, point, smallest_sv):
        self.point = tuple(float(c) for c in point)
        self.smallest_sv = float(smallest_sv)
        super().__init__(
            f"frame is rank deficient at {self.point} "
            f"(smallest singular value {self.smallest_sv:.3e})"
        )


class StencilError(CCPDEError):
    """A wide-stencil operator was requested too close to the boundary."""


class ParameterError(CCPDEError):
    """Invalid argument combination."""


class ConvergenceError(CCPDEError):
    """Iterative solve failed to reach tolerance; carries the trace."""

    def __init__(self, message, trace=None):
        self.trace = list(trace) if trace is not None else []
        super().__init__(message)


class ExpressionError(CCPDEError):
    """Malformed coefficient / data expression."""
