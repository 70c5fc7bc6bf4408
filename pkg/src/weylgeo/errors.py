"""Exception types shared across the package."""


class GeometryError(Exception):
    """Base class for all numerical-geometry errors raised by weylgeo."""


class DomainError(GeometryError):
    """A point (or a finite-difference stencil) falls outside a chart domain."""


class JetOrderError(GeometryError):
    """A derivative order is requested that the jet machinery does not carry."""


class SingularMetricError(GeometryError):
    """A metric value is not positive definite."""


class ConicError(GeometryError):
    """Base class for conic-related failures."""


class DegenerateConicError(ConicError):
    """The conic is singular (or a fiber line is tangent, giving a double root)."""


class InadmissibleConicError(ConicError):
    """The conic has real points and cannot induce sphere data."""


class RealPointInputError(ConicError):
    """A projective point with (numerically) real representative where a
    genuinely complex one is required."""


class IncompatibleStructureError(GeometryError):
    """Compatibility residual above tolerance where an exact identity is needed."""


class PositivityError(GeometryError):
    """The positivity function is non-positive where a coframe was requested."""
