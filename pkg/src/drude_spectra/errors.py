"""Exception types raised by the spectral toolkit."""


class SpectraError(Exception):
    """Base class for all errors raised by this package."""


class PoleAtOmega(SpectraError, ValueError):
    """The frequency sits on (or numerically at) a pole of the material law."""


class DegenerateParams(SpectraError, ValueError):
    pass


class UnsupportedParams(SpectraError, ValueError):
    pass


class DegenerateQuartic(SpectraError, ValueError):
    pass


class NoConvergence(SpectraError, ArithmeticError):
    pass


class BoundaryZero(SpectraError, ArithmeticError):
    """|F| on a contour is too small to track its argument reliably."""


class PhaseUnresolved(SpectraError, ArithmeticError):
    """Argument tracking failed: too many samples or a non-integer winding."""


class BranchCut(SpectraError, ValueError):
    pass


class InvalidInput(SpectraError, ValueError):
    pass


class InvalidRegion(InvalidInput):
    pass


class NoReferenceRoot(SpectraError, LookupError):
    pass
