"""Exception hierarchy shared by every module."""


class JacobiError(Exception):
    """Base class for all errors raised by jacobi3."""


class ExprSyntaxError(JacobiError, ValueError):
    """Malformed expression text. ``offset`` is a byte offset into the UTF-8 source."""

    def __init__(self, message, source="", offset=0):
        super().__init__(f"{message} (at byte {offset})")
        self.source = source
        self.offset = offset


class UnknownIdentifier(ExprSyntaxError):
    """A name outside the declared variable/function/constant alphabet."""


class EvalDomainError(JacobiError, ArithmeticError):
    """Evaluation left the real domain of an operation (ln<=0, sqrt<0, x/0, ...)."""

    def __init__(self, message, point=None):
        if point is not None:
            message = f"{message} at point {tuple(float(c) for c in point)}"
        super().__init__(message)
        self.point = point


class MissingBinding(JacobiError, LookupError):
    pass


class _AtPoint(JacobiError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DegenerateHelicity(_AtPoint):
    """A·∇×A vanishes (or changes sign) on the sample domain of a rank-3 build."""


class DegenerateInput(_AtPoint):
    pass


class WrongKind(JacobiError):
    pass


class StationaryPsi(_AtPoint):
    """∇ψ̂ vanishes on a characteristic; ``point`` is in the (u, v) plane."""


class TransversalMiss(_AtPoint):
    pass


class StepFailure(JacobiError):
    pass


class ConfigError(JacobiError):
    pass
