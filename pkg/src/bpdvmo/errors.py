"""Exception hierarchy.

Validation problems (bad input, geometry that cannot be realized) derive from
:class:`ValidationError`; failures of a numerical pipeline on valid input
derive from :class:`NumericError`. The CLI maps the two families to distinct
exit codes.
"""


class BPDError(Exception):
    pass


class ValidationError(BPDError, ValueError):
    pass


class GeometryError(ValidationError):
    """Region or disk fails a containment / validity check."""

    def __init__(self, message, annulus=None):
        if annulus is not None:
            message = f"annulus n={annulus}: {message}"
        super().__init__(message)
        self.annulus = annulus


class DomainError(ValidationError):
    pass


class NumericError(BPDError, ArithmeticError):
    pass


class ResourceError(NumericError):
    pass


class QuadratureError(NumericError):
    def __init__(self, message, node=None, cube=None):
        super().__init__(message)
        self.node = node
        self.cube = cube


class ConstructionError(NumericError):
    pass


class EvaluationError(NumericError):
    pass


class ConsistencyError(NumericError):
    pass
