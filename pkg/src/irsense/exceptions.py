"""Exception hierarchy shared by all irsense modules."""


class IrsenseError(Exception):
    """Base class for every error raised by this package."""


class DomainError(IrsenseError, ValueError):
    """An input lies outside the domain of the requested operation."""


class SingularityError(IrsenseError, ArithmeticError):
    """The Fisher information vanishes, so the CRB is undefined."""


class AmbiguityError(IrsenseError):
    """A spectrum has no unique peak."""


class ConditioningError(IrsenseError, ArithmeticError):
    """The array interpolation fit could not be made accurate enough.

    The achieved relative residual is kept on ``residual``.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SearchSpaceError(DomainError):
    """A brute-force search would exceed its candidate budget.

    ``suggested_step`` holds a coarser grid step that fits the budget.
    """

    def __init__(self, message, candidates=None, suggested_step=None):
        super().__init__(message)
        self.candidates = candidates
        self.suggested_step = suggested_step
