"""Exception hierarchy shared by all modules.

Every error raised on invalid input derives from ``ValidationError`` so that
the command line can map it to exit code 2.
"""


class NNGFError(Exception):
    """Base class for package errors."""


class ValidationError(NNGFError, ValueError):
    """Input violates a documented precondition."""


class InvalidSeriesError(ValidationError):
    pass


class DegenerateActivationError(ValidationError):
    pass


class UnsupportedKernelError(ValidationError):
    pass


class PreconditionError(ValidationError):
    pass


class ExcludedCaseError(ValidationError):
    pass


class NumericalInstabilityError(NNGFError, ArithmeticError):
    pass


class UnderResolvedError(NNGFError, ArithmeticError):
    """Quadrature result moved by more than the tolerance under node doubling."""


class UnclassifiableError(NNGFError):
    pass


class AssumptionViolationError(NNGFError):
    pass


class DepthLimitError(NNGFError, OverflowError):
    pass


class ConvergenceError(NNGFError):
    pass


class SingularityError(ValidationError):
    pass


class TruncationError(NNGFError):
    """A spectral or chaos truncation left more mass behind than allowed."""


class RankError(NNGFError):
    pass


class NotAdmissibleError(NNGFError):
    pass


class DataError(ValidationError):
    pass


class NotPSDError(NNGFError):
    pass
