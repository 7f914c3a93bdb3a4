"""Exception hierarchy.

Each class carries the CLI exit code it maps to.
"""


class HybridShrinkError(Exception):
    exit_code = 1


class InvalidInputError(HybridShrinkError, ValueError):
    exit_code = 2


class SingularDenominatorError(InvalidInputError):
    """Control-arm mean is zero, so the ratio estimate is undefined."""


class NumericalError(HybridShrinkError, ArithmeticError):
    exit_code = 3


class InfeasibleSelectionError(NumericalError):
    """Selection rule accepted too few candidates before the draw cap."""


class ReportIOError(HybridShrinkError, OSError):
    exit_code = 4
