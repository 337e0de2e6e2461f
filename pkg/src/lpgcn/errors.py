"""Exception hierarchy.

``InputError`` covers malformed data, bad indices and invalid configuration
(CLI exit code 1). ``NumericalError`` covers solver failures (exit code 2).
"""


class LpGcnError(Exception):
    """Base class for all package errors."""


class InputError(LpGcnError, ValueError):
    pass


class NumericalError(LpGcnError, ArithmeticError):
    pass


class ConvergenceError(NumericalError):
    """An iterative method stopped at ``max_iter`` without meeting its tolerance.

    Attributes
    ----------
    estimate : float
        Best value found before giving up.
    residual : float
        Residual of ``estimate``.
    iterations : int
    """

    def __init__(self, message, estimate=float("nan"), residual=float("inf"), iterations=0):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual
        self.iterations = iterations
