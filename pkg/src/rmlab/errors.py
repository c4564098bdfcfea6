"""Exception types raised across the package."""


class RmlabError(Exception):
    """Base class for all package errors."""


class InvalidParams(RmlabError, ValueError):
    pass


class DegenerateDenominator(RmlabError, ArithmeticError):
    """The row-sum total is too close to zero for the two-step estimator."""


class NoConvergence(RmlabError):
    """Power iteration hit its iteration cap.

    ``rep_index`` is filled in when the failure happens inside a Monte Carlo
    replication.
    """

    def __init__(self, iterations, rep_index=None):
        self.iterations = iterations
        self.rep_index = rep_index
        msg = f"power iteration did not converge after {iterations} iterations"
        if rep_index is not None:
            msg += f" (replication {rep_index})"
        super().__init__(msg)


class SizeExceeded(RmlabError, ValueError):
    pass


class EmptyInput(RmlabError, ValueError):
    pass


class NonPositiveInput(RmlabError, ValueError):
    pass


class BadRange(RmlabError, ValueError):
    pass
