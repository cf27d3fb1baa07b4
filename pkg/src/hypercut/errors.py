"""Exception types shared across the package.

Three failure families are kept apart so the CLI can map them to exit codes:
bad input (ValueError, exit 3), violated mathematical invariants or failed
numerical targets (exit 2), and everything else (ordinary crashes).
"""


class InvariantViolation(RuntimeError):
    """A structural self-check failed (non-unit matrix, sample outside the
    fundamental domain, histogram mass in a zero-area cell, ...)."""


class NumericError(ArithmeticError):
    """A numerically impossible value appeared beyond tolerance, e.g. a
    Minkowski pairing of two hyperboloid points below 1."""


class AccuracyError(RuntimeError):
    """Adaptive quadrature could not reach the requested tolerance.

    Carries the best estimate so callers can decide whether to keep it.
    """

    def __init__(self, message: str, best_estimate=None, error_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate


class ReductionError(RuntimeError):
    """Fundamental-domain reduction failed to terminate within the step cap."""
