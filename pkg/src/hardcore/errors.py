"""Exception types shared across the package.

Two families are kept apart so the command line can map them to
different exit codes: bad input versus a numerical or search failure.
"""


class ValidationError(ValueError):
    """Input violates a precondition (bad grid, inadmissible state, ...)."""


class ComputationError(RuntimeError):
    """A computation could not produce a trustworthy result."""
