"""Exception types shared across the package.

The CLI maps these onto exit codes: InputError -> 2, LimitError -> 3.
"""


class InputError(ValueError):
    """Malformed or inconsistent input (bad dimensions, labels, flags, files)."""


class LimitError(RuntimeError):
    """A brute-force routine refused to start because its size limits were exceeded."""


class ContractError(RuntimeError):
    """An API was called in a state its contract forbids."""


class CrossCheckError(RuntimeError):
    """Two independent feasibility routines disagreed.

    Never auto-resolved: this always indicates a solver bug and must surface
    loudly in the test suite.
    """
