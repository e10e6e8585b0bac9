"""Exception types shared across the package."""


class VarimpError(Exception):
    """Base class for all errors raised by this package."""


class InputError(VarimpError):
    """Invalid user input: bad files, bad columns, bad options, degenerate data."""


class NumericalError(VarimpError):
    """A computation failed numerically (out-of-range values, unresolvable degeneracy)."""
