"""Exception types shared across the pipeline.

Each error carries the process exit code the CLI maps it to.
"""


class HotelRecError(Exception):
    exit_code = 2


class DataError(HotelRecError):
    """Malformed or empty input data."""


class UnknownUserError(DataError):
    """A user id that a fitted model has never seen."""


class NumericalError(HotelRecError):
    """Non-finite values or a broken optimisation invariant."""

    exit_code = 3
