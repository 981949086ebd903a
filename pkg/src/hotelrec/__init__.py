"""Hybrid hotel recommendation: content profiles, ALS factorisation, interleaved lists."""

from .errors import DataError, HotelRecError, NumericalError, UnknownUserError
from .ranking import RankedList

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "HotelRecError",
    "NumericalError",
    "RankedList",
    "UnknownUserError",
]
