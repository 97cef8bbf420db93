"""Exact rational parsing, formatting, and rounding helpers."""

from __future__ import annotations

import math
from fractions import Fraction

from coso.common.errors import CosoError


class InvalidRationalError(CosoError, ValueError):
    """Raised when a value cannot be read as an exact rational."""


def parse_rational(value: object) -> Fraction:
    """Read an int, Fraction, or "p/q" / "n" string as an exact Fraction.

    Floats are refused: a binary float silently changes the breakpoints.
    """
    if isinstance(value, bool):
        raise InvalidRationalError(f"Not a rational: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if not text:
            raise InvalidRationalError("Empty rational")
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidRationalError(f"Not a rational: {value!r}") from exc
    raise InvalidRationalError(f"Not a rational: {value!r}")


def format_rational(value: Fraction | int) -> str:
    """Render as "n" for integers and "p/q" otherwise."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def format_decimal(value: Fraction | int, places: int = 4) -> str:
    """Human display; exact values keep their "p/q" form in brackets when inexact."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    shown = f"{float(value):.{places}f}".rstrip("0").rstrip(".")
    if Fraction(shown) == value:
        return shown
    return f"{shown} [{format_rational(value)}]"


def ceil_rational(value: Fraction | int) -> int:
    """Exact ceiling."""
    return math.ceil(Fraction(value))


def is_integral(value: Fraction | int) -> bool:
    return Fraction(value).denominator == 1


def lcm_of_denominators(values) -> int:
    """Smallest block length n making every value integral when scaled by n."""
    n = 1
    for value in values:
        n = math.lcm(n, Fraction(value).denominator)
    return n
