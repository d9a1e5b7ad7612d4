"""Number handling shared by the float and exact-rational code paths."""

from __future__ import annotations

from fractions import Fraction
from numbers import Real
from typing import Any

import numpy as np


def is_exact(x: Any) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def all_exact(*xs: Any) -> bool:
    return all(is_exact(x) for x in xs)


def to_exact(x: Any) -> Fraction:
    """Convert a number or a string such as ``"6/5"`` / ``"0.05"`` to a Fraction.

    Floats go through their repr so that ``0.1`` becomes ``1/10`` rather than the
    binary expansion.
    """
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot convert {x!r} to an exact number")


def to_float(x: Any) -> float:
    if isinstance(x, str):
        return float(Fraction(x.strip()))
    return float(x)


def convert(x: Any, exact: bool):
    return to_exact(x) if exact else to_float(x)


def encode(x: Any):
    """JSON-friendly encoding: exact non-integers become ``"p/q"`` strings."""
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return int(x.numerator)
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def decode(x: Any, exact: bool):
    if isinstance(x, bool) or not isinstance(x, (Real, str)):
        raise TypeError(f"expected a number, got {x!r}")
    return convert(x, exact)


def where(cond, a, b):
    """``np.where`` that keeps plain scalars (including Fractions) as scalars."""
    if np.ndim(cond) == 0 and np.ndim(a) == 0 and np.ndim(b) == 0:
        return a if bool(cond) else b
    return np.where(cond, a, b)


def close(a, b, tol) -> bool:
    if tol == 0:
        return a == b
    return abs(a - b) <= tol
