"""Exact arithmetic on the accuracy parameter ``k``.

All comparisons on the algorithm path go through :class:`fractions.Fraction`;
floats are only used to pick a starting guess that is then corrected exactly.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .errors import RegimeError


def parse_k(k) -> Fraction:
    """Parse ``k`` from an int, Fraction or ``"p/q"`` string; require ``k > 1``."""
    if isinstance(k, float):
        raise TypeError("k must be exact; pass a Fraction or a 'p/q' string")
    value = Fraction(k)
    if value <= 1:
        raise RegimeError(f"k must exceed 1, got {value}")
    return value


def format_rational(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def floor_log_k(k: Fraction, z) -> int:
    """Largest ``j >= 0`` with ``k**j <= z``, for rational ``z >= 1``."""
    z = Fraction(z)
    if z < 1:
        raise ValueError(f"floor_log_k needs z >= 1, got {z}")
    j = max(0, int(math.log(z) / math.log(k)) - 1)
    while j > 0 and k**j > z:
        j -= 1
    while k ** (j + 1) <= z:
        j += 1
    return j


def ceil_log_k(k: Fraction, z) -> int:
    """Smallest ``j >= 0`` with ``k**j >= z``; 0 for ``z <= 1``."""
    z = Fraction(z)
    if z <= 1:
        return 0
    j = floor_log_k(k, z)
    return j if k**j == z else j + 1


def ceil_fraction(x) -> int:
    x = Fraction(x)
    return -((-x.numerator) // x.denominator)
