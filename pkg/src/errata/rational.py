"""Exact-rational helpers shared across the package.

Every statistic in this package is a ratio of event counts and is kept as
a ``fractions.Fraction`` end to end; floats appear only when a report is
rendered for humans. ``None`` stands for an undefined value (a zero
denominator somewhere upstream) and propagates through the arithmetic
helpers below.
"""

from __future__ import annotations

from fractions import Fraction

UNDEFINED_TEXT = "UNDEFINED"


def as_fraction(value) -> Fraction:
    """Coerce a config value (int, str, or float) to an exact Fraction.

    Floats are read through their shortest decimal repr, so ``0.9``
    becomes 9/10 rather than its binary expansion.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        return parse_rational(value)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def parse_rational(text: str) -> Fraction:
    """Parse "num/den", integer, or decimal text into a Fraction."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational number: {text!r}") from exc


def format_rational(value: Fraction | None) -> str:
    """Render as "num/den" (always with a denominator), or UNDEFINED."""
    if value is None:
        return UNDEFINED_TEXT
    return f"{value.numerator}/{value.denominator}"


def decimal_str(value: Fraction | None, sig: int = 12) -> str:
    """Decimal approximation with ``sig`` significant digits, display only."""
    if value is None:
        return UNDEFINED_TEXT
    return f"{value.numerator / value.denominator:.{sig}g}"


# None-propagating arithmetic: combining an undefined operand is undefined,
# and division by zero is undefined rather than an error.

def add(a: Fraction | None, b: Fraction | None) -> Fraction | None:
    return None if a is None or b is None else a + b


def sub(a: Fraction | None, b: Fraction | None) -> Fraction | None:
    return None if a is None or b is None else a - b


def mul(a: Fraction | None, b: Fraction | None) -> Fraction | None:
    return None if a is None or b is None else a * b


def div(a: Fraction | None, b: Fraction | None) -> Fraction | None:
    if a is None or b is None or b == 0:
        return None
    return a / b
