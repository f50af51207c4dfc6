"""Exact nonnegative lengths.

A length is stored through its exact rational square, so Euclidean distances
between rational points compare exactly even when they are irrational (√2 at
the diagonal of a unit lattice). Sums of irrational lengths are rounded up.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Union

from .exceptions import ModelError

Number = Union[int, float, str, Fraction]

# Scale used when rounding irrational roots up to a rational
_ROOT_DIGITS = 10**12


def as_fraction(value: Number) -> Fraction:
    """Parse a JSON number or a decimal/rational string into an exact rational"""
    if isinstance(value, bool):
        raise ModelError(f"Expected a number, got {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ModelError(f"Expected a finite number, got {value!r}")
        # Decimal reading of the float, not its binary expansion
        return Fraction(repr(value))
    if isinstance(value, str):
        text = value.strip()
        if text.lower() in {"inf", "+inf", "-inf", "infinity", "nan"}:
            raise ModelError(f"Expected a finite number, got {value!r}")
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ModelError(f"Cannot parse number {value!r}") from exc
    raise ModelError(f"Expected a number, got {type(value).__name__}")


def _exact_root(square: Fraction) -> Fraction | None:
    num, den = square.numerator, square.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return None


@total_ordering
@dataclass(frozen=True, slots=True)
class Length:
    square: Fraction

    def __post_init__(self) -> None:
        if self.square < 0:
            raise ModelError("Lengths are nonnegative")

    @classmethod
    def of(cls, value: Number) -> "Length":
        root = as_fraction(value)
        if root < 0:
            raise ModelError(f"Lengths are nonnegative, got {value!r}")
        return cls(root * root)

    @classmethod
    def from_square(cls, square: Number) -> "Length":
        return cls(as_fraction(square))

    @classmethod
    def between(cls, a: tuple[Fraction, ...], b: tuple[Fraction, ...]) -> "Length":
        """Euclidean distance between two rational positions"""
        return cls(sum(((x - y) ** 2 for x, y in zip(a, b)), Fraction(0)))

    @property
    def root(self) -> Fraction | None:
        """The exact rational value, or None when the length is irrational"""
        return _exact_root(self.square)

    @property
    def is_rational(self) -> bool:
        return self.root is not None

    def upper_rational(self) -> Fraction:
        """A rational upper bound, equal to the length when it is rational"""
        exact = self.root
        if exact is not None:
            return exact
        num, den = self.square.numerator, self.square.denominator
        top = math.isqrt(num * den * _ROOT_DIGITS * _ROOT_DIGITS) + 1
        return Fraction(top, den * _ROOT_DIGITS)

    def __add__(self, other: "Length") -> "Length":
        a, b = self.root, other.root
        if a is not None and b is not None:
            return Length.of(a + b)
        return Length.of(self.upper_rational() + other.upper_rational())

    def scaled(self, factor: Number) -> "Length":
        f = as_fraction(factor)
        if f < 0:
            raise ModelError("Scale factors are nonnegative")
        return Length(self.square * f * f)

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, Length):
            return NotImplemented
        return self.square < other.square

    def __float__(self) -> float:
        exact = self.root
        if exact is not None:
            return float(exact)
        return math.sqrt(self.square)

    def __str__(self) -> str:
        exact = self.root
        if exact is not None:
            return str(exact)
        return f"sqrt({self.square})"


ZERO = Length(Fraction(0))


def length_out(value: Length | None) -> float | str:
    """JSON form of a length; None stands for +inf"""
    if value is None:
        return "inf"
    return float(value)
