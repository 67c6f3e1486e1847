"""Exact time values.

Every quantity that takes part in a feasibility decision is a
``fractions.Fraction``.  Unbounded periods use the :data:`INF` sentinel,
and irrational inflation factors such as ``1 + sqrt(2)`` are represented
exactly by :class:`Surd`.
"""

from __future__ import annotations

import math
import os
import re
from fractions import Fraction
from functools import total_ordering
from numbers import Rational
from typing import Union

DEFAULT_PRECISION = 10**6


@total_ordering
class _Infinity:
    """Positive infinity for periods; supports comparison only."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __eq__(self, other):
        return other is self

    def __lt__(self, other):
        return False

    def __gt__(self, other):
        return other is not self

    def __hash__(self):
        return hash("resfed.INF")

    def __float__(self):
        return math.inf

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()

Time = Union[Fraction, _Infinity]


def is_inf(value) -> bool:
    return value is INF


def as_time(value) -> Time:
    """Coerce ints, Fractions, decimal strings and ``"inf"`` to a Time.

    Floats are rejected: they would silently carry binary rounding into
    exact comparisons.
    """
    if value is INF:
        return INF
    if isinstance(value, bool):
        raise TypeError("booleans are not time values")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, str):
        text = value.strip()
        if text.lower() in ("inf", "infinity", "∞"):
            return INF
        return Fraction(text)
    if isinstance(value, float):
        raise TypeError(f"float {value!r} is not an exact time value; use a Fraction or string")
    raise TypeError(f"cannot interpret {value!r} as a time value")


def ceil_div(t: Fraction, period: Time) -> int:
    """Number of releases of a periodic task in ``[0, t)`` (i.e. ``ceil(t/T)``)."""
    if period is INF:
        return 1 if t > 0 else 0
    return math.ceil(t / period)


def utilization(cost: Fraction, period: Time) -> Fraction:
    if period is INF:
        return Fraction(0)
    return cost / period


def time_to_json(value: Time):
    if value is INF:
        return "inf"
    value = Fraction(value)
    return {"num": value.numerator, "den": value.denominator}


def time_from_json(obj, path: str = "$") -> Time:
    if isinstance(obj, str) and obj.strip().lower() == "inf":
        return INF
    if isinstance(obj, bool):
        raise ValueError(f"{path}: expected a time value, got a boolean")
    if isinstance(obj, int):
        return Fraction(obj)
    if isinstance(obj, dict) and set(obj) == {"num", "den"}:
        num, den = obj["num"], obj["den"]
        if not (isinstance(num, int) and isinstance(den, int)) or isinstance(num, bool) or isinstance(den, bool):
            raise ValueError(f"{path}: num/den must be integers")
        if den <= 0:
            raise ValueError(f"{path}: den must be positive")
        return Fraction(num, den)
    raise ValueError(f"{path}: expected {{'num':..,'den':..}}, an integer or 'inf', got {obj!r}")


def precision_from_env() -> int:
    raw = os.environ.get("RESFED_PRECISION")
    if not raw:
        return DEFAULT_PRECISION
    value = int(raw)
    if value < 1:
        raise ValueError("RESFED_PRECISION must be a positive integer")
    return value


def _is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


@total_ordering
class Surd:
    """Exact number ``a + b*sqrt(r)`` with rational ``a``, ``b`` and integer ``r``.

    Comparisons against rationals (and surds over the same radicand) are
    decided exactly by squaring, so classification thresholds involving
    ``1 + sqrt(2)`` never depend on rounding.
    """

    __slots__ = ("a", "b", "r")

    def __init__(self, a, b=0, r: int = 0):
        a, b = Fraction(a), Fraction(b)
        r = int(r)
        if r < 0:
            raise ValueError("negative radicand")
        if b == 0 or r == 0:
            b, r = Fraction(0), 0
        elif _is_square(r):
            a, b, r = a + b * math.isqrt(r), Fraction(0), 0
        else:
            # pull square factors out of r to keep a canonical form
            f = 2
            while f * f <= r:
                while r % (f * f) == 0:
                    r //= f * f
                    b *= f
                f += 1
        self.a, self.b, self.r = a, b, r

    @classmethod
    def parse(cls, text) -> "Surd":
        """Parse ``"2"``, ``"3/2"``, ``"1.5"``, ``"1+sqrt(2)"``, ``"1+sqrt2"``, ``"2*sqrt(3)"``."""
        if isinstance(text, Surd):
            return text
        if isinstance(text, (int, Fraction)):
            return cls(text)
        s = str(text).replace(" ", "").replace("√", "sqrt")
        m = re.fullmatch(
            r"(?:(?P<a>[-+]?[0-9./]+)(?=[-+]|$))?"
            r"(?:(?P<sign>[-+])?(?:(?P<b>[0-9./]+)\*?)?sqrt\(?(?P<r>[0-9]+)\)?)?",
            s,
        )
        if not s or m is None or (m.group("a") is None and m.group("r") is None):
            raise ValueError(f"cannot parse {text!r} as a rational or a + b*sqrt(r)")
        a = Fraction(m.group("a")) if m.group("a") else Fraction(0)
        if m.group("r") is None:
            return cls(a)
        b = Fraction(m.group("b")) if m.group("b") else Fraction(1)
        if m.group("sign") == "-":
            b = -b
        return cls(a, b, int(m.group("r")))

    @property
    def is_rational(self) -> bool:
        return self.r == 0

    def _coerce(self, other) -> "Surd":
        if isinstance(other, Surd):
            if other.r and self.r and other.r != self.r:
                raise ValueError("surds over different radicands are not supported")
            return other
        if isinstance(other, (int, Fraction)):
            return Surd(other)
        return NotImplemented

    def _radicand(self, other: "Surd") -> int:
        return self.r or other.r

    def sign(self) -> int:
        a, b = self.a, self.b
        sa = (a > 0) - (a < 0)
        if b == 0:
            return sa
        sb = (b > 0) - (b < 0)
        if sa == 0 or sa == sb:
            return sb
        # opposite signs: compare a^2 against b^2 r
        if a * a > b * b * self.r:
            return sa
        if a * a < b * b * self.r:
            return sb
        return 0

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Surd(self.a + other.a, self.b + other.b, self._radicand(other))

    __radd__ = __add__

    def __neg__(self):
        return Surd(-self.a, -self.b, self.r)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        r = self._radicand(other)
        return Surd(
            self.a * other.a + self.b * other.b * r,
            self.a * other.b + self.b * other.a,
            r,
        )

    __rmul__ = __mul__

    def reciprocal(self) -> "Surd":
        norm = self.a * self.a - self.b * self.b * self.r
        if norm == 0:
            raise ZeroDivisionError("division by zero surd")
        return Surd(self.a / norm, -self.b / norm, self.r)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return (self - other).sign() == 0

    def __lt__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return (self - other).sign() < 0

    def __hash__(self):
        if self.r == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.r))

    def __float__(self):
        return float(self.a) + float(self.b) * math.sqrt(self.r)

    def __floor__(self) -> int:
        n = math.floor(float(self))
        while self < n:
            n -= 1
        while self >= n + 1:
            n += 1
        return n

    def __ceil__(self) -> int:
        n = math.floor(self)
        return n if self == n else n + 1

    def upper_bound(self, precision: int | None = None) -> Fraction:
        """Smallest multiple of ``1/precision`` that is ``>= self``."""
        if self.r == 0:
            return self.a
        precision = precision or precision_from_env()
        return Fraction(math.ceil(self * precision), precision)

    def lower_bound(self, precision: int | None = None) -> Fraction:
        if self.r == 0:
            return self.a
        precision = precision or precision_from_env()
        return Fraction(math.floor(self * precision), precision)

    def __str__(self):
        if self.r == 0:
            return str(self.a)
        b = "" if self.b == 1 else ("-" if self.b == -1 else f"{self.b}*")
        if self.a == 0:
            return f"{b}sqrt({self.r})"
        if self.b < 0:
            b = "-" if self.b == -1 else f"-{-self.b}*"
            return f"{self.a}{b}sqrt({self.r})"
        return f"{self.a}+{b}sqrt({self.r})"

    def __repr__(self):
        return f"Surd({self})"

    def to_json(self, precision: int | None = None):
        if self.r == 0:
            return time_to_json(self.a)
        return {"expr": str(self), "upper": time_to_json(self.upper_bound(precision))}

    @classmethod
    def from_json(cls, obj) -> "Surd":
        if isinstance(obj, dict) and "expr" in obj:
            return cls.parse(obj["expr"])
        return cls(time_from_json(obj))


SQRT2_GAMMA = Surd(1, 1, 2)
