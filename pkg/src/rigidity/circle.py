"""Points of the unit circle stored as angles modulo one.

A point is either a rational angle ``a/q`` (a root of unity) or a real angle
held in fixed point with an explicit number of bits.  Rational powers are exact
for any exponent, including exponents given only through their factorisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import mpmath

Exponent = Union[int, Sequence[Sequence[int]]]

REAL_TOLERANCE = 1e-12
GUARD_BITS = 50
DEFAULT_REAL_BITS = 128


class PrecisionError(ArithmeticError):
    """A real angle does not carry enough bits for the requested operation."""


def is_factored(n: Exponent) -> bool:
    return not isinstance(n, int)


def factored_value(n: Exponent) -> int:
    if isinstance(n, int):
        return n
    value = 1
    for p, k in n:
        value *= int(p) ** int(k)
    return value


def exponent_mod(n: Exponent, q: int) -> int:
    """n mod q without materialising a factored n."""
    if isinstance(n, int):
        return n % q
    r = 1 % q
    for p, k in n:
        r = (r * pow(int(p), int(k), q)) % q
    return r


def exponent_log2(n: Exponent) -> float:
    if isinstance(n, int):
        return math.log2(n) if n > 0 else 0.0
    return sum(int(k) * math.log2(int(p)) for p, k in n if int(k) > 0)


@dataclass(frozen=True)
class RealAngle:
    """Angle approximately ``fixed / 2**bits`` with error at most ``2**-bits``."""

    fixed: int
    bits: int

    def __post_init__(self) -> None:
        if not 0 <= self.fixed < (1 << self.bits):
            raise ValueError("fixed-point angle must lie in [0, 2**bits)")

    def __float__(self) -> float:
        return self.fixed / (1 << self.bits)


@dataclass(frozen=True, eq=False)
class UnitPoint:
    """A point e^{2 pi i angle} of the unit circle."""

    angle: Union[Fraction, RealAngle]

    @property
    def is_rational(self) -> bool:
        return isinstance(self.angle, Fraction)

    @property
    def order(self) -> int | None:
        """Multiplicative order for roots of unity, None for real angles."""
        return self.angle.denominator if self.is_rational else None

    def angle_float(self) -> float:
        return float(self.angle)

    def to_complex(self) -> complex:
        t = 2 * math.pi * self._reduced_float()
        return complex(math.cos(t), math.sin(t))

    def _reduced_float(self) -> float:
        # signed representative in [-1/2, 1/2) keeps cos/sin arguments small
        if self.is_rational:
            a, q = self.angle.numerator, self.angle.denominator
            if 2 * a >= q:
                a -= q
            return a / q
        f, b = self.angle.fixed, self.angle.bits
        if 2 * f >= (1 << b):
            f -= 1 << b
        return f / (1 << b)

    def is_one(self) -> bool:
        return self == ONE

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UnitPoint):
            return NotImplemented
        if self.is_rational and other.is_rational:
            return self.angle == other.angle
        d = abs(self.angle_float() - other.angle_float()) % 1.0
        return min(d, 1.0 - d) <= REAL_TOLERANCE

    def __hash__(self) -> int:
        # real points compare with a tolerance, so they cannot hash by value
        return hash(self.angle) if self.is_rational else 0

    def __mul__(self, other: "UnitPoint") -> "UnitPoint":
        if self.is_rational and other.is_rational:
            return UnitPoint(_mod1(self.angle + other.angle))
        bits = min(_bits_of(self), _bits_of(other))
        total = (_fixed_at(self, bits) + _fixed_at(other, bits)) % (1 << bits)
        return UnitPoint(RealAngle(total, bits))

    def conjugate(self) -> "UnitPoint":
        if self.is_rational:
            return UnitPoint(_mod1(-self.angle))
        a = self.angle
        return UnitPoint(RealAngle((-a.fixed) % (1 << a.bits), a.bits))

    def __repr__(self) -> str:
        if self.is_rational:
            return f"UnitPoint({self.angle.numerator}/{self.angle.denominator})"
        return f"UnitPoint(real~{self.angle_float():.17g})"


def _mod1(x: Fraction) -> Fraction:
    return x - (x.numerator // x.denominator)


def _bits_of(x: UnitPoint) -> int:
    return x.angle.bits if not x.is_rational else 1 << 30


def _fixed_at(x: UnitPoint, bits: int) -> int:
    if x.is_rational:
        a = x.angle
        return (a.numerator << bits) // a.denominator
    return x.angle.fixed >> (x.angle.bits - bits)


def unit_point_from_rational(a: int, q: int) -> UnitPoint:
    if q == 0:
        raise ValueError("denominator must be positive")
    if q < 0:
        a, q = -a, -q
    return UnitPoint(_mod1(Fraction(a, q)))


def unit_point_from_real(theta, bits: int = DEFAULT_REAL_BITS) -> UnitPoint:
    """Real angle from a float, Fraction, decimal string or mpmath number."""
    if isinstance(theta, Fraction):
        frac = _mod1(theta)
        return UnitPoint(RealAngle((frac.numerator << bits) // frac.denominator, bits))
    with mpmath.workprec(bits + 32):
        x = mpmath.mpf(theta)
        x = x - mpmath.floor(x)
        fixed = int(mpmath.floor(x * mpmath.mpf(2) ** bits))
    return UnitPoint(RealAngle(fixed % (1 << bits), bits))


ONE = unit_point_from_rational(0, 1)


def chord_distance(x: UnitPoint, y: UnitPoint) -> float:
    """|x - y| = 2|sin(pi (alpha - beta))|."""
    if x.is_rational and y.is_rational:
        d = _mod1(x.angle - y.angle)
        if d > Fraction(1, 2):
            d = 1 - d
        return 2.0 * math.sin(math.pi * float(d))
    d = abs(x.angle_float() - y.angle_float()) % 1.0
    return 2.0 * math.sin(math.pi * min(d, 1.0 - d))


def power(x: UnitPoint, n: Exponent) -> UnitPoint:
    """x**n, exact for rational angles; negative plain integers are allowed."""
    if isinstance(n, int) and n < 0:
        return power(x, -n).conjugate()
    if x.is_rational:
        q = x.angle.denominator
        r = (x.angle.numerator * exponent_mod(n, q)) % q
        return UnitPoint(Fraction(r, q))
    a = x.angle
    if exponent_log2(n) + GUARD_BITS > a.bits:
        raise PrecisionError(
            f"real angle carries {a.bits} bits, exponent needs "
            f"{math.ceil(exponent_log2(n)) + GUARD_BITS}"
        )
    modulus = 1 << a.bits
    return UnitPoint(RealAngle((a.fixed * exponent_mod(n, modulus)) % modulus, a.bits))


def point_to_json(x: UnitPoint) -> dict:
    if x.is_rational:
        return {"rational": {"num": x.angle.numerator, "den": x.angle.denominator}}
    a = x.angle
    digits = math.ceil(a.bits * math.log10(2)) + 3
    with mpmath.workprec(a.bits + 16):
        text = mpmath.nstr(mpmath.mpf(a.fixed) / mpmath.mpf(2) ** a.bits, digits,
                           min_fixed=-math.inf, max_fixed=math.inf)
    return {"real": text, "bits": a.bits}


def point_from_json(obj: dict) -> UnitPoint:
    if "rational" in obj:
        r = obj["rational"]
        return unit_point_from_rational(int(r["num"]), int(r["den"]))
    if "real" in obj:
        text = str(obj["real"])
        bits = int(obj.get("bits", max(53, int(len(text) * 3.32))))
        return unit_point_from_real(text, bits)
    raise ValueError(f"not a unit point: {obj!r}")


def factored_to_json(n: Sequence[Sequence[int]]) -> list:
    return [[int(p), int(k)] for p, k in n]
