"""Kazhdan-constant conversions and Weyl-sum equidistribution experiments.

Rational inputs give exact answers of the form c * sqrt(r) with c, r rational;
float inputs give floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .circle import UnitPoint, power, unit_point_from_rational
from .sequences import Realization, SequenceSpec

SQRT2 = math.sqrt(2)


@dataclass(frozen=True)
class Surd:
    """The exact number coefficient * sqrt(radicand), both rational, radicand >= 0."""

    coefficient: Fraction
    radicand: Fraction = Fraction(1)

    def __post_init__(self):
        c, r = Fraction(self.coefficient), Fraction(self.radicand)
        if r < 0:
            raise ValueError("negative radicand")
        if r == 0 or c == 0:
            c, r = Fraction(0), Fraction(1)
        else:
            # pull out square factors of numerator and denominator when cheap
            num, den = _split_square(r.numerator), _split_square(r.denominator)
            c = c * Fraction(num[0], den[0])
            r = Fraction(num[1], den[1])
            if r.denominator != 1:
                # sqrt(a/b) = sqrt(ab)/b keeps the radicand an integer
                c, r = c / r.denominator, Fraction(r.numerator * r.denominator)
                sq = _split_square(r.numerator)
                c, r = c * sq[0], Fraction(sq[1])
        object.__setattr__(self, "coefficient", c)
        object.__setattr__(self, "radicand", r)

    @classmethod
    def sqrt(cls, x) -> "Surd":
        return cls(Fraction(1), Fraction(x))

    def square(self) -> Fraction:
        return self.coefficient**2 * self.radicand

    def __float__(self) -> float:
        return float(self.coefficient) * math.sqrt(self.radicand)

    def __eq__(self, other):
        if isinstance(other, Surd):
            return self.coefficient == other.coefficient and self.radicand == other.radicand
        if isinstance(other, (int, Fraction)):
            return self.radicand == 1 and self.coefficient == other
        return NotImplemented

    def __hash__(self):
        return hash((self.coefficient, self.radicand))

    def __str__(self):
        if self.radicand == 1:
            return str(self.coefficient)
        c = "" if self.coefficient == 1 else f"{self.coefficient}*"
        return f"{c}sqrt({self.radicand})"

    def to_json(self) -> dict:
        return {"symbolic": str(self), "decimal": repr(float(self))}


def _split_square(n: int, limit: int = 10**4) -> tuple[int, int]:
    """n = a^2 * b with small square factors moved into a."""
    a, b = 1, n
    d = 2
    while d * d <= b and d <= limit:
        while b % (d * d) == 0:
            b //= d * d
            a *= d
        d += 1
    root = math.isqrt(b)
    if root * root == b:
        a, b = a * root, 1
    return a, b


Number = "Fraction | Surd | float"


def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, Surd))


def _sqrt(x):
    if isinstance(x, (int, Fraction)):
        return Surd.sqrt(x)
    return math.sqrt(x)


def _value(x) -> float:
    return float(x)


def _check_closed(name: str, x, lo, hi) -> None:
    v = float(x)
    if not lo <= v <= hi:
        raise ValueError(f"{name} = {x} outside [{lo}, {hi}]")


# -- Kazhdan calculus ---------------------------------------------------------------


def delta_to_modified_kazhdan_upper(delta):
    """Upper bound sqrt(2(1 - delta)) on the modified Kazhdan constant.

    Applies when a continuous probability measure has all coefficients along
    the set at least delta.
    """
    _check_closed("delta", delta, 0, 1)
    if isinstance(delta, Surd):
        delta = float(delta)
    return _sqrt(2 * (1 - (Fraction(delta) if isinstance(delta, int) else delta)))


def _square(x):
    return x.square() if isinstance(x, Surd) else x * x


def gamma_from_epsilon(epsilon):
    _check_closed("epsilon", epsilon, 0, SQRT2)
    return _square(epsilon) / 2


def delta_from_gamma(gamma):
    _check_closed("gamma", gamma, 0, 1)
    return _sqrt(1 - gamma)


def gamma_from_delta(delta):
    _check_closed("delta", delta, 0, 1)
    if isinstance(delta, Surd):
        if delta.radicand != 1:
            return 1 - float(delta)
        delta = delta.coefficient
    return 1 - delta


def epsilon_from_gamma(gamma):
    _check_closed("gamma", gamma, 0, 1)
    return _sqrt(2 * gamma)


def kazhdan_conversions(*, epsilon=None, gamma=None, delta=None) -> dict:
    """Given exactly one of epsilon, gamma, delta, report the other two.

    The delta -> gamma direction (gamma = 1 - delta) and the gamma -> delta
    direction (delta = sqrt(1 - gamma)) are not inverse to each other, so both
    are reported when relevant.
    """
    given = [k for k, v in (("epsilon", epsilon), ("gamma", gamma), ("delta", delta)) if v is not None]
    if len(given) != 1:
        raise ValueError("pass exactly one of epsilon, gamma, delta")
    out = {"input": given[0]}
    if epsilon is not None:
        g = gamma_from_epsilon(epsilon)
        out.update(epsilon=epsilon, gamma=g, delta=delta_from_gamma(g))
    elif gamma is not None:
        out.update(gamma=gamma, delta=delta_from_gamma(gamma), epsilon=epsilon_from_gamma(gamma))
    else:
        g = gamma_from_delta(delta)
        out.update(delta=delta, gamma=g, epsilon=epsilon_from_gamma(g),
                   delta_from_gamma=delta_from_gamma(g))
    return out


def invariant_coeff_bound(kappa_tilde):
    """Bound 1 - k^2/2 on |mu^(j)|, j != 0, for continuous measures invariant under x2 and x3."""
    _check_closed("kappa_tilde", kappa_tilde, 0, SQRT2)
    return 1 - _square(kappa_tilde) / 2


def aud_lower_bound(nu1: complex) -> float:
    """Lower bound sqrt(2(1 - Re nu^(1))) on the modified Kazhdan constant."""
    if abs(nu1) > 1 + 1e-12:
        raise ValueError("a probability measure has |nu^(1)| <= 1")
    return math.sqrt(max(0.0, 2 * (1 - complex(nu1).real)))


@dataclass(frozen=True)
class KazhdanBound:
    set_description: str
    kind: str  # "upper" or "lower"
    constant: str  # "kappa" or "kappa_tilde"
    value: object
    witness: str

    def __post_init__(self):
        if self.kind not in ("upper", "lower") or self.constant not in ("kappa", "kappa_tilde"):
            raise ValueError("bad bound kind or constant")
        if not -1e-15 <= float(self.value) <= SQRT2 + 1e-15:
            raise ValueError(f"Kazhdan bound {self.value} outside [0, sqrt 2]")

    def to_json(self) -> dict:
        v = self.value.to_json() if isinstance(self.value, Surd) else {
            "symbolic": str(self.value), "decimal": repr(float(self.value))}
        return {"set": self.set_description, "kind": self.kind, "constant": self.constant,
                "value": v, "witness": self.witness}


def bound_from_delta(delta, set_description: str, witness: str) -> KazhdanBound:
    return KazhdanBound(set_description, "upper", "kappa_tilde", delta_to_modified_kazhdan_upper(delta), witness)


# -- Weyl sums ----------------------------------------------------------------------


@dataclass
class WeylResult:
    average: complex
    partial_averages: np.ndarray = field(repr=False)
    values_used: int = 0

    def to_csv(self) -> str:
        lines = ["n,re,im,abs"]
        for n, z in enumerate(self.partial_averages, 1):
            lines.append(f"{n},{z.real!r},{z.imag!r},{abs(z)!r}")
        return "\n".join(lines) + "\n"


def weyl_phases(seq: SequenceSpec, theta: UnitPoint, m: int, count: int) -> np.ndarray:
    """e^{2 pi i m n_k theta} for the first ``count`` terms, exact phases for rational theta."""
    terms = Realization(seq).take(count)
    if len(terms) < count:
        raise ValueError(f"sequence has only {len(terms)} terms")
    base = power(theta, m)
    if base.is_rational:
        a, q = base.angle.numerator, base.angle.denominator
        residues = np.fromiter(((a * (t.value % q)) % q / q for t in terms), dtype=float, count=count)
        return np.exp(2j * np.pi * residues)
    out = np.empty(count, dtype=complex)
    for k, t in enumerate(terms):
        out[k] = power(base, t.value).to_complex()
    return out


def weyl_sum(seq: SequenceSpec, theta: UnitPoint, m: int, count: int) -> WeylResult:
    """Average of e^{2 pi i m n_k theta} over the first ``count`` terms, with all partial averages."""
    if count < 1:
        raise ValueError("need at least one term")
    phases = weyl_phases(seq, theta, m, count)
    partial = np.cumsum(phases) / np.arange(1, count + 1)
    return WeylResult(complex(partial[-1]), partial, count)


def aud_nonuniform_witness(seq: SequenceSpec, theta: UnitPoint, modes: Sequence[int], count: int,
                           tol: float = 0.2, checkpoints: Sequence[int] = ()) -> dict:
    """Flag theta when some mode's Weyl averages stay above ``tol`` over the final half of the prefix.

    Lebesgue measure has nu^(m) = 0 for m != 0, so persistently large averages
    witness that (n_k theta) is not uniformly distributed.  Any extra
    ``checkpoints`` must also stay above ``tol``.  Conclusions are limited to
    the computed prefix.
    """
    if any(m == 0 for m in modes):
        raise ValueError("modes must be nonzero")
    report = {"count": count, "tol": tol, "prefix_limited": True, "modes": []}
    for m in modes:
        res = weyl_sum(seq, theta, m, count)
        mags = np.abs(res.partial_averages)
        tail = mags[count // 2:] if count > 1 else mags
        extra = [float(mags[c - 1]) for c in checkpoints if 1 <= c <= count]
        flagged = bool(np.all(tail > tol)) and all(v > tol for v in extra)
        report["modes"].append({
            "m": m,
            "final_average": [res.average.real, res.average.imag],
            "min_abs_final_half": float(tail.min()),
            "checkpoints": {int(c): v for c, v in zip(checkpoints, extra)},
            "flagged": flagged,
        })
    report["flagged"] = any(entry["flagged"] for entry in report["modes"])
    return report


def dyadic_angle(a: int, level: int) -> UnitPoint:
    return unit_point_from_rational(a, 2**level)


theorem_b_conversions = kazhdan_conversions  # name used by the interface contract
