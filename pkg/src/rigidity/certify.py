"""Rigorous comparisons of weighted chord sums and coefficient values.

Values are first evaluated in double precision with an explicit a priori error
bound.  Only when the float value is within that bound of the threshold is the
quantity re-evaluated with mpmath interval arithmetic.
"""

from __future__ import annotations

from contextlib import contextmanager
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from mpmath import iv

UNIT_ROUNDOFF = 2.0 ** -53
INTERVAL_BITS = 192


class Undecided(ArithmeticError):
    """Interval evaluation could not separate a value from its threshold."""


def float_error(terms: int, scale: float = 1.0) -> float:
    """Bound on |float sum - exact sum| for a weighted sum of chords or phases.

    Each term w*2|sin(pi x)| picks up at most ~31 roundings relative to w
    (weight conversion, angle division, pi product, sin, product) and
    recursive summation adds at most 2u per term; total weight is at most
    ``scale``.
    """
    return (2 * terms + 40) * UNIT_ROUNDOFF * 1.01 * max(scale, 1.0)


@contextmanager
def interval_precision(bits: int = INTERVAL_BITS):
    old = iv.prec
    iv.prec = bits
    try:
        yield
    finally:
        iv.prec = old


def reduced_fraction(r: int, q: int) -> float:
    """min(r, q - r)/q as a correctly rounded float."""
    return min(r, q - r) / q


def chord_floats(residues: Sequence[int], q: int) -> np.ndarray:
    """2|sin(pi r/q)| for each residue r modulo q."""
    x = np.fromiter((min(r, q - r) / q for r in residues), dtype=float, count=len(residues))
    return 2.0 * np.sin(np.pi * x)


def _iv_fraction(x: Fraction):
    return iv.mpf(x.numerator) / x.denominator


def _iv_weight(w):
    if isinstance(w, Fraction):
        return _iv_fraction(w)
    if isinstance(w, int):
        return iv.mpf(w)
    # float weights are taken at face value (experimental real mode)
    return iv.mpf(w)


def chord_interval(r: int, q: int, slack: Fraction = Fraction(0)):
    """Enclosure of 2|sin(pi r/q)|; ``slack`` widens the angle for real points."""
    m = min(r, q - r)
    x = iv.mpf(m) / q
    if slack:
        x = x + _iv_fraction(slack) * iv.mpf([-1, 1])
    return 2 * abs(iv.sin(iv.pi * x))


def weighted_chord_interval(terms: Iterable[tuple]):
    """Enclosure of sum w * chord(r/q) over (w, r, q) triples."""
    total = iv.mpf(0)
    for w, r, q in terms:
        if r % q:
            total += _iv_weight(w) * chord_interval(r % q, q)
    return total


def deviation_interval(terms: Iterable[tuple], analytic_re: float = 0.0,
                       analytic_im: float = 0.0, analytic_err: float = 0.0):
    """Enclosure of |sum w e^{2 pi i r/q} + analytic - 1|."""
    re = iv.mpf(-1) + analytic_re + iv.mpf([-analytic_err, analytic_err])
    im = iv.mpf(analytic_im) + iv.mpf([-analytic_err, analytic_err])
    for w, r, q in terms:
        t = 2 * iv.pi * (iv.mpf(r % q) / q)
        wi = _iv_weight(w)
        re += wi * iv.cos(t)
        im += wi * iv.sin(t)
    return iv.sqrt(re * re + im * im)


def decide_less(approx: float, err: float, bound, refine) -> bool:
    """Decide ``value < bound`` given ``|approx - value| <= err``.

    ``refine`` returns an interval enclosure of the value and is only called
    when the float evidence is inconclusive.
    """
    b = float(bound)
    guard = abs(b) * 4 * UNIT_ROUNDOFF
    if approx + err < b - guard:
        return True
    if approx - err > b + guard:
        return False
    with interval_precision():
        enclosure = refine()
        target = _iv_fraction(Fraction(bound)) if not isinstance(bound, float) else iv.mpf(bound)
        verdict = enclosure < target
    if verdict is None:
        raise Undecided(f"value {approx!r} is not separable from {bound} at {INTERVAL_BITS} bits")
    return bool(verdict)


def decide_greater(approx: float, err: float, bound, refine) -> bool:
    """Decide ``value > bound`` given ``|approx - value| <= err``."""
    b = float(bound)
    guard = abs(b) * 4 * UNIT_ROUNDOFF
    if approx - err > b + guard:
        return True
    if approx + err < b - guard:
        return False
    with interval_precision():
        enclosure = refine()
        target = _iv_fraction(Fraction(bound)) if not isinstance(bound, float) else iv.mpf(bound)
        verdict = enclosure > target
    if verdict is None:
        raise Undecided(f"value {approx!r} is not separable from {bound} at {INTERVAL_BITS} bits")
    return bool(verdict)

