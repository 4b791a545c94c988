"""Probability measures on the circle: weighted atoms plus closed-form parts.

Analytic components are the Poisson kernel P_r (coefficients r^|n|), Lebesgue
measure, and rotated Poisson kernels (coefficients r^|n| beta^n), which is what
convolving atoms against a Poisson kernel produces.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

from .circle import (
    ONE,
    Exponent,
    UnitPoint,
    chord_distance,
    exponent_log2,
    exponent_mod,
    factored_value,
    point_from_json,
    point_to_json,
    power,
)

Weight = Union[Fraction, float]
REAL_MASS_TOLERANCE = 1e-12
DEFAULT_CONVOLUTION_CAP = 10**6
SERIES_TERMS = 100_000


class MeasureError(ValueError):
    pass


class SizeError(MeasureError):
    pass


class UnsupportedComponentError(MeasureError):
    pass


@dataclass(frozen=True)
class Poisson:
    r: Weight
    weight: Weight


@dataclass(frozen=True)
class Lebesgue:
    weight: Weight


@dataclass(frozen=True)
class RotatedPoisson:
    r: Weight
    base: UnitPoint
    weight: Weight


Component = Union[Poisson, Lebesgue, RotatedPoisson]


def _is_exact(w) -> bool:
    return isinstance(w, (int, Fraction))


@dataclass(frozen=True)
class Measure:
    atoms: tuple = ()
    analytic: tuple = ()
    label: str = field(default="", compare=False)

    @property
    def exact(self) -> bool:
        return all(_is_exact(w) for _, w in self.atoms) and all(
            _is_exact(c.weight) for c in self.analytic
        )

    def total_mass(self) -> Weight:
        return sum((w for _, w in self.atoms), Fraction(0)) + sum(
            (c.weight for c in self.analytic), Fraction(0)
        )

    def weight_of(self, point: UnitPoint) -> Weight:
        return sum((w for x, w in self.atoms if x == point), Fraction(0))


def _merge_atoms(pairs: Iterable[tuple]) -> tuple:
    exact: dict = {}
    loose: list = []
    for x, w in pairs:
        if x.is_rational:
            exact[x] = exact.get(x, 0) + w
            continue
        for idx, (y, v) in enumerate(loose):
            if x == y:
                loose[idx] = (y, v + w)
                break
        else:
            loose.append((x, w))
    return tuple(exact.items()) + tuple(loose)


def _component_key(c: Component):
    if isinstance(c, Lebesgue):
        return ("lebesgue",)
    if isinstance(c, Poisson):
        return ("poisson", c.r)
    return ("rotated_poisson", c.r, c.base)


def _with_weight(c: Component, w) -> Component:
    if isinstance(c, Lebesgue):
        return Lebesgue(w)
    if isinstance(c, Poisson):
        return Poisson(c.r, w)
    return RotatedPoisson(c.r, c.base, w)


def _canonical(c: Component) -> Component:
    if isinstance(c, RotatedPoisson) and c.base == ONE:
        return Poisson(c.r, c.weight)
    return c


def _merge_components(comps: Iterable[Component]) -> tuple:
    merged: dict = {}
    for c in map(_canonical, comps):
        key = _component_key(c)
        merged[key] = _with_weight(c, merged[key].weight + c.weight) if key in merged else c
    return tuple(merged.values())


def make_measure(atoms: Iterable[tuple], analytic: Iterable[Component] = (), label: str = "") -> Measure:
    """Validated measure; colliding atoms are merged by summing weights."""
    atoms = _merge_atoms(atoms)
    analytic = _merge_components(analytic)
    for x, w in atoms:
        if not w > 0:
            raise MeasureError(f"atom {x!r} has nonpositive weight {w}")
    for c in analytic:
        if not c.weight > 0:
            raise MeasureError(f"component {c!r} has nonpositive weight")
        if not isinstance(c, Lebesgue) and not 0 <= c.r < 1:
            raise MeasureError(f"Poisson radius {c.r} outside [0, 1)")
    mu = Measure(atoms, analytic, label)
    total = mu.total_mass()
    if mu.exact:
        if total != 1:
            raise MeasureError(f"total mass {total} is not 1")
    elif abs(float(total) - 1.0) > REAL_MASS_TOLERANCE:
        raise MeasureError(f"total mass {float(total)!r} is not 1")
    return mu


def dirac(point: UnitPoint = ONE) -> Measure:
    return make_measure([(point, Fraction(1))])


def _abs_exponent(n: Exponent) -> Exponent:
    return abs(n) if isinstance(n, int) else n


def _is_zero(n: Exponent) -> bool:
    return isinstance(n, int) and n == 0


def radius_power(r: Weight, n: Exponent) -> float:
    """r^|n| as a float; underflows cleanly to 0.0 for huge n."""
    if _is_zero(n):
        return 1.0
    if r == 0:
        return 0.0
    if exponent_log2(_abs_exponent(n)) > 1000:
        return 0.0
    return float(r) ** float(factored_value(_abs_exponent(n)))


def _phase(point: UnitPoint, n: Exponent) -> complex:
    return power(point, n).to_complex()


def component_coeff(c: Component, n: Exponent) -> complex:
    w = float(c.weight)
    if isinstance(c, Lebesgue):
        return complex(w) if _is_zero(n) else 0j
    rn = radius_power(c.r, n)
    if isinstance(c, Poisson):
        return complex(w * rn)
    return w * rn * _phase(c.base, n) if rn else 0j


def fourier_coeff(mu: Measure, n: Exponent) -> complex:
    """mu^(n) = integral of lambda^n; exact phases for rational atoms."""
    total = 0j
    for x, w in mu.atoms:
        total += float(w) * _phase(x, n)
    for c in mu.analytic:
        total += component_coeff(c, n)
    return total


def atom_residues(mu: Measure, n: Exponent) -> list:
    """(weight, r, q) with lambda^n = e^{2 pi i r/q} for each rational atom."""
    out = []
    for x, w in mu.atoms:
        if not x.is_rational:
            raise MeasureError("exact residues need rational atoms")
        q = x.angle.denominator
        out.append((w, (x.angle.numerator * exponent_mod(n, q)) % q, q))
    return out


def _series_distortion(r: float, n: Exponent, base: UnitPoint | None) -> float:
    """Integral of |lambda^n - 1| against a (rotated) Poisson kernel.

    Uses 2|sin(x/2)| = 4/pi - (8/pi) sum_m cos(m x)/(4m^2 - 1).
    """
    rn = radius_power(r, n)
    total = 0.0
    term = 1.0
    base_angle = float(power(base, n).angle) if base is not None else 0.0
    for m in range(1, SERIES_TERMS + 1):
        term *= rn
        piece = term / (4 * m * m - 1)
        if piece < 1e-18:
            break
        total += piece * math.cos(2 * math.pi * m * base_angle)
    return 4 / math.pi - 8 / math.pi * total


def distortion(mu: Measure, n: Exponent) -> float:
    """Integral of |lambda^n - 1| d mu; analytic parts via a cosine series."""
    if _is_zero(n):
        return 0.0
    total = 0.0
    for x, w in mu.atoms:
        total += float(w) * chord_distance(power(x, n), ONE)
    for c in mu.analytic:
        if isinstance(c, Lebesgue):
            total += float(c.weight) * 4 / math.pi
        elif isinstance(c, Poisson):
            total += float(c.weight) * _series_distortion(float(c.r), n, None)
        else:
            total += float(c.weight) * _series_distortion(float(c.r), n, c.base)
    return total


def reflect(mu: Measure) -> Measure:
    """The reflected measure A -> mu(conj A); coefficients become conjugates."""
    comps = [
        RotatedPoisson(c.r, c.base.conjugate(), c.weight) if isinstance(c, RotatedPoisson) else c
        for c in mu.analytic
    ]
    return Measure(tuple((x.conjugate(), w) for x, w in mu.atoms), tuple(comps), mu.label)


def _mass(c) -> Weight:
    return c.weight


def _convolve_pair(a, b) -> tuple:
    """Convolution of two weighted pieces: ('atom', x, w) or a Component."""
    if isinstance(a, tuple) and isinstance(b, tuple):
        return ("atom", a[1] * b[1], a[2] * b[2])
    if isinstance(b, tuple):
        a, b = b, a
    if isinstance(a, tuple):
        x, w = a[1], a[2]
        if isinstance(b, Lebesgue):
            return ("comp", Lebesgue(w * b.weight))
        if isinstance(b, Poisson):
            return ("comp", RotatedPoisson(b.r, x, w * b.weight))
        return ("comp", RotatedPoisson(b.r, x * b.base, w * b.weight))
    if isinstance(a, Lebesgue) or isinstance(b, Lebesgue):
        return ("comp", Lebesgue(a.weight * b.weight))
    base_a = a.base if isinstance(a, RotatedPoisson) else ONE
    base_b = b.base if isinstance(b, RotatedPoisson) else ONE
    return ("comp", RotatedPoisson(a.r * b.r, base_a * base_b, a.weight * b.weight))


def convolve(mu: Measure, nu: Measure, cap: int = DEFAULT_CONVOLUTION_CAP) -> Measure:
    """mu * nu; coefficients multiply."""
    if len(mu.atoms) * len(nu.atoms) > cap:
        raise SizeError(
            f"{len(mu.atoms)} x {len(nu.atoms)} product atoms exceed the cap of {cap}"
        )
    left = [("atom", x, w) for x, w in mu.atoms] + list(mu.analytic)
    right = [("atom", x, w) for x, w in nu.atoms] + list(nu.analytic)
    atoms: list = []
    comps: list = []
    for a in left:
        for b in right:
            kind, *rest = _convolve_pair(a, b)
            if kind == "atom":
                atoms.append((rest[0], rest[1]))
            else:
                comps.append(rest[0])
    return make_measure(atoms, comps, label=f"{mu.label}*{nu.label}".strip("*"))


def convolve_tilde(mu: Measure, cap: int = DEFAULT_CONVOLUTION_CAP) -> Measure:
    """mu * reflect(mu), whose coefficients are |mu^(n)|^2."""
    return convolve(mu, reflect(mu), cap)


def mix(parts: Sequence[tuple]) -> Measure:
    """Convex combination of (weight, measure) pairs."""
    if not parts:
        raise MeasureError("mix needs at least one part")
    total = sum((w for w, _ in parts), Fraction(0))
    exact = all(_is_exact(w) for w, _ in parts)
    if (exact and total != 1) or (not exact and abs(float(total) - 1) > REAL_MASS_TOLERANCE):
        raise MeasureError(f"mixing weights sum to {total}, not 1")
    atoms = []
    comps = []
    for w, mu in parts:
        if not w > 0:
            raise MeasureError("mixing weights must be positive")
        atoms.extend((x, w * v) for x, v in mu.atoms)
        comps.extend(_with_weight(c, w * c.weight) for c in mu.analytic)
    return make_measure(atoms, comps)


def pushforward_power(mu: Measure, p: int) -> Measure:
    """Image of mu under lambda -> lambda^p."""
    if p < 1:
        raise MeasureError("power must be at least 1")
    for c in mu.analytic:
        if not isinstance(c, Lebesgue):
            raise UnsupportedComponentError("pushforward of a Poisson component has no closed form here")
    return make_measure(((power(x, p), w) for x, w in mu.atoms), mu.analytic)


# -- serialisation -----------------------------------------------------------


def weight_to_json(w) -> str:
    if isinstance(w, Fraction):
        return f"{w.numerator}/{w.denominator}"
    if isinstance(w, int):
        return str(w)
    return repr(float(w))


def weight_from_json(text) -> Weight:
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return Fraction(text) if isinstance(text, int) else float(text)
    text = str(text)
    if "/" in text or text.lstrip("-").isdigit():
        return Fraction(text)
    return float(text)


def _component_to_json(c: Component) -> dict:
    if isinstance(c, Lebesgue):
        return {"kind": "lebesgue", "weight": weight_to_json(c.weight)}
    out = {"kind": "poisson", "r": weight_to_json(c.r), "weight": weight_to_json(c.weight)}
    if isinstance(c, RotatedPoisson):
        out["kind"] = "rotated_poisson"
        out["base"] = point_to_json(c.base)
    return out


def _component_from_json(obj: dict) -> Component:
    kind = obj["kind"]
    w = weight_from_json(obj["weight"])
    if kind == "lebesgue":
        return Lebesgue(w)
    r = weight_from_json(obj["r"])
    if kind == "poisson":
        return Poisson(r, w)
    if kind == "rotated_poisson":
        return RotatedPoisson(r, point_from_json(obj["base"]), w)
    raise MeasureError(f"unknown component kind {kind!r}")


def measure_to_json(mu: Measure) -> dict:
    return {
        "atoms": [{"point": point_to_json(x), "weight": weight_to_json(w)} for x, w in mu.atoms],
        "analytic": [_component_to_json(c) for c in mu.analytic],
    }


def measure_from_json(obj: dict) -> Measure:
    atoms = [(point_from_json(a["point"]), weight_from_json(a["weight"])) for a in obj.get("atoms", [])]
    comps = [_component_from_json(c) for c in obj.get("analytic", [])]
    return make_measure(atoms, comps)


# -- coefficient tables --------------------------------------------------------


@dataclass(frozen=True)
class CoefficientTable:
    entries: tuple  # (index, value) with index an int or factored list
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n_factored", "re", "im", "abs"])
        for n, value in self.entries:
            key = n if isinstance(n, int) else "*".join(f"{p}^{k}" for p, k in n)
            writer.writerow([key, repr(value.real), repr(value.imag), repr(abs(value))])
        return buf.getvalue()


def coefficient_table(mu: Measure, indices: Iterable[Exponent], **metadata) -> CoefficientTable:
    return CoefficientTable(tuple((n, fourier_coeff(mu, n)) for n in indices), dict(metadata))
