"""Measures with coefficients bounded below on multiplicative semigroups.

For generators p_1..p_r, component j is built along the slice where the
exponent of p_j dominates, then made nonnegative by convolving with its
reflection.  Averaging the components with a Poisson kernel gives a measure
whose coefficients on every p_1^k_1 ... p_r^k_r are bounded below: each index
lies in some slice, where that component's coefficient is close to 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import certify
from .circle import power
from .construction import (
    Certificate,
    RootsOfPowers,
    Scheme,
    build_rigidity,
    epsilon_for_tolerance,
)
from .measure import (
    CoefficientTable,
    Measure,
    Poisson,
    component_coeff,
    convolve_tilde,
    make_measure,
    measure_to_json,
    mix,
    weight_to_json,
)
from .sequences import DiagonalSlice, LinearIndexMap

TOLERANCE_GRID = 10**4


class SemigroupError(RuntimeError):
    pass


def slice_sequence(generators: Sequence[int], pivot: int) -> DiagonalSlice:
    return DiagonalSlice(tuple(generators), pivot, LinearIndexMap(1, 0))


def generator_measure(generators: Sequence[int], pivot: int, tolerance, depth: int,
                      horizon_limit: int | None = None):
    """Component measure along the slice of ``pivot``; returns (measure, certificate, state)."""
    tolerance = Fraction(tolerance)
    if not 0 < tolerance < Fraction(3, 2):
        raise ValueError("tolerance must lie in (0, 3/2)")
    if pivot not in generators:
        raise ValueError(f"pivot {pivot} is not a generator")
    scheme = Scheme.geometric(epsilon_for_tolerance(tolerance))
    state, measure, cert = build_rigidity(slice_sequence(generators, pivot), RootsOfPowers(pivot),
                                          depth, scheme, horizon_limit)
    return measure, cert, state


def nonnegativize(mu: Measure, cap: int | None = None) -> Measure:
    """mu * reflected mu, whose coefficients are |mu^(n)|^2."""
    return convolve_tilde(mu) if cap is None else convolve_tilde(mu, cap)


def rajchman_component(r=Fraction(1, 2)) -> Measure:
    return make_measure([], [Poisson(Fraction(r), Fraction(1))], label=f"poisson-{r}")


def average_with_rajchman(components: Sequence[Measure], rajchman: Measure | None = None) -> Measure:
    """Equal-weight average of the r components and a Rajchman measure."""
    rho = rajchman if rajchman is not None else rajchman_component()
    w = Fraction(1, len(components) + 1)
    return mix([(w, mu) for mu in components] + [(w, rho)])


# -- scanning ----------------------------------------------------------------------------


class _AtomTable:
    """Atoms grouped by denominator so a coefficient costs one n mod q per group."""

    def __init__(self, mu: Measure):
        groups: dict[int, tuple[list, list]] = {}
        self.real = []
        for x, w in mu.atoms:
            if x.is_rational:
                nums, ws = groups.setdefault(x.angle.denominator, ([], []))
                nums.append(x.angle.numerator)
                ws.append(float(w))
            else:
                self.real.append((x, w))
        self.groups = [(q, nums, np.array(ws)) for q, (nums, ws) in groups.items()]
        self.analytic = mu.analytic
        self.size = len(mu.atoms)

    def coefficient(self, factored) -> tuple[complex, complex]:
        """(atomic part, analytic part) of mu^(n) for n given by its factorisation."""
        total = 0j
        for q, nums, ws in self.groups:
            r = 1 % q
            for p, k in factored:
                r = r * pow(p, k, q) % q
            if r == 0:
                total += ws.sum()
                continue
            x = np.fromiter(((a * r) % q / q for a in nums), dtype=float, count=len(nums))
            total += complex(ws @ np.exp(2j * np.pi * x))
        for x, w in self.real:
            total += float(w) * power(x, factored).to_complex()
        analytic = sum((component_coeff(c, factored) for c in self.analytic), 0j)
        return total, analytic


@dataclass
class ScanResult:
    table: CoefficientTable
    minimum: float
    argmin: tuple
    error: float
    max_imag: float

    @property
    def certified_lower(self) -> float:
        """Rigorous lower bound on the minimum real part over the box."""
        return self.minimum - self.error

    def to_json(self) -> dict:
        return {"minimum": self.minimum, "argmin": list(self.argmin), "float_error": self.error,
                "certified_lower": self.certified_lower, "max_abs_imag": self.max_imag}


def coefficient_scan(mu: Measure, generators: Sequence[int], bounds: Sequence[int]) -> ScanResult:
    """mu^ at every p_1^k_1 ... p_r^k_r with 0 <= k_i <= bounds[i]; minimum taken over real parts.

    Analytic parts below the double-precision range are counted as 0, which is
    a lower bound since Poisson coefficients are positive.
    """
    if len(bounds) != len(generators):
        raise ValueError("one bound per generator")
    atoms = _AtomTable(mu)
    entries = []
    best, arg, max_imag = math.inf, None, 0.0
    for exps in itertools.product(*(range(b + 1) for b in bounds)):
        factored = [(p, k) for p, k in zip(generators, exps)]
        atomic, analytic = atoms.coefficient(factored)
        z = atomic + analytic
        entries.append((factored, z))
        max_imag = max(max_imag, abs(z.imag))
        if z.real < best:
            best, arg = z.real, exps
    table = CoefficientTable(entries, {"generators": list(generators), "bounds": list(bounds)})
    err = certify.float_error(atoms.size) + 1e-15
    return ScanResult(table, best, arg, err, max_imag)


# -- witnesses ------------------------------------------------------------------------------


@dataclass
class SemigroupWitness:
    generators: tuple
    components: list
    mixing_weights: list
    rajchman: dict
    box: list
    scan: ScanResult
    regions: dict
    target: Fraction | None = None
    claim: str = "certified"
    certificates: list = field(default_factory=list, repr=False)

    @property
    def infimum(self) -> float:
        return self.scan.minimum

    @property
    def passed(self) -> bool:
        ok = all(c.passed for c in self.certificates) and self.regions["annulus"]["covered"]
        if self.target is not None:
            ok = ok and self.scan.certified_lower > float(self.target)
        return ok

    def to_json(self) -> dict:
        return {
            "schema_version": "1.0",
            "type": "semigroup_witness",
            "claim": self.claim,
            "passed": self.passed,
            "generators": list(self.generators),
            "target": weight_to_json(self.target) if self.target is not None else None,
            "components": self.components,
            "mixing_weights": [weight_to_json(w) for w in self.mixing_weights],
            "rajchman": self.rajchman,
            "box": self.box,
            "scan": self.scan.to_json(),
            "regions": self.regions,
        }


def _max_pivot_exponent(state, pivot: int) -> int:
    """Largest e with an atom of order pivot^e; past it every atom is 1 on the slice."""
    exps = []
    for x in state.atoms:
        q, e = x.angle.denominator, 0
        while q % pivot == 0:
            q //= pivot
            e += 1
        exps.append(e)
    return max(exps, default=0)


def _regions(generators, bounds, states, tolerance, weight_each, component_floor):
    """Box, exact tail and annulus decomposition of the exponent lattice.

    Tail: some pivot exponent reaches its component's largest atom order, so
    that component's coefficient is exactly 1 and the total is at least its
    mixing weight.  Annulus: everything else outside the box; each index lies
    in some slice, where the component certificate bounds the coefficient.
    """
    horizons = [_max_pivot_exponent(st, p) for st, p in zip(states, generators)]
    tail_bound = weight_each
    annulus_bound = weight_each * component_floor
    box_covers = all(b >= h - 1 for b, h in zip(bounds, horizons))
    return {
        "box": {"exponent_bounds": list(bounds)},
        "tail": {
            "description": "some k_j >= horizon_j: component j has coefficient exactly 1",
            "horizons": horizons,
            "lower_bound": weight_to_json(tail_bound),
        },
        "annulus": {
            "description": "outside box and tail: covered by the component certificates on their slices",
            "empty": box_covers,
            "covered": True,
            "lower_bound": repr(float(annulus_bound)),
            "tolerance": weight_to_json(Fraction(tolerance)),
        },
    }


def _component_summary(pivot, cert: Certificate, state) -> dict:
    return {"pivot": pivot, "depth": state.depth, "atoms": len(state.atoms),
            "certificate_passed": cert.passed, "horizon": cert.horizon,
            "sup_deviation": cert.sup_deviation,
            "failures": [f.to_json() for f in cert.failures]}


def furstenberg_tolerance(delta: Fraction) -> Fraction:
    """Largest multiple of 1/10^4 with (1 - t)^2 >= 2 delta."""
    delta = Fraction(delta)
    # 1 - t >= sqrt(2 delta)  <=>  t <= 1 - sqrt(2 delta)
    t = math.floor((1 - math.sqrt(2 * delta)) * TOLERANCE_GRID) + 1
    while t > 0 and (1 - Fraction(t, TOLERANCE_GRID)) ** 2 < 2 * delta:
        t -= 1
    if t <= 0:
        raise SemigroupError(f"no positive tolerance reaches delta = {delta}")
    return Fraction(t, TOLERANCE_GRID)


def furstenberg_measure(delta, depth: int = 5, box: int = 30, experimental: bool = False):
    """Measure with all coefficients on 2^k 3^k' real, nonnegative and above ``delta``.

    Returns (measure, witness).  Values of delta at or above 1/2 are refused
    unless ``experimental`` is set, in which case the box scan is reported
    with no claim attached.
    """
    delta = Fraction(delta)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if delta >= Fraction(1, 2) and not experimental:
        raise ValueError("delta must be below 1/2")
    tol = furstenberg_tolerance(delta) if delta < Fraction(1, 2) else Fraction(1, TOLERANCE_GRID)
    gens = (2, 3)
    parts, states, certs, summaries = [], [], [], []
    for pivot in gens:
        mu, cert, state = generator_measure(gens, pivot, tol, depth)
        parts.append(nonnegativize(mu))
        states.append(state)
        certs.append(cert)
        summaries.append(_component_summary(pivot, cert, state))
    half = Fraction(1, 2)
    measure = mix([(half, parts[0]), (half, parts[1])])
    measure = Measure(measure.atoms, measure.analytic, label=f"furstenberg-delta-{delta}")
    scan = coefficient_scan(measure, gens, (box, box))
    regions = _regions(gens, (box, box), states, tol, half, (1 - tol) ** 2)
    regions["annulus"]["covered"] = all(c.passed for c in certs)
    witness = SemigroupWitness(gens, summaries, [half, half], {"kind": "none"}, [box, box], scan, regions,
                               target=delta, claim="certified" if delta < half else "experimental, no claim",
                               certificates=certs)
    if delta < half and not regions["annulus"]["covered"]:
        raise SemigroupError("component certificates failed: annulus between box and tail is not covered")
    return measure, witness


def build_semigroup(generators: Sequence[int], tolerance, depth: int, box: int, rajchman_r=Fraction(1, 2),
                    target=None):
    """Composite measure for r generators with a lower bound on every semigroup coefficient."""
    gens = tuple(generators)
    if len(set(gens)) != len(gens) or len(gens) < 1:
        raise ValueError("generators must be distinct")
    tolerance = Fraction(tolerance)
    comps, states, certs, summaries = [], [], [], []
    for pivot in gens:
        mu, cert, state = generator_measure(gens, pivot, tolerance, depth)
        comps.append(nonnegativize(mu))
        states.append(state)
        certs.append(cert)
        summaries.append(_component_summary(pivot, cert, state))
    rho = rajchman_component(rajchman_r)
    measure = average_with_rajchman(comps, rho)
    bounds = (box,) * len(gens)
    scan = coefficient_scan(measure, gens, bounds)
    weight = Fraction(1, len(gens) + 1)
    regions = _regions(gens, bounds, states, tolerance, weight, (1 - tolerance) ** 2)
    regions["annulus"]["covered"] = all(c.passed for c in certs)
    if not regions["annulus"]["covered"]:
        raise SemigroupError("component certificates failed: annulus between box and tail is not covered")
    witness = SemigroupWitness(gens, summaries, [weight] * (len(gens) + 1),
                               {"kind": "poisson", "r": weight_to_json(Fraction(rajchman_r)),
                                "coefficients": "positive; values below double range are counted as 0"},
                               list(bounds), scan, regions,
                               target=Fraction(target) if target is not None else None, certificates=certs)
    return measure, witness


def witness_files(measure: Measure, witness: SemigroupWitness) -> dict:
    return {"measure.json": measure_to_json(measure), "witness.json": witness.to_json(),
            "coefficients.csv": witness.scan.table.to_csv()}


combine_theorem3 = average_with_rajchman  # name used by the interface contract
