"""Inductive construction of atomic measures whose coefficients tend to 1.

Depth p holds 2^p atoms.  Going from depth p to p + 1 splits every atom
lambda_s in turn: a fraction of its mass moves to a new atom chosen in a dense
set very close to lambda_s.  Two weight schemes are supported:

* geometric: the new atom takes eps times the current mass of lambda_s;
* uniform: every atom of depth p + 1 ends with mass 2^-(p+1).

After each split a threshold index N is chosen past which the distortion
integral of |lambda^{n_k} - 1| is below the next target.  The builder keeps
the per-depth weight history and each atom's parent and step so the whole run
can be re-checked from its serialised form by ``verify_certificate``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
import numpy as np

from . import certify
from .circle import (
    ONE,
    GUARD_BITS,
    PrecisionError,
    UnitPoint,
    chord_distance,
    point_from_json,
    point_to_json,
    power,
    unit_point_from_rational,
    unit_point_from_real,
)
from .measure import Measure, make_measure, weight_to_json
from .sequences import (
    ConvergentDenominators,
    Realization,
    SequenceSpec,
    spec_from_json,
)

SCHEMA_VERSION = "1.0"
MAX_NEIGHBOR_STEPS = 5000
_CHUNKS = (32, 256, 2048)


class ConstructionError(RuntimeError):
    pass


class ThresholdError(ConstructionError):
    pass


# -- weight schemes ---------------------------------------------------------------


@dataclass(frozen=True)
class Scheme:
    kind: str  # "geometric" or "uniform"
    epsilon: Fraction | None = None

    def __post_init__(self):
        if self.kind == "geometric":
            eps = self.epsilon
            if not isinstance(eps, (Fraction, int)) or not 0 < eps < Fraction(1, 2):
                raise ValueError(f"geometric scheme needs a rational epsilon in (0, 1/2), got {eps!r}")
            object.__setattr__(self, "epsilon", Fraction(eps))
        elif self.kind != "uniform":
            raise ValueError(f"unknown weight scheme {self.kind!r}")

    @classmethod
    def geometric(cls, epsilon) -> "Scheme":
        return cls("geometric", Fraction(epsilon))

    @classmethod
    def uniform(cls) -> "Scheme":
        return cls("uniform")

    @property
    def primed(self) -> str:
        return "'" if self.kind == "uniform" else ""

    def level_bound(self, j: int) -> Fraction:
        """Distortion bound on [N_j, N_{j+1}]."""
        if self.kind == "uniform":
            return Fraction(2, 2**j)
        e = self.epsilon
        return 3 * e * (1 - e) ** j

    def tail_bound(self, p: int) -> Fraction:
        """Distortion bound past N_p for the depth-p measure."""
        if self.kind == "uniform":
            return Fraction(1, 2 ** (p + 1))
        e = self.epsilon
        return e * (1 - e) ** (p + 1)

    def threshold_target(self, p: int) -> Fraction:
        """Target for the running threshold while building depth p + 1."""
        return self.tail_bound(p + 1)

    def transfer(self, mass: Fraction, p: int) -> Fraction:
        return self.epsilon * mass if self.kind == "geometric" else Fraction(1, 2 ** (p + 1))

    def class_mass_bound(self, q: int) -> Fraction:
        return (1 - self.epsilon) ** q if self.kind == "geometric" else Fraction(1, 2**q)

    def atom_mass_bound(self, p: int) -> Fraction:
        return self.class_mass_bound(p)

    @property
    def tolerance(self) -> Fraction:
        """Uniform bound on |mu^(n_k) - 1| guaranteed by the level-0 bound."""
        return self.level_bound(0)

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.epsilon is not None:
            out["epsilon"] = weight_to_json(self.epsilon)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Scheme":
        if obj["kind"] == "uniform":
            return cls.uniform()
        return cls.geometric(Fraction(obj["epsilon"]))


def epsilon_for_tolerance(tolerance) -> Fraction:
    """Internal eps for a user tolerance: the construction delivers 3 eps."""
    return Fraction(tolerance) / 3


# -- dense sets -----------------------------------------------------------------


class DenseSet:
    """A dense subset of the circle together with a sequence of shrinking steps.

    ``step(index)`` is a point of the set tending to 1; neighbours are always
    ``parent * step(index)``.
    """

    kind = "abstract"

    def first_index(self) -> int:
        return 1

    def step(self, index: int) -> UnitPoint:
        raise NotImplementedError

    def contains(self, x: UnitPoint) -> bool:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class RootsOfPowers(DenseSet):
    base: int
    kind = "roots_of_powers"

    def __post_init__(self):
        if self.base < 2:
            raise ValueError("base must be at least 2")

    def step(self, index):
        return unit_point_from_rational(1, self.base**index)

    def contains(self, x):
        if not x.is_rational:
            return False
        q = x.angle.denominator
        for _ in range(q.bit_length() + 1):
            if q == 1:
                return True
            g = math.gcd(q, self.base)
            if g == 1:
                return False
            q //= g
        return q == 1

    def to_json(self):
        return {"kind": self.kind, "base": self.base}


@dataclass(frozen=True)
class AllRootsOfChain(DenseSet):
    """All n_k-th roots of unity for a divisibility chain (n_k)."""

    chain: SequenceSpec
    kind = "chain_roots"

    def _real(self) -> Realization:
        cache = self.__dict__.setdefault("_cache", {})
        if "real" not in cache:
            cache["real"] = Realization(self.chain)
        return cache["real"]

    def first_index(self):
        real = self._real()
        k = 0
        while real.take(k + 1)[k].value == 1:
            k += 1
        return k

    def step(self, index):
        return unit_point_from_rational(1, self._real().take(index + 1)[index].value)

    def contains(self, x):
        if not x.is_rational:
            return False
        q = x.angle.denominator
        return self.chain.horizon(q, self._real()) is not None

    def to_json(self):
        return {"kind": self.kind, "chain": self.chain.to_json()}


@dataclass(frozen=True)
class IrrationalOrbit(DenseSet):
    """The orbit {e^{2 pi i m theta}} of an irrational theta given by its continued fraction.

    Steps are e^{2 pi i q_j theta} for the convergent denominators q_j, which
    tend to 1 since ||q_j theta|| < 1/q_{j+1}.
    """

    prefix: tuple
    period: tuple = ()
    bits: int = 256
    kind = "irrational_orbit"

    def theta(self) -> UnitPoint:
        cache = self.__dict__.setdefault("_cache", {})
        if "theta" not in cache:
            cache["theta"] = unit_point_from_real(_cf_value(self.prefix, self.period, self.bits + 64), self.bits)
        return cache["theta"]

    def _denominators(self) -> Realization:
        cache = self.__dict__.setdefault("_cache", {})
        if "dens" not in cache:
            cache["dens"] = Realization(ConvergentDenominators(self.prefix, self.period))
        return cache["dens"]

    def step(self, index):
        terms = self._denominators().take(index)
        if len(terms) < index:
            raise PrecisionError("continued fraction exhausted")
        return power(self.theta(), terms[index - 1].value)

    def contains(self, x):
        return not x.is_rational

    def to_json(self):
        return {"kind": self.kind, "prefix": list(self.prefix), "period": list(self.period), "bits": self.bits}


def _cf_value(prefix, period, bits):
    coeffs = list(prefix)
    if period:
        while len(coeffs) < bits:
            coeffs.extend(period)
    with mpmath.workprec(bits + 32):
        x = mpmath.mpf(coeffs[-1])
        for a in reversed(coeffs[:-1]):
            x = a + 1 / x
        return x


def dense_from_json(obj: dict) -> DenseSet:
    kind = obj["kind"]
    if kind == "roots_of_powers":
        return RootsOfPowers(int(obj["base"]))
    if kind == "chain_roots":
        return AllRootsOfChain(spec_from_json(obj["chain"]))
    if kind == "irrational_orbit":
        return IrrationalOrbit(tuple(obj["prefix"]), tuple(obj.get("period", ())), int(obj.get("bits", 256)))
    raise ValueError(f"unknown dense set kind {kind!r}")


# -- chords along the sequence ---------------------------------------------------


def atom_row(x: UnitPoint, values: Sequence[int]) -> np.ndarray:
    """Angles of x^{n_k} as floats in [0, 1)."""
    if x.is_rational:
        a, q = x.angle.numerator, x.angle.denominator
        if q == 1:
            return np.zeros(len(values))
        return np.fromiter(((a * (v % q)) % q / q for v in values), dtype=float, count=len(values))
    ang = x.angle
    if values and math.log2(max(values)) + GUARD_BITS > ang.bits:
        raise PrecisionError(f"{ang.bits}-bit angle cannot be raised to n ~ 2^{math.log2(max(values)):.0f}")
    m = 1 << ang.bits
    return np.fromiter(((ang.fixed * v) % m / m for v in values), dtype=float, count=len(values))


def chords_of_angles(angles: np.ndarray) -> np.ndarray:
    return 2.0 * np.abs(np.sin(np.pi * angles))


def _min_pairwise_chord(points: Sequence[UnitPoint]) -> float:
    if len(points) < 2:
        return math.inf
    if all(x.is_rational for x in points):
        angles = sorted(x.angle for x in points)
        gaps = [b - a for a, b in zip(angles, angles[1:])] + [1 + angles[0] - angles[-1]]
        g = min(gaps)
        return 2.0 * math.sin(math.pi * float(min(g, 1 - g)))
    return min(chord_distance(x, y) for i, x in enumerate(points) for y in points[:i])


def eta_value(points: Sequence[UnitPoint], q: int) -> float:
    """eta_0 = 1; eta_q is a quarter of the least chord among the first 2^q points."""
    return 1.0 if q == 0 else _min_pairwise_chord(points[: 2**q]) / 4


def lipschitz_radius(slack: float, weight_factor, n: int):
    """slack / (2 * weight_factor * n) as an mpmath number (n may be huge)."""
    return mpmath.mpf(slack) / (2 * mpmath.mpf(Fraction(weight_factor).numerator)
                                / Fraction(weight_factor).denominator * mpmath.mpf(n))


# -- state -------------------------------------------------------------------------


class _Workspace:
    """Float chords |x^{n_k} - 1| of every atom over the currently checked prefix."""

    def __init__(self, seq: SequenceSpec):
        self.real = Realization(seq)
        self.values: list[int] = []
        self.rows: list[np.ndarray] = []
        self.horizons: dict = {}

    @property
    def size(self) -> int:
        return len(self.values)


@dataclass
class ConstructionState:
    scheme: Scheme
    seq: SequenceSpec
    dense: DenseSet
    horizon_limit: int | None = None
    atoms: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    history: list = field(default_factory=list)
    thresholds: list = field(default_factory=list)
    stage_threshold: int = 0
    eta: list = field(default_factory=list)
    provenance: list = field(default_factory=list)
    depth: int = 0
    stage: int = 0
    log: list = field(default_factory=list)
    _work: _Workspace | None = field(default=None, repr=False)

    @property
    def work(self) -> _Workspace:
        if self._work is None:
            self._work = _Workspace(self.seq)
            self._sync_range()
        return self._work

    # horizon bookkeeping

    def atom_horizon(self, x: UnitPoint) -> int | None:
        if x.is_one():
            return 0
        if not x.is_rational or self.seq.finite:
            return None
        q = x.angle.denominator
        cache = self.work.horizons
        if q not in cache:
            cache[q] = self.seq.horizon(q, self.work.real)
        return cache[q]

    def check_range(self, extra: Iterable[UnitPoint] = ()) -> tuple[int, bool]:
        """(K, exact): every index >= K has distortion exactly 0 when exact."""
        hs = [self.atom_horizon(x) for x in list(self.atoms) + list(extra)]
        if all(h is not None for h in hs):
            return max(hs, default=0), True
        if self.seq.finite:
            n = len(self.work.real.take(self.horizon_limit or 10**9))
            return (min(n, self.horizon_limit) if self.horizon_limit else n), True
        if self.horizon_limit is None:
            raise ConstructionError(
                "atoms have no exact divisibility horizon along this sequence; a finite horizon is required"
            )
        return self.horizon_limit, False

    def _sync_range(self, extra: Iterable[UnitPoint] = ()) -> None:
        work = self.work
        K, exact = self.check_range(extra)
        if K <= work.size:
            return
        terms = work.real.take(K)
        if len(terms) < K:
            K = len(terms)
        new_values = [t.value for t in terms[work.size:K]]
        for i in range(len(work.rows)):
            x = self.atoms[i]
            h = self.atom_horizon(x) if exact else None
            tail = np.zeros(len(new_values)) if h is not None and h <= work.size else chords_of_angles(atom_row(x, new_values))
            work.rows[i] = np.concatenate([work.rows[i], tail])
        work.values.extend(new_values)

    def _ensure_rows(self) -> None:
        work = self.work
        while len(work.rows) < len(self.atoms):
            work.rows.append(chords_of_angles(atom_row(self.atoms[len(work.rows)], work.values)))

    def chord_matrix(self) -> np.ndarray:
        self._ensure_rows()
        return np.vstack(self.work.rows) if self.work.rows else np.zeros((0, 0))

    def distortion_array(self) -> np.ndarray:
        self._ensure_rows()
        chords = self.chord_matrix()
        w = np.array([float(v) for v in self.weights])
        return w @ chords

    def level_bounds(self, size: int) -> np.ndarray:
        levels = np.minimum(np.searchsorted(self.thresholds, np.arange(size), side="right") - 1, self.depth)
        table = np.array([float(self.scheme.level_bound(j)) for j in range(self.depth + 1)])
        return table[levels]

    def measure(self) -> Measure:
        return make_measure(zip(self.atoms, self.weights), label=f"depth-{self.depth}")

    def depth_measure(self, p: int) -> Measure:
        return make_measure(zip(self.atoms[: 2**p], self.history[p]), label=f"depth-{p}")


def init_state(scheme: Scheme, seq: SequenceSpec, dense: DenseSet, horizon_limit: int | None = None) -> ConstructionState:
    """Depth-0 state: the unit mass at 1, N_0 = 0."""
    state = ConstructionState(scheme, seq, dense, horizon_limit)
    state.atoms = [ONE]
    state.weights = [Fraction(1)]
    state.history = [[Fraction(1)]]
    state.thresholds = [0]
    state.stage_threshold = 0
    state.eta = [1.0]
    return state


# -- neighbours --------------------------------------------------------------------


def _mp_chord(x: UnitPoint, y: UnitPoint):
    if x.is_rational and y.is_rational:
        d = (x.angle - y.angle) % 1
        d = min(d, 1 - d)
        with mpmath.workprec(80):
            return 2 * mpmath.sin(mpmath.pi * mpmath.mpf(d.numerator) / d.denominator)
    return mpmath.mpf(chord_distance(x, y))


def choose_neighbor(state: ConstructionState, s: int, bound) -> UnitPoint:
    """First point parent * step(L) of the dense set within ``bound`` of atom s, distinct from all atoms."""
    if not bound > 0:
        raise ValueError("neighbour bound must be positive")
    parent = state.atoms[s - 1]
    start = state.dense.first_index()
    for index in range(start, start + MAX_NEIGHBOR_STEPS):
        nu = parent * state.dense.step(index)
        if nu in state.atoms:
            continue
        if _mp_chord(nu, parent) < bound:
            return nu
    raise ConstructionError(f"no neighbour within {bound} after {MAX_NEIGHBOR_STEPS} steps")


def _transfer_mass(state: ConstructionState, s: int) -> Fraction:
    return state.scheme.transfer(state.weights[s - 1], state.depth)


def required_neighbor_bound(state: ConstructionState, s: int):
    """Radius around atom s inside which any neighbour keeps every constrained index under its bound.

    Uses |x^n - y^n| <= n |x - y| on the indices k < N_{p,s-1} with a factor 2
    of safety, then caps by eta_p and by half the least distance between atoms.
    """
    p = state.depth
    cap = min(state.eta[p], _min_pairwise_chord(state.atoms) / 2)
    limit = state.stage_threshold
    if limit == 0:
        return mpmath.mpf(cap)
    state._sync_range()
    d = state.distortion_array()[:limit]
    slack = state.level_bounds(limit) - d
    worst = int(np.argmin(slack))
    if slack[worst] <= 0:
        raise ConstructionError(f"nonpositive slack {slack[worst]} at index {worst}: invariants broken")
    wf = float(_transfer_mass(state, s))
    logs = np.log2(slack) - math.log2(2 * wf) - np.array([math.log2(v) for v in state.work.values[:limit]])
    radius = mpmath.mpf(2) ** float(np.min(logs))
    return min(radius, mpmath.mpf(cap))


def _search_neighbor(state: ConstructionState, s: int) -> tuple[UnitPoint, int]:
    """Neighbour accepted by a direct per-index check against the level bounds.

    Candidates are parent * step(L) for increasing L starting at the coarsest
    L allowed by the eta separation caps.  Past the current horizon every old
    atom is exactly 1, so there the new distortion is at most 2 * transfer,
    which is below the depth-p bound (asserted below).
    """
    p = state.depth
    i = 2**p + s
    parent = state.atoms[s - 1]
    t = _transfer_mass(state, s)
    assert 2 * t < state.scheme.level_bound(p)
    tf = float(t)
    work = state.work
    state._ensure_rows()
    K = work.size
    d = state.distortion_array()
    bounds = state.level_bounds(K)
    err = certify.float_error(len(state.atoms) + 1) + 1e-15
    # below the running threshold each split may spend only a share of the
    # slack, so later splits of this depth keep room to work with; past it the
    # distortion is under the target and the whole slack is available
    remaining = 2**p - s + 1
    budget = bounds - d - err
    head = min(state.stage_threshold, K)
    budget[:head] /= remaining + 1
    if K and budget.min() <= 0:
        raise ConstructionError(f"slack exhausted at index {int(np.argmin(budget))} before splitting atom {s}")
    order = np.argsort(budget, kind="stable")
    parent_chords = work.rows[s - 1]
    values = work.values
    caps = [(state.atoms[((i - 1) % 2**q)], state.eta[q]) for q in range(p + 1)]
    atom_set = set(x for x in state.atoms if x.is_rational)
    start = state.dense.first_index()
    for index in range(start, start + MAX_NEIGHBOR_STEPS):
        nu = parent * state.dense.step(index)
        if nu in atom_set or (not nu.is_rational and nu in state.atoms):
            continue
        if not all(chord_distance(nu, r) < eta * (1 - 1e-9) for r, eta in caps):
            continue
        lo, ok = 0, True
        for size in _CHUNKS + (K,):
            hi = min(K, max(size, lo))
            if hi <= lo:
                continue
            idx = order[lo:hi]
            new = chords_of_angles(atom_row(nu, [values[k] for k in idx]))
            if not np.all(tf * (new - parent_chords[idx]) < budget[idx]):
                ok = False
                break
            lo = hi
            if lo >= K:
                break
        if ok:
            return nu, index
    raise ConstructionError(f"no admissible neighbour for atom {s} at depth {p} within {MAX_NEIGHBOR_STEPS} steps")


# -- steps ----------------------------------------------------------------------------


def split_step(state: ConstructionState, neighbor: UnitPoint, step_index: int | None = None) -> ConstructionState:
    """Move part of the mass of atom s = stage + 1 onto ``neighbor``."""
    p = state.depth
    s = state.stage + 1
    if s > 2**p:
        raise ConstructionError("all atoms of this depth are already split")
    if neighbor in state.atoms:
        raise ConstructionError(f"neighbour {neighbor!r} collides with an existing atom")
    t = _transfer_mass(state, s)
    state._ensure_rows()
    state.weights[s - 1] -= t
    state.weights.append(t)
    state.atoms.append(neighbor)
    state.provenance.append((s, step_index))
    state.stage = s
    state._sync_range()
    state._ensure_rows()
    return state


def find_threshold(state: ConstructionState, target) -> tuple[int, str]:
    """Least N >= the running threshold with distortion < target for every k >= N."""
    state._sync_range()
    K, exact = state.check_range()
    d = state.distortion_array()[:K]
    err = certify.float_error(len(state.atoms)) + 1e-15
    above = np.nonzero(d + err >= float(target))[0]
    n = max(state.stage_threshold, int(above[-1]) + 1 if len(above) else 0)
    if not exact and n >= K:
        raise ThresholdError(f"distortion stays above {target} up to the finite horizon {K}")
    return n, "exactly_eventual" if exact else "finite"


def _complete_depth(state: ConstructionState) -> None:
    state.history.append(list(state.weights))
    state.thresholds.append(state.stage_threshold)
    state.depth += 1
    state.stage = 0
    state.eta.append(eta_value(state.atoms, state.depth))


def grow(state: ConstructionState, depth: int) -> ConstructionState:
    """Advance the construction until it reaches ``depth``."""
    state._sync_range()
    while state.depth < depth:
        p = state.depth
        target = state.scheme.threshold_target(p)
        for s in range(state.stage + 1, 2**p + 1):
            nu, index = _search_neighbor(state, s)
            split_step(state, nu, index)
            n, kind = find_threshold(state, target)
            state.stage_threshold = n
            state.log.append({"depth": p, "split": s, "step": index,
                              "order": nu.order, "threshold": n, "horizon_kind": kind,
                              "checked": state.work.size})
        _complete_depth(state)
    return state


def run(state: ConstructionState, depth: int):
    """Grow to ``depth`` and return the final measure with an independent certificate."""
    grow(state, depth)
    record = state_to_json(state)
    return state.measure(), verify_certificate(record)


def build_rigidity(seq: SequenceSpec, dense: DenseSet, depth: int, scheme: Scheme,
                   horizon_limit: int | None = None):
    state = init_state(scheme, seq, dense, horizon_limit)
    measure, cert = run(state, depth)
    return state, measure, cert


# -- serialisation ----------------------------------------------------------------------


def state_to_json(state: ConstructionState) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "type": "construction_state",
        "scheme": state.scheme.to_json(),
        "sequence": state.seq.to_json(),
        "dense": state.dense.to_json(),
        "horizon_limit": state.horizon_limit,
        "depth": state.depth,
        "atoms": [point_to_json(x) for x in state.atoms[: 2**state.depth]],
        "weight_history": [[weight_to_json(w) for w in ws] for ws in state.history],
        "thresholds": list(state.thresholds),
        "eta": [repr(e) for e in state.eta],
        "provenance": [list(pr) for pr in state.provenance[: 2**state.depth - 1]],
        "log": state.log,
    }


# -- verification ------------------------------------------------------------------------


@dataclass
class PropertyRecord:
    name: str
    passed: bool
    checked: str
    worst_margin: str
    exact: bool

    def to_json(self):
        return dict(self.__dict__)


@dataclass
class Failure:
    name: str
    witness: dict
    detail: str = ""

    def to_json(self):
        return dict(self.__dict__)


@dataclass
class Certificate:
    scheme: dict
    depth: int
    tolerance: str
    horizon: dict
    records: list
    failures: list
    max_atom_mass: str
    continuity_proxy: str
    sup_deviation: float

    @property
    def passed(self) -> bool:
        return not self.failures

    def failure_names(self) -> set:
        return {f.name for f in self.failures}

    def to_json(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "type": "certificate",
            "passed": self.passed,
            "scheme": self.scheme,
            "depth": self.depth,
            "tolerance": self.tolerance,
            "horizon": self.horizon,
            "records": [r.to_json() for r in self.records],
            "failures": [f.to_json() for f in self.failures],
            "max_atom_mass": self.max_atom_mass,
            "continuity_proxy": self.continuity_proxy,
            "sup_deviation": self.sup_deviation,
        }


class _Checker:
    def __init__(self):
        self.records: list[PropertyRecord] = []
        self.failures: list[Failure] = []

    def record(self, name, failures, checked, margin, exact=True):
        self.failures.extend(failures)
        self.records.append(PropertyRecord(name, not failures, checked, str(margin), exact))


def _parse_record(record: dict):
    scheme = Scheme.from_json(record["scheme"])
    seq = spec_from_json(record["sequence"])
    dense = dense_from_json(record["dense"])
    atoms = [point_from_json(a) for a in record["atoms"]]
    history = [[Fraction(w) for w in ws] for ws in record["weight_history"]]
    return scheme, seq, dense, atoms, history


def _interval_distortion(weights, atoms, n):
    terms = []
    for w, x in zip(weights, atoms):
        if x.is_rational:
            q = x.angle.denominator
            terms.append((w, (x.angle.numerator * (n % q)) % q, q))
        else:
            y = power(x, n)
            terms.append((w, y.angle.fixed, 1 << y.angle.bits))
    return terms


def verify_certificate(record: dict) -> Certificate:
    """Re-check every property of a serialised construction from scratch."""
    chk = _Checker()
    try:
        scheme, seq, dense, atoms, history = _parse_record(record)
    except (KeyError, ValueError, TypeError, ZeroDivisionError) as exc:
        fail = Failure("parse", {}, str(exc))
        return Certificate(record.get("scheme", {}), -1, "", {}, [], [fail], "", "", math.nan)
    P = len(history) - 1
    thresholds = [int(n) for n in record["thresholds"]]
    provenance = record.get("provenance", [])
    prime = scheme.primed

    # shape and initial conditions
    shape = []
    if len(atoms) != 2**P:
        shape.append(Failure("shape", {"atoms": len(atoms), "depth": P}, "atom count is not 2^depth"))
    for p, ws in enumerate(history):
        if len(ws) != 2**p:
            shape.append(Failure("shape", {"p": p}, "weight history length is not 2^p"))
    if len(thresholds) != P + 1:
        shape.append(Failure("shape", {"thresholds": len(thresholds)}, "need N_0..N_P"))
    chk.record("shape", shape, f"depth {P}", "-")
    if shape:
        return Certificate(record["scheme"], P, "", {}, chk.records, chk.failures, "", "", math.nan)

    init = []
    if atoms[0] != ONE:
        init.append(Failure("init", {"index": 1}, "lambda_1 must be 1"))
    if history[0] != [1]:
        init.append(Failure("init", {"p": 0, "index": 1}, "a_1^(0) must be 1"))
    if thresholds[0] != 0:
        init.append(Failure("init", {"N_0": thresholds[0]}, "N_0 must be 0"))
    chk.record("init", init, "lambda_1, a_1^(0), N_0", "-")

    mono = [Failure("thresholds", {"j": j, "N_j": a, "N_j+1": b}, "thresholds must not decrease")
            for j, (a, b) in enumerate(zip(thresholds, thresholds[1:])) if b < a]
    chk.record("thresholds", mono, f"N_0..N_{P}", "-")

    # exact weight bookkeeping
    norm = []
    for p, ws in enumerate(history):
        for i, w in enumerate(ws, 1):
            if not w > 0:
                norm.append(Failure("normalization", {"p": p, "index": i}, f"weight {w} is not positive"))
        if sum(ws) != 1:
            norm.append(Failure("normalization", {"p": p}, f"weights sum to {sum(ws)}"))
    chk.record("normalization", norm, f"depths 0..{P}", "-")

    split = []
    for p in range(P):
        for i in range(1, 2**p + 1):
            old, kept, moved = history[p][i - 1], history[p + 1][i - 1], history[p + 1][2**p + i - 1]
            wit = {"p": p, "index": i, "partner": 2**p + i}
            if kept + moved != old:
                split.append(Failure("split(d)", wit, f"{kept} + {moved} != {old}"))
            elif moved != scheme.transfer(old, p):
                split.append(Failure("split-rule", wit, f"moved mass {moved} != {scheme.transfer(old, p)}"))
    chk.record("split(d)", split, f"depths 0..{P - 1}", "-")

    classes, worst4 = [], None
    for p in range(1, P + 1):
        for q in range(1, p + 1):
            cap = scheme.class_mass_bound(q)
            for r in range(1, 2**q + 1):
                mass = sum(history[p][i - 1] for i in range(r, 2**p + 1, 2**q))
                margin = cap - mass
                worst4 = margin if worst4 is None else min(worst4, margin)
                if mass > cap:
                    classes.append(Failure(f"(4{prime})", {"p": p, "q": q, "r": r},
                                           f"class mass {mass} > {cap}"))
    chk.record(f"(4{prime})", classes, f"p <= {P}, q <= p", worst4)

    atoms6, worst6 = [], None
    for p in range(P + 1):
        cap = scheme.atom_mass_bound(p)
        for i, w in enumerate(history[p], 1):
            worst6 = cap - w if worst6 is None else min(worst6, cap - w)
            if w > cap:
                atoms6.append(Failure("(6)", {"p": p, "index": i}, f"mass {w} > {cap}"))
    chk.record("(6)", atoms6, f"depths 0..{P}", worst6)

    # atoms: distinctness, membership, provenance
    distinct = []
    seen: dict = {}
    for i, x in enumerate(atoms, 1):
        if x.is_rational and x in seen:
            distinct.append(Failure("distinctness", {"index": i, "equals": seen[x]}, "repeated atom"))
        seen.setdefault(x, i) if x.is_rational else None
    loose = [(i, x) for i, x in enumerate(atoms, 1) if not x.is_rational]
    for a, (i, x) in enumerate(loose):
        for j, y in loose[:a]:
            if x == y:
                distinct.append(Failure("distinctness", {"index": i, "equals": j}, "repeated atom"))
    chk.record("distinctness", distinct, f"{len(atoms)} atoms", "-")

    prov = []
    for i in range(2, 2**P + 1):
        x = atoms[i - 1]
        s = i - 2 ** ((i - 1).bit_length() - 1)
        entry = provenance[i - 2] if i - 2 < len(provenance) else None
        if not dense.contains(x):
            prov.append(Failure("neighbor-provenance", {"index": i}, "atom is not in the dense set"))
            continue
        if entry is None or int(entry[0]) != s:
            prov.append(Failure("neighbor-provenance", {"index": i}, f"parent record {entry} != {s}"))
            continue
        if entry[1] is not None and atoms[s - 1] * dense.step(int(entry[1])) != x:
            prov.append(Failure("neighbor-provenance", {"index": i, "parent": s, "step": entry[1]},
                                "atom is not parent times the recorded step"))
    chk.record("neighbor-provenance", prov, f"atoms 2..{2**P}", "-")

    # separation property (2), which is (5) restricted to l >= 1
    sep, worst2 = [], math.inf
    for q in range(P):
        eta = eta_value(atoms, q)
        for i in range(2**q + 1, 2**P + 1):
            r = (i - 1) % 2**q + 1
            c = chord_distance(atoms[i - 1], atoms[r - 1])
            worst2 = min(worst2, eta - c)
            if not _chord_below_eta(atoms, i, r, q, c, eta):
                sep.append(Failure(f"(2{prime})",
                                   {"q": q, "l": (i - r) // 2**q, "r": r, "index": i},
                                   f"chord {c!r} >= eta_{q} = {eta!r}"))
    chk.record(f"(2{prime})", sep, f"q < {P}", worst2, exact=all(x.is_rational for x in atoms))

    # distortion properties (1) and (3) at every depth; they need a horizon for every atom
    if record.get("horizon_limit") is None and not seq.finite:
        real = Realization(seq)
        loose = [Failure("horizon", {"index": i}, "atom has no exact horizon along the sequence")
                 for i, x in enumerate(atoms, 1)
                 if not x.is_one() and (not x.is_rational or seq.horizon(x.angle.denominator, real) is None)]
        chk.record("horizon", loose, f"{len(atoms)} atoms", "-")
        if loose:
            return Certificate(record["scheme"], P, weight_to_json(scheme.tolerance), {"kind": "none", "index": 0},
                               chk.records, chk.failures, weight_to_json(max(history[P])),
                               weight_to_json(scheme.atom_mass_bound(P)), math.nan)
    horizon, dist_failures, tail_failures, sup_info = _check_distortions(
        scheme, seq, atoms, history, thresholds, record.get("horizon_limit"))
    chk.record(f"(1{prime})", dist_failures[0], horizon["checked"], dist_failures[1],
               exact=horizon["kind"] == "exactly_eventual")
    chk.record(f"(3{prime})", tail_failures[0], horizon["checked"], tail_failures[1],
               exact=horizon["kind"] == "exactly_eventual")
    sup, sup_fail = sup_info
    chk.record("sup-coefficient", sup_fail, horizon["checked"], float(scheme.tolerance) - sup,
               exact=horizon["kind"] == "exactly_eventual")

    return Certificate(
        scheme=record["scheme"],
        depth=P,
        tolerance=weight_to_json(scheme.tolerance),
        horizon={"kind": horizon["kind"], "index": horizon["index"]},
        records=chk.records,
        failures=chk.failures,
        max_atom_mass=weight_to_json(max(history[P])),
        continuity_proxy=weight_to_json(scheme.atom_mass_bound(P)),
        sup_deviation=sup,
    )


def _chord_below_eta(atoms, i, r, q, c, eta) -> bool:
    err = 1e-14
    if c + err < eta:
        return True
    if c - err > eta:
        return False
    if not all(x.is_rational for x in atoms[: 2**q]) or not atoms[i - 1].is_rational:
        return c < eta
    # exact comparison through interval enclosures of both chords
    angles = sorted(x.angle for x in atoms[: 2**q])
    gaps = [b - a for a, b in zip(angles, angles[1:])] + [1 + angles[0] - angles[-1]]
    g = min(min(gap, 1 - gap) for gap in gaps)
    d = (atoms[i - 1].angle - atoms[r - 1].angle) % 1
    with certify.interval_precision():
        lhs = certify.chord_interval(d.numerator, d.denominator)
        rhs = certify.chord_interval(g.numerator, g.denominator) / 4
        verdict = lhs < rhs
    if verdict is None:
        raise certify.Undecided(f"chord comparison for atom {i}")
    return bool(verdict)


def _check_distortions(scheme, seq, atoms, history, thresholds, horizon_limit):
    P = len(history) - 1
    real = Realization(seq)
    hs = []
    for x in atoms:
        if x.is_one():
            hs.append(0)
        elif x.is_rational and not seq.finite:
            hs.append(seq.horizon(x.angle.denominator, real))
        else:
            hs.append(None)
    if all(h is not None for h in hs):
        K, kind = max(hs, default=0), "exactly_eventual"
    elif seq.finite:
        K, kind = len(real.take(horizon_limit or 10**9)), "finite"
    else:
        if horizon_limit is None:
            raise ConstructionError("no exact horizon and no finite horizon limit recorded")
        K, kind = int(horizon_limit), "finite"
    values = [t.value for t in real.take(K)]
    K = len(values)
    angles = np.vstack([atom_row(x, values) for x in atoms]) if K else np.zeros((len(atoms), 0))

    dist_fail, tail_fail = [], []
    worst1, worst3 = math.inf, math.inf
    name1, name3 = f"(1{scheme.primed})", f"(3{scheme.primed})"
    ks = np.arange(K)
    # closed level intervals: k in [N_j, N_{j+1}] takes the smallest such j
    upper = np.maximum.accumulate(np.array(thresholds[1:] or [0]))
    for p in range(1, P + 1):
        m = 2**p
        w = np.array([float(v) for v in history[p]])
        d = _chunked(lambda a: w @ chords_of_angles(a), angles[:m], K)
        err = certify.float_error(m) + 1e-15
        Np = thresholds[p]
        levels = np.minimum(np.searchsorted(upper, ks, side="left"), p - 1)
        table = np.array([float(scheme.level_bound(j)) for j in range(p)] + [float(scheme.tail_bound(p))])
        levels = np.where(ks >= Np, p, levels)
        margin = table[levels] - d
        head = ks < Np
        if head.any():
            worst1 = min(worst1, float(margin[head].min()))
        if (~head).any():
            worst3 = min(worst3, float(margin[~head].min()))
        for k in np.nonzero(margin <= err + 1e-15 * table[levels])[0]:
            j = int(levels[k])
            bound = scheme.tail_bound(p) if j == p else scheme.level_bound(j)
            terms = _interval_distortion(history[p], atoms[:m], values[k])
            if certify.decide_less(d[k], err, bound, lambda: certify.weighted_chord_interval(terms)):
                continue
            if j == p:
                tail_fail.append(Failure(name3, {"p": p, "k": int(k)}, f"distortion {float(d[k])!r} >= {bound}"))
            else:
                dist_fail.append(Failure(name1, {"p": p, "j": j, "k": int(k)}, f"distortion {float(d[k])!r} >= {bound}"))
    # final-depth coefficients |mu^(n_k) - 1| against the uniform tolerance
    sup_fail = []
    sup = 0.0
    if K:
        w = np.array([float(v) for v in history[P]])
        dev = _chunked(lambda a: np.abs(w @ np.exp(2j * np.pi * a) - 1.0), angles, K)
        sup = float(dev.max())
        err = certify.float_error(2**P) * 2 + 1e-15
        tol = scheme.tolerance
        for k in np.nonzero(dev + err >= float(tol))[0]:
            terms = _interval_distortion(history[P], atoms, values[k])
            if not certify.decide_less(dev[k], err, tol, lambda: certify.deviation_interval(terms)):
                sup_fail.append(Failure("sup-coefficient", {"k": int(k)}, f"|mu^(n_k) - 1| = {float(dev[k])!r} >= {tol}"))
    checked = f"0 <= k < {K}" + (", exactly 0 beyond" if kind == "exactly_eventual" else "")
    horizon = {"kind": kind, "index": K, "checked": checked}
    return horizon, (dist_fail, worst1), (tail_fail, worst3), (sup, sup_fail)


def _chunked(fn, matrix: np.ndarray, size: int, chunk: int = 1 << 15) -> np.ndarray:
    """Apply a column-wise reduction in slices to bound peak memory."""
    if size == 0:
        return np.zeros(0)
    return np.concatenate([fn(matrix[:, a:a + chunk]) for a in range(0, size, chunk)])
