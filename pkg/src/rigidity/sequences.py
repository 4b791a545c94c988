"""Increasing integer sequences: smooth semigroups, diagonal slices, chains.

Every sequence is a lazy stream of ``Term`` values.  A sequence may also know
its *divisibility horizon*: the first index K with q | n_k for all k >= K,
which is what turns "lambda^{n_k} -> 1" into an exact statement for roots of
unity of order q.
"""

from __future__ import annotations

import csv
import heapq
import io
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import mpmath

HORIZON_SEARCH_LIMIT = 10_000


@dataclass(frozen=True)
class Term:
    value: int
    exponents: tuple | None = None

    def factored(self, generators: Sequence[int]) -> list:
        if self.exponents is None:
            return [[self.value, 1]]
        return [[g, k] for g, k in zip(generators, self.exponents) if k]


class Realization:
    """Cached prefix of a sequence stream."""

    def __init__(self, spec: "SequenceSpec"):
        self.spec = spec
        self.terms: list[Term] = []
        self._stream = spec.stream()
        self.exhausted = False

    def take(self, count: int) -> list[Term]:
        while len(self.terms) < count and not self.exhausted:
            self._pull()
        return self.terms[:count]

    def count_up_to(self, bound: int) -> int:
        """Number of terms <= bound, realising the stream past the bound."""
        while not self.exhausted and (not self.terms or self.terms[-1].value <= bound):
            self._pull()
        lo, hi = 0, len(self.terms)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.terms[mid].value <= bound:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def values(self, count: int) -> list[int]:
        return [t.value for t in self.take(count)]

    def _pull(self) -> None:
        try:
            self.terms.append(next(self._stream))
        except StopIteration:
            self.exhausted = True


def _last_nondivisible(real: Realization, count: int, q: int) -> int:
    """1 + last index < count whose term is not divisible by q."""
    for k in range(count - 1, -1, -1):
        if real.terms[k].value % q:
            return k + 1
    return 0


def _power_horizon(base: int, q: int) -> int | None:
    """Least a with q | base^a, or None when no power of base is divisible."""
    for a in range(q.bit_length() + 2):
        if pow(base, a, q) == 0:
            return a
    return None


class SequenceSpec:
    kind = "abstract"
    finite = False

    def stream(self) -> Iterator[Term]:
        raise NotImplementedError

    def horizon(self, q: int, real: Realization | None = None) -> int | None:
        """Index K with q | n_k for every k >= K, or None if none is known."""
        return 0 if q == 1 else None

    def generators(self) -> tuple:
        return ()

    def to_json(self) -> dict:
        raise NotImplementedError

    def realize(self, count: int) -> list[Term]:
        return Realization(self).take(count)


@dataclass(frozen=True)
class Explicit(SequenceSpec):
    values: tuple
    kind = "explicit"
    finite = True

    def stream(self):
        return (Term(int(v)) for v in self.values)

    def to_json(self):
        return {"kind": self.kind, "values": [str(v) for v in self.values]}


@dataclass(frozen=True)
class Integers(SequenceSpec):
    start: int = 1
    kind = "integers"

    def stream(self):
        return (Term(n) for n in itertools.count(self.start))

    def to_json(self):
        return {"kind": self.kind, "start": self.start}


@dataclass(frozen=True)
class Geometric(SequenceSpec):
    base: int
    kind = "geometric"

    def __post_init__(self):
        if self.base < 2:
            raise ValueError("geometric base must be at least 2")

    def stream(self):
        return (Term(self.base**k, (k,)) for k in itertools.count())

    def generators(self):
        return (self.base,)

    def horizon(self, q, real=None):
        return _power_horizon(self.base, q)

    def to_json(self):
        return {"kind": self.kind, "base": self.base}


@dataclass(frozen=True)
class DivisibilityChain(SequenceSpec):
    """n_0 = start, n_{k+1} = n_k * multipliers[k mod len]; or the factorials."""

    multipliers: tuple = ()
    start: int = 1
    rule: str = "periodic"
    kind = "chain"

    def __post_init__(self):
        if self.rule not in ("periodic", "factorial"):
            raise ValueError(f"unknown chain rule {self.rule!r}")
        if self.rule == "periodic" and (not self.multipliers or min(self.multipliers) < 2):
            raise ValueError("periodic chains need multipliers >= 2")

    def stream(self):
        n = self.start
        for k in itertools.count():
            yield Term(n)
            n *= (k + 2) if self.rule == "factorial" else self.multipliers[k % len(self.multipliers)]

    def horizon(self, q, real=None):
        real = real or Realization(self)
        for k in range(HORIZON_SEARCH_LIMIT):
            terms = real.take(k + 1)
            if len(terms) <= k:
                return None
            if terms[k].value % q == 0:
                return k
        return None

    def to_json(self):
        return {"kind": self.kind, "rule": self.rule, "start": self.start,
                "multipliers": list(self.multipliers)}


def _heap_stream(generators: Sequence[int], valid: Callable[[tuple], bool]) -> Iterator[Term]:
    """Increasing distinct products of generators over a connected exponent set.

    ``valid`` must describe a set reachable from the zero vector by unit
    increments through valid vectors.  Equal values from dependent generators
    are merged, keeping the lexicographically smallest exponent vector.
    """
    r = len(generators)
    start = (0,) * r
    heap = [(1, start)]
    seen = {start}
    while heap:
        value, vec = heapq.heappop(heap)
        group = [vec]
        while heap and heap[0][0] == value:
            group.append(heapq.heappop(heap)[1])
        yield Term(value, min(group))
        for v in group:
            for i in range(r):
                nxt = v[:i] + (v[i] + 1,) + v[i + 1:]
                if nxt not in seen and valid(nxt):
                    seen.add(nxt)
                    heapq.heappush(heap, (value * generators[i], nxt))


def _check_generators(generators: Sequence[int]) -> tuple:
    gens = tuple(int(g) for g in generators)
    if not gens or min(gens) < 2 or len(set(gens)) != len(gens):
        raise ValueError("generators must be distinct integers >= 2")
    return gens


@dataclass(frozen=True)
class Smooth(SequenceSpec):
    gens: tuple
    kind = "smooth"

    def __post_init__(self):
        object.__setattr__(self, "gens", _check_generators(self.gens))

    def generators(self):
        return self.gens

    def stream(self):
        return _heap_stream(self.gens, lambda v: True)

    def to_json(self):
        return {"kind": self.kind, "generators": list(self.gens)}


@dataclass(frozen=True)
class LinearIndexMap:
    """psi(k) = slope * k + offset."""

    slope: int = 1
    offset: int = 0

    def __call__(self, k: int) -> int:
        return self.slope * k + self.offset

    @property
    def strictly_increasing(self) -> bool:
        return self.slope > 0


@dataclass(frozen=True)
class DiagonalSlice(SequenceSpec):
    """pivot^a times products of the other generators with exponents <= psi(a)."""

    gens: tuple
    pivot: int
    psi: LinearIndexMap = field(default_factory=LinearIndexMap)
    kind = "diagonal_slice"

    def __post_init__(self):
        object.__setattr__(self, "gens", _check_generators(self.gens))
        if self.pivot not in self.gens:
            raise ValueError(f"pivot {self.pivot} is not one of the generators")
        if self.psi.slope < 0 or self.psi.offset < 0:
            raise ValueError("psi must be nondecreasing and nonnegative")

    @property
    def pivot_index(self) -> int:
        return self.gens.index(self.pivot)

    def generators(self):
        return self.gens

    def stream(self):
        j = self.pivot_index
        psi = self.psi

        def valid(v):
            cap = psi(v[j])
            return all(k <= cap for i, k in enumerate(v) if i != j)

        return _heap_stream(self.gens, valid)

    def horizon(self, q, real=None):
        a = _power_horizon(self.pivot, q)
        if a is None:
            return None
        if a == 0:
            return 0
        bound = self.pivot ** (a - 1)
        for g in self.gens:
            if g != self.pivot:
                bound *= g ** self.psi(a - 1)
        real = real or Realization(self)
        return _last_nondivisible(real, real.count_up_to(bound), q)

    def to_json(self):
        return {"kind": self.kind, "generators": list(self.gens), "pivot": self.pivot,
                "psi": {"slope": self.psi.slope, "offset": self.psi.offset}}


@dataclass(frozen=True)
class ChainMultiples(SequenceSpec):
    """Sorted distinct values k' * m_k with 1 <= k' <= psi(k) over a chain (m_k)."""

    chain: SequenceSpec
    psi: LinearIndexMap = field(default_factory=lambda: LinearIndexMap(1, 1))
    kind = "chain_multiples"

    def __post_init__(self):
        if self.psi.offset < 1 or self.psi.slope < 0:
            raise ValueError("psi must satisfy psi(k) >= 1 and be nondecreasing")

    @property
    def hypothesis(self) -> str:
        return "psi strictly increasing" if self.psi.strictly_increasing else "psi nondecreasing, unbounded" \
            if self.psi.slope else "psi bounded"

    def stream(self):
        chain = Realization(self.chain)
        psi = self.psi
        heap = [(chain.take(1)[0].value, 0, 1)]
        last = None
        while heap:
            value, k, mult = heapq.heappop(heap)
            if value != last:
                yield Term(value)
                last = value
            m = chain.terms[k].value
            if mult + 1 <= psi(k):
                heapq.heappush(heap, ((mult + 1) * m, k, mult + 1))
            if mult == 1 and len(chain.take(k + 2)) > k + 1:
                heapq.heappush(heap, (chain.terms[k + 1].value, k + 1, 1))

    def horizon(self, q, real=None):
        chain = Realization(self.chain)
        k0 = self.chain.horizon(q, chain)
        if k0 is None:
            return None
        if k0 == 0:
            return 0
        bound = self.psi(k0 - 1) * chain.take(k0)[k0 - 1].value
        real = real or Realization(self)
        return _last_nondivisible(real, real.count_up_to(bound), q)

    def to_json(self):
        return {"kind": self.kind, "chain": self.chain.to_json(),
                "psi": {"slope": self.psi.slope, "offset": self.psi.offset}}


@dataclass(frozen=True)
class ConvergentDenominators(SequenceSpec):
    """Denominators q_1, q_2, ... of the continued fraction [a_0; a_1, ...].

    ``prefix`` holds a_0, a_1, ...; a nonempty ``period`` repeats forever after
    the prefix, otherwise the expansion (and the sequence) is finite.
    """

    prefix: tuple
    period: tuple = ()
    kind = "convergents"

    def __post_init__(self):
        if any(a < 1 for a in tuple(self.prefix[1:]) + tuple(self.period)):
            raise ValueError("partial quotients after a_0 must be positive")

    @property
    def finite(self):  # type: ignore[override]
        return not self.period

    def coefficients(self) -> Iterator[int]:
        yield from self.prefix[1:]
        if self.period:
            yield from itertools.cycle(self.period)

    def stream(self):
        q_prev, q = 0, 1
        for a in self.coefficients():
            q_prev, q = q, a * q + q_prev
            yield Term(q)

    def to_json(self):
        return {"kind": self.kind, "prefix": list(self.prefix), "period": list(self.period)}


def spec_from_json(obj: dict) -> SequenceSpec:
    kind = obj["kind"]
    if kind == "explicit":
        return Explicit(tuple(int(v) for v in obj["values"]))
    if kind == "integers":
        return Integers(int(obj.get("start", 1)))
    if kind == "geometric":
        return Geometric(int(obj["base"]))
    if kind == "chain":
        return DivisibilityChain(tuple(obj.get("multipliers", ())), int(obj.get("start", 1)),
                                 obj.get("rule", "periodic"))
    if kind == "smooth":
        return Smooth(tuple(obj["generators"]))
    psi = obj.get("psi", {})
    if kind == "diagonal_slice":
        return DiagonalSlice(tuple(obj["generators"]), int(obj["pivot"]),
                             LinearIndexMap(int(psi.get("slope", 1)), int(psi.get("offset", 0))))
    if kind == "chain_multiples":
        return ChainMultiples(spec_from_json(obj["chain"]),
                        LinearIndexMap(int(psi.get("slope", 1)), int(psi.get("offset", 1))))
    if kind == "convergents":
        return ConvergentDenominators(tuple(obj["prefix"]), tuple(obj.get("period", ())))
    raise ValueError(f"unknown sequence kind {kind!r}")


# -- operations ----------------------------------------------------------------


def smooth_enumerate(generators: Sequence[int], count: int) -> list[Term]:
    """The ``count`` smallest products of the generators, increasing."""
    return Smooth(tuple(generators)).realize(count)


def _as_index_map(psi) -> LinearIndexMap | Callable[[int], int]:
    if psi is None:
        return LinearIndexMap()
    if isinstance(psi, tuple):
        return LinearIndexMap(*psi)
    return psi


def diagonal_slice(generators: Sequence[int], pivot: int, psi=None, count: int = 10) -> list[Term]:
    """Increasing slice terms; ``psi`` is a LinearIndexMap, (slope, offset) or callable."""
    psi = _as_index_map(psi)
    if isinstance(psi, LinearIndexMap):
        return DiagonalSlice(tuple(generators), pivot, psi).realize(count)
    gens = _check_generators(generators)
    j = gens.index(pivot)
    valid = lambda v: all(k <= psi(v[j]) for i, k in enumerate(v) if i != j)  # noqa: E731
    return list(itertools.islice(_heap_stream(gens, valid), count))


def divisibility_chain_check(prefix: Sequence[int]) -> bool:
    return all(b > a and b % a == 0 for a, b in zip(prefix, prefix[1:]))


def chain_multiples_enumerate(chain, psi=None, count: int = 10) -> list[int]:
    """Sorted distinct k' * m_k, 1 <= k' <= psi(k); ``chain`` is a spec or a list."""
    if not isinstance(chain, SequenceSpec):
        chain = Explicit(tuple(chain))
    psi = _as_index_map(psi) if psi is not None else LinearIndexMap(1, 1)
    return [t.value for t in ChainMultiples(chain, psi).realize(count)]


def convergent_denominators(coefficients: Sequence[int], count: int, period: Sequence[int] = ()) -> list[int]:
    spec = ConvergentDenominators(tuple(coefficients), tuple(period))
    return [t.value for t in spec.realize(count)]


def continued_fraction(theta, count: int, bits: int = 512) -> list[int]:
    """First ``count`` partial quotients of a real number."""
    out = []
    with mpmath.workprec(bits):
        x = mpmath.mpf(theta)
        for _ in range(count):
            a = int(mpmath.floor(x))
            out.append(a)
            frac = x - a
            if frac < mpmath.mpf(2) ** (-bits // 2):
                break
            x = 1 / frac
    return out


def is_strictly_increasing(values: Sequence[int]) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))


def terms_to_csv(terms: Sequence[Term]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "value", "exponent_vector"])
    for k, t in enumerate(terms):
        vec = "" if t.exponents is None else ";".join(str(e) for e in t.exponents)
        writer.writerow([k, str(t.value), vec])
    return buf.getvalue()


# names used by the interface contract
Example3 = ChainMultiples
example3_enumerate = chain_multiples_enumerate
