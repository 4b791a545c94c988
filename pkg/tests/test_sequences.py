import itertools

import pytest
from hypothesis import given, settings, strategies as st

from rigidity.sequences import (
    DiagonalSlice,
    DivisibilityChain,
    ChainMultiples,
    Explicit,
    Geometric,
    LinearIndexMap,
    Realization,
    Smooth,
    continued_fraction,
    convergent_denominators,
    diagonal_slice,
    divisibility_chain_check,
    chain_multiples_enumerate,
    is_strictly_increasing,
    smooth_enumerate,
    spec_from_json,
    terms_to_csv,
)


def brute_smooth(gens, limit):
    out = set()
    for exps in itertools.product(*(range(limit.bit_length() + 1) for _ in gens)):
        v = 1
        for g, e in zip(gens, exps):
            v *= g**e
        if v <= limit:
            out.add(v)
    return sorted(out)


def values(terms):
    return [t.value for t in terms]


def test_smooth_examples():
    assert values(smooth_enumerate([2, 3], 7)) == [1, 2, 3, 4, 6, 8, 9]
    assert values(smooth_enumerate([2], 4)) == [1, 2, 4, 8]
    assert values(smooth_enumerate([2, 3, 5], 5)) == [1, 2, 3, 4, 5]


@pytest.mark.parametrize("gens", [(2, 3), (2, 3, 5), (3, 7)])
def test_smooth_matches_brute_force(gens):
    terms = smooth_enumerate(gens, 500)
    assert values(terms) == brute_smooth(gens, terms[-1].value)[:500]
    for t in terms:
        assert t.value == eval("*".join(f"{g}**{e}" for g, e in zip(gens, t.exponents)))


def brute_slice(gens, pivot, psi, box):
    j = gens.index(pivot)
    vals = []
    for exps in itertools.product(range(box + 1), repeat=len(gens)):
        if all(e <= psi(exps[j]) for i, e in enumerate(exps) if i != j):
            v = 1
            for g, e in zip(gens, exps):
                v *= g**e
            vals.append(v)
    return sorted(set(vals))


def test_diagonal_slice_examples():
    assert values(diagonal_slice([2, 3], 2, (1, 0), 6)) == [1, 2, 4, 6, 8, 12]
    # pivot 3 with k <= k': 1, 3, 6, 9, 18, 27 (12 = 2^2 * 3 is outside the slice)
    assert values(diagonal_slice([2, 3], 3, (1, 0), 6)) == [1, 3, 6, 9, 18, 27]
    assert values(diagonal_slice([2, 3], 2, (0, 0), 5)) == [1, 2, 4, 8, 16]
    assert values(diagonal_slice([2, 3], 2, lambda k: k // 2, 5)) == [1, 2, 4, 8, 12]


@pytest.mark.parametrize("pivot", [2, 3])
def test_diagonal_slice_matches_brute_force(pivot):
    psi = LinearIndexMap(1, 0)
    got = values(diagonal_slice([2, 3], pivot, psi, 60))
    oracle = [v for v in brute_slice((2, 3), pivot, psi, 40) if v <= got[-1]]
    assert got == oracle


def test_divisibility_chain_check():
    assert divisibility_chain_check([1, 2, 6, 24])
    assert not divisibility_chain_check([2, 3])
    assert not divisibility_chain_check([3, 3])


def brute_chain_multiples(chain, psi, count):
    vals = {kp * m for k, m in enumerate(chain) for kp in range(1, psi(k) + 1)}
    return sorted(vals)[:count]


def test_chain_multiples():
    chain = [2**k for k in range(21)]
    # with psi(k) = k + 1 the first terms are 1, 2, 4, 8, 12, 16, 24
    assert chain_multiples_enumerate(chain, (1, 1), 7) == brute_chain_multiples(chain, lambda k: k + 1, 7) == [1, 2, 4, 8, 12, 16, 24]
    assert chain_multiples_enumerate(chain, (1, 2), 7) == [1, 2, 4, 6, 8, 12, 16]
    assert chain_multiples_enumerate(chain, (0, 1), 6) == chain[:6]
    seq = ChainMultiples(Geometric(2), LinearIndexMap(1, 1))
    got = values(seq.realize(1001))
    assert is_strictly_increasing(got)
    assert max(b / a for a, b in zip(got[100:], got[101:])) < 1.25


def test_convergent_denominators():
    assert convergent_denominators([0], 6, period=[1]) == [1, 2, 3, 5, 8, 13]
    assert convergent_denominators([0], 5, period=[2]) == [2, 5, 12, 29, 70]
    assert convergent_denominators([0, 2, 3], 10) == [2, 7]
    assert continued_fraction("0.41421356237309504880168872420969807856967187537694", 8) == [0] + [2] * 7


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([Geometric(2), Geometric(3), DivisibilityChain((2, 3)), DivisibilityChain((), 1, "factorial"),
                        DiagonalSlice((2, 3), 2), DiagonalSlice((2, 3), 3), ChainMultiples(Geometric(2))]),
       st.integers(1, 7))
def test_horizon_is_exact(seq, e):
    gens = seq.generators() or (2, 3)
    q = (gens[0] if not isinstance(seq, DiagonalSlice) else seq.pivot) ** e
    if isinstance(seq, DivisibilityChain) and seq.rule == "factorial":
        q = 2**e
    real = Realization(seq)
    k = seq.horizon(q, real)
    assert k is not None
    terms = values(real.take(k + 200))
    assert all(v % q == 0 for v in terms[k:])
    assert k == 0 or terms[k - 1] % q != 0


def test_horizon_examples():
    assert DiagonalSlice((2, 3), 3).horizon(9) == 3
    assert Geometric(2).horizon(8) == 3
    assert Geometric(2).horizon(3) is None
    assert DivisibilityChain((), 1, "factorial").horizon(16) == 5


def test_json_round_trip_and_csv():
    for seq in (Geometric(2), Smooth((2, 3)), DiagonalSlice((2, 3, 5), 5, LinearIndexMap(2, 1)),
                ChainMultiples(DivisibilityChain((2, 3))), Explicit((1, 4, 9)), DivisibilityChain((), 1, "factorial")):
        assert spec_from_json(seq.to_json()) == seq
    text = terms_to_csv(smooth_enumerate([2, 3], 3))
    assert text == "index,value,exponent_vector\n0,1,0;0\n1,2,1;0\n2,3,0;1\n"


def test_rejects_bad_generators():
    with pytest.raises(ValueError):
        Smooth((1, 2))
    with pytest.raises(ValueError):
        DiagonalSlice((2, 3), 5)
