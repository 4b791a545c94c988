import cmath
import math
from fractions import Fraction

import pytest

from rigidity.analysis import delta_to_modified_kazhdan_upper
from rigidity.circle import ONE, unit_point_from_rational
from rigidity.measure import Lebesgue, dirac, fourier_coeff, make_measure
from rigidity.semigroup import (
    SemigroupError,
    build_semigroup,
    coefficient_scan,
    average_with_rajchman,
    furstenberg_measure,
    furstenberg_tolerance,
    generator_measure,
    nonnegativize,
    rajchman_component,
    witness_files,
)


def direct(mu, n):
    return sum(float(w) * cmath.exp(2j * math.pi * ((x.angle.numerator * n) % x.angle.denominator)
                                    / x.angle.denominator) for x, w in mu.atoms)


@pytest.fixture(scope="module")
def furstenberg():
    return furstenberg_measure(Fraction(45, 100), depth=4, box=30)


@pytest.mark.parametrize("pivot", [2, 3])
def test_generator_measure_on_its_slice(pivot):
    mu, cert, state = generator_measure((2, 3), pivot, Fraction(3, 10), 4)
    assert cert.passed and cert.horizon["kind"] == "exactly_eventual"
    other = 3 if pivot == 2 else 2
    for k in range(21):
        for kk in range(k + 1):
            assert abs(direct(mu, pivot**k * other**kk) - 1) < 0.3


def test_generator_measure_depth_zero():
    mu, cert, _ = generator_measure((2, 3), 2, Fraction(3, 10), 0)
    assert cert.passed and mu.atoms == ((ONE, 1),)
    with pytest.raises(ValueError):
        generator_measure((2, 3), 5, Fraction(3, 10), 2)
    with pytest.raises(ValueError):
        generator_measure((2, 3), 2, Fraction(3, 2), 2)


def test_nonnegativize():
    assert nonnegativize(dirac(unit_point_from_rational(2, 7))).atoms == ((ONE, 1),)
    mu = make_measure([(ONE, Fraction(95, 100)), (unit_point_from_rational(1, 2), Fraction(5, 100))])
    assert fourier_coeff(mu, 1) == pytest.approx(0.9)
    assert fourier_coeff(nonnegativize(mu), 1) == pytest.approx(0.81)
    rough = make_measure([(unit_point_from_rational(a, 97), Fraction(1, 4)) for a in (3, 11, 40, 77)])
    sq = nonnegativize(rough)
    for n in range(1000):
        z = fourier_coeff(sq, n)
        assert z.real >= -1e-12 and abs(z.imag) < 1e-12


def test_combine_theorem3():
    r0 = Fraction(1, 2)
    mu = average_with_rajchman([dirac(), dirac()], rajchman_component(r0))
    for n in range(8):
        assert fourier_coeff(mu, n) == pytest.approx((2 + 0.5**n) / 3, abs=1e-15)
    single = make_measure([(ONE, Fraction(1, 2)), (unit_point_from_rational(1, 3), Fraction(1, 2))])
    half = average_with_rajchman([single], rajchman_component(r0))
    for n in range(8):
        expected = (fourier_coeff(single, n) + 0.5**n) / 2
        assert fourier_coeff(half, n) == pytest.approx(expected, abs=1e-15)
    assert fourier_coeff(half, 0) == 1


def test_coefficient_scan_trivial():
    scan = coefficient_scan(dirac(), (2, 3), (5, 5))
    assert scan.minimum == 1
    leb = coefficient_scan(make_measure([], [Lebesgue(Fraction(1))]), (2, 3), (4, 4))
    assert leb.minimum == 0
    assert all(z == 0 for _, z in leb.table.entries)


def test_theorem3_composite_two_generators():
    mu, witness = build_semigroup((2, 3), Fraction(3, 10), 3, 20, target=Fraction(1, 5))
    assert witness.passed
    assert witness.scan.certified_lower > 0.2
    comps = [nonnegativize(generator_measure((2, 3), p, Fraction(3, 10), 3)[0]) for p in (2, 3)]
    # the mixed coefficient dominates a third of the best component
    for k in range(0, 21, 4):
        for kk in range(0, 21, 4):
            n = 2**k * 3**kk
            best = max(direct(c, n).real for c in comps)
            assert fourier_coeff(mu, n).real >= best / 3 - 1e-12


def test_furstenberg_measure(furstenberg):
    mu, witness = furstenberg
    assert witness.passed
    assert witness.scan.certified_lower > 0.45
    assert witness.scan.max_imag < 1e-12
    for (_, z) in witness.scan.table.entries:
        assert z.real >= 0
    regions = witness.to_json()["regions"]
    assert set(regions) == {"box", "tail", "annulus"}
    assert regions["annulus"]["covered"]
    assert float(regions["annulus"]["lower_bound"]) >= 0.45
    files = witness_files(mu, witness)
    assert files["coefficients.csv"].count("\n") == 31 * 31 + 1


def test_furstenberg_tail_is_exact(furstenberg):
    mu, witness = furstenberg
    h2, h3 = witness.regions["tail"]["horizons"]
    # past the pivot horizon every atom of the pivot-2 component is 1 on its slice
    comp = [c for c in witness.components if c["pivot"] == 2][0]
    assert comp["certificate_passed"]
    for kk in range(0, h2 + 4, 7):
        assert fourier_coeff(mu, 2 ** (h2 + 3) * 3**kk).real >= 0.5 - 1e-12


def test_furstenberg_domain():
    with pytest.raises(ValueError):
        furstenberg_measure(Fraction(1, 2))
    assert furstenberg_tolerance(Fraction(49, 100)) == Fraction(1, 100)
    assert (1 - furstenberg_tolerance(Fraction(49, 100))) ** 2 >= Fraction(98, 100)
    assert furstenberg_tolerance(Fraction(45, 100)) == Fraction(513, 10000)
    with pytest.raises(SemigroupError):
        furstenberg_tolerance(Fraction(1, 2))
    _, witness = furstenberg_measure(Fraction(6, 10), depth=2, box=4, experimental=True)
    assert witness.claim.startswith("experimental")


def test_pipeline_into_kazhdan_bound(furstenberg):
    _, witness = furstenberg
    delta = Fraction(witness.scan.certified_lower).limit_denominator(10**6)
    delta = min(delta, Fraction(1, 2))
    assert float(delta_to_modified_kazhdan_upper(delta)) >= 1 - 1e-15
    near = [float(delta_to_modified_kazhdan_upper(Fraction(1, 2) - Fraction(1, 10**j))) for j in range(1, 6)]
    assert near == sorted(near, reverse=True) and near[-1] - 1 < 1e-4
