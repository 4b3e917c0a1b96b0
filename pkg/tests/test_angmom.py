import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from psrsqueeze import angmom
from psrsqueeze.angmom import AngularQuantum, dipole_element, wigner3j, wigner6j


def test_3j_values():
    assert wigner3j(1, 1, 0, 0, 0, 0) == pytest.approx(-1 / math.sqrt(3), abs=1e-15)
    # exact Racah sum (and sympy) give 1/sqrt(5) for this symbol
    assert wigner3j(1, 1, 2, 1, 1, -2) == pytest.approx(1 / math.sqrt(5), abs=1e-15)
    assert wigner3j(1, 1, 1, 1, 1, 0) == 0.0
    assert wigner3j(1, 1, 3, 0, 0, 0) == 0.0  # triangle fails


def test_3j_half_integer():
    h = Fraction(1, 2)
    # <1/2 1/2 1/2 -1/2 | 0 0> = 1/sqrt(2) -> 3j = (-1)^(j1-j2) / sqrt(2j3+1) * cg
    assert wigner3j(h, h, 0, h, -h, 0) == pytest.approx(1 / math.sqrt(2), abs=1e-15)


def test_6j_values():
    h = Fraction(1, 2)
    assert wigner6j(h, h, 1, h, h, 1) == pytest.approx(1 / 6, abs=1e-15)
    assert wigner6j(0, 1, 1, 1, 1, 1) == pytest.approx(-1 / 3, abs=1e-15)
    assert wigner6j(2, 2, 5, 2, 2, 2) == 0.0


@pytest.mark.parametrize("j,k", [(1, 1), (2, 1), (Fraction(3, 2), 2), (2, 3)])
def test_6j_zero_argument_closed_form(j, k):
    # {k j j; 0 j j} form of the one-zero identity
    expect = (-1) ** int(2 * j + k) / (2 * j + 1)
    assert wigner6j(0, j, j, k, j, j) == pytest.approx(expect, abs=1e-14)


def test_invalid_arguments_rejected():
    with pytest.raises(ValueError):
        wigner3j(-1, 1, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        wigner3j(1, 1, 0, Fraction(1, 2), 0, 0)
    with pytest.raises(ValueError):
        wigner3j(1, 1, 0, 2, 0, 0)
    with pytest.raises(ValueError):
        AngularQuantum(1, 2)
    with pytest.raises(ValueError):
        wigner6j(-1, 1, 1, 1, 1, 1)


def _valid_3j():
    js = st.integers(0, 6).map(lambda x: Fraction(x, 2))

    @st.composite
    def build(draw):
        j1, j2 = draw(js), draw(js)
        lo, hi = abs(j1 - j2), j1 + j2
        j3 = lo + draw(st.integers(0, int(hi - lo)))
        m1 = -j1 + draw(st.integers(0, int(2 * j1)))
        m2 = -j2 + draw(st.integers(0, int(2 * j2)))
        return j1, j2, j3, m1, m2, -m1 - m2

    return build()


@given(_valid_3j())
def test_3j_permutation_symmetry(args):
    j1, j2, j3, m1, m2, m3 = args
    if abs(m3) > j3:
        return
    base = wigner3j(j1, j2, j3, m1, m2, m3)
    assert wigner3j(j2, j3, j1, m2, m3, m1) == pytest.approx(base, abs=1e-13)
    assert wigner3j(j3, j1, j2, m3, m1, m2) == pytest.approx(base, abs=1e-13)
    odd = (-1) ** int(j1 + j2 + j3)
    assert wigner3j(j2, j1, j3, m2, m1, m3) == pytest.approx(odd * base, abs=1e-13)
    assert wigner3j(j1, j2, j3, -m1, -m2, -m3) == pytest.approx(odd * base, abs=1e-13)


@pytest.mark.parametrize("j1,j2", [(1, 1), (Fraction(1, 2), 1), (2, 1), (Fraction(3, 2), Fraction(1, 2))])
def test_3j_orthogonality(j1, j2):
    j3s = [abs(j1 - j2) + k for k in range(int(j1 + j2 - abs(j1 - j2)) + 1)]
    for j3 in j3s:
        for j3p in j3s:
            for m3 in [-j3 + k for k in range(int(2 * j3) + 1)]:
                for m3p in [-j3p + k for k in range(int(2 * j3p) + 1)]:
                    total = 0.0
                    for k1 in range(int(2 * j1) + 1):
                        for k2 in range(int(2 * j2) + 1):
                            m1, m2 = -j1 + k1, -j2 + k2
                            total += ((2 * j3 + 1)
                                      * wigner3j(j1, j2, j3, m1, m2, m3)
                                      * wigner3j(j1, j2, j3p, m1, m2, m3p))
                    expect = 1.0 if (j3 == j3p and m3 == m3p) else 0.0
                    assert total == pytest.approx(expect, abs=1e-13)


def test_dipole_reflection_sign():
    a = dipole_element(AngularQuantum(2, 2), AngularQuantum(2, 2), 0)
    b = dipole_element(AngularQuantum(2, -2), AngularQuantum(2, -2), 0)
    assert a == pytest.approx(-b, abs=1e-15)
    assert abs(a) > 0.1


def test_dipole_forced_zero():
    assert dipole_element(AngularQuantum(2, 0), AngularQuantum(2, 0), 0) == 0.0
    assert dipole_element(AngularQuantum(2, 0), AngularQuantum(1, 0), 0) != 0.0


def test_dipole_selection_rule_violation():
    with pytest.raises(ValueError):
        dipole_element(AngularQuantum(2, 0), AngularQuantum(1, 1), 0)


def test_dipole_total_strength_uniform():
    # summed over both ground hyperfine levels every excited sublevel has unit strength
    for fe in (1, 2):
        for me in range(-fe, fe + 1):
            total = 0.0
            for fg in (1, 2):
                for q in (-1, 0, 1):
                    mg = me - q
                    if abs(mg) <= fg:
                        total += dipole_element(AngularQuantum(fg, mg), AngularQuantum(fe, me), q) ** 2
            assert total == pytest.approx(1.0, abs=1e-14)


def test_branching_ratios():
    assert angmom.branching_ratio(1, 2) == pytest.approx(5 / 6, abs=1e-15)
    assert angmom.branching_ratio(2, 2) == pytest.approx(1 / 2, abs=1e-15)
    assert angmom.branching_ratio(1, 1) + angmom.branching_ratio(1, 2) == pytest.approx(1.0)
