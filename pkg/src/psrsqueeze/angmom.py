"""Angular-momentum algebra for the Rb D1 hyperfine structure.

Wigner 3-j and 6-j symbols are evaluated with the Racah sums in exact
rational arithmetic and converted to float only on return. Phases follow
the Condon-Shortley convention.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt

# 87Rb D1 line: 5S_1/2 -> 5P_1/2, nuclear spin 3/2
NUCLEAR_SPIN = Fraction(3, 2)
J_GROUND = Fraction(1, 2)
J_EXCITED = Fraction(1, 2)


def _twice(x):
    """Return 2*x as an int, rejecting anything that is not a half-integer."""
    d = Fraction(x) * 2
    if d.denominator != 1:
        raise ValueError(f"{x!r} is not an integer or half-integer")
    return int(d)


@dataclass(frozen=True)
class AngularQuantum:
    """An angular momentum ``j`` with projection ``m``."""

    j: Fraction
    m: Fraction

    def __post_init__(self):
        tj, tm = _twice(self.j), _twice(self.m)
        if tj < 0:
            raise ValueError(f"negative angular momentum j={self.j}")
        if abs(tm) > tj or (tj - tm) % 2:
            raise ValueError(f"invalid projection m={self.m} for j={self.j}")
        object.__setattr__(self, "j", Fraction(self.j))
        object.__setattr__(self, "m", Fraction(self.m))


def _check_jm(tj, tm):
    if tj < 0:
        raise ValueError("angular momentum must be non-negative")
    if (tj - tm) % 2:
        raise ValueError("j - m must be an integer")
    if abs(tm) > tj:
        raise ValueError("|m| must not exceed j")


def _triangle(ta, tb, tc):
    # arguments are doubled
    return (ta + tb + tc) % 2 == 0 and abs(ta - tb) <= tc <= ta + tb


def _delta(ta, tb, tc):
    # triangle coefficient, exact; arguments doubled
    return Fraction(
        factorial((ta + tb - tc) // 2)
        * factorial((ta - tb + tc) // 2)
        * factorial((-ta + tb + tc) // 2),
        factorial((ta + tb + tc) // 2 + 1),
    )


def _signed_sqrt(s, p):
    """Float value of s*sqrt(p) for rationals s, p >= 0."""
    if s == 0 or p == 0:
        return 0.0
    mag = sqrt(s * s * p)
    return mag if s > 0 else -mag


@lru_cache(maxsize=None)
def _wigner3j_doubled(t1, t2, t3, tm1, tm2, tm3):
    if tm1 + tm2 + tm3 != 0 or not _triangle(t1, t2, t3):
        return 0.0
    # all factorial arguments below are integers once the parities are valid
    pre = _delta(t1, t2, t3) * (
        factorial((t1 + tm1) // 2)
        * factorial((t1 - tm1) // 2)
        * factorial((t2 + tm2) // 2)
        * factorial((t2 - tm2) // 2)
        * factorial((t3 + tm3) // 2)
        * factorial((t3 - tm3) // 2)
    )
    kmin = max(0, (t2 - t3 - tm1) // 2, (t1 - t3 + tm2) // 2)
    kmax = min((t1 + t2 - t3) // 2, (t1 - tm1) // 2, (t2 + tm2) // 2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            factorial(k)
            * factorial((t3 - t2 + tm1) // 2 + k)
            * factorial((t3 - t1 - tm2) // 2 + k)
            * factorial((t1 + t2 - t3) // 2 - k)
            * factorial((t1 - tm1) // 2 - k)
            * factorial((t2 + tm2) // 2 - k)
        )
        total += Fraction((-1) ** k, den)
    if ((t1 - t2 - tm3) // 2) % 2:
        total = -total
    return _signed_sqrt(total, pre)


def wigner3j(j1, j2, j3, m1, m2, m3):
    """Wigner 3-j symbol (j1 j2 j3; m1 m2 m3).

    Arguments may be ints, floats or Fractions holding half-integer values.
    Returns 0.0 when the triangle rule or m1 + m2 + m3 = 0 fails.
    """
    t = [_twice(x) for x in (j1, j2, j3, m1, m2, m3)]
    for tj, tm in zip(t[:3], t[3:]):
        _check_jm(tj, tm)
    return _wigner3j_doubled(*t)


@lru_cache(maxsize=None)
def _wigner6j_doubled(t1, t2, t3, t4, t5, t6):
    triads = ((t1, t2, t3), (t1, t5, t6), (t4, t2, t6), (t4, t5, t3))
    if not all(_triangle(*tr) for tr in triads):
        return 0.0
    pre = Fraction(1)
    for tr in triads:
        pre *= _delta(*tr)
    a = [sum(tr) // 2 for tr in triads]
    b = [(t1 + t2 + t4 + t5) // 2, (t2 + t3 + t5 + t6) // 2, (t3 + t1 + t6 + t4) // 2]
    total = Fraction(0)
    for t in range(max(a), min(b) + 1):
        den = 1
        for ai in a:
            den *= factorial(t - ai)
        for bi in b:
            den *= factorial(bi - t)
        total += Fraction((-1) ** t * factorial(t + 1), den)
    return _signed_sqrt(total, pre)


def wigner6j(j1, j2, j3, j4, j5, j6):
    """Wigner 6-j symbol {j1 j2 j3; j4 j5 j6}; zero if any triad fails."""
    t = [_twice(x) for x in (j1, j2, j3, j4, j5, j6)]
    if any(x < 0 for x in t):
        raise ValueError("angular momenta must be non-negative")
    return _wigner6j_doubled(*t)


def hyperfine_reduced_element(f_excited, f_ground, j_excited=J_EXCITED,
                              j_ground=J_GROUND, nuclear_spin=NUCLEAR_SPIN):
    """<(J_e I) F_e || d || (J_g I) F_g> in units of <J_e || d || J_g>."""
    phase_exp = Fraction(j_excited) + Fraction(nuclear_spin) + Fraction(f_ground) + 1
    sign = -1 if int(phase_exp) % 2 else 1
    return sign * sqrt((2 * f_excited + 1) * (2 * f_ground + 1)) * wigner6j(
        j_excited, f_excited, nuclear_spin, f_ground, j_ground, 1
    )


def dipole_element(ground, excited, q, j_excited=J_EXCITED, j_ground=J_GROUND,
                   nuclear_spin=NUCLEAR_SPIN):
    """Spherical dipole component <F_e m_e | d_q | F_g m_g>.

    ``ground`` and ``excited`` are :class:`AngularQuantum` (F, m). The result
    is scaled so that an excited sublevel's summed strength to every ground
    hyperfine level equals one; the spontaneous rate of the fine-structure
    line then corresponds to unit coupling. Raises ``ValueError`` when
    ``m_e != m_g + q``.
    """
    if q not in (-1, 0, 1):
        raise ValueError(f"q must be -1, 0 or +1, got {q}")
    if excited.m != ground.m + q:
        raise ValueError(
            f"selection rule violated: m_e={excited.m} != m_g + q={ground.m + q}"
        )
    fe, me = excited.j, excited.m
    phase = -1 if int(fe - me) % 2 else 1
    red = hyperfine_reduced_element(fe, ground.j, j_excited, j_ground, nuclear_spin)
    # sqrt(2J_e + 1) removes the Edmonds normalisation of the J-level element
    return phase * sqrt(2 * j_excited + 1) * wigner3j(fe, 1, ground.j, -me, q, ground.m) * red


def branching_ratio(f_excited, f_ground, j_excited=J_EXCITED, j_ground=J_GROUND,
                    nuclear_spin=NUCLEAR_SPIN):
    """Fraction of spontaneous decay from F_e that lands in F_g."""
    return float(
        (2 * j_excited + 1) * (2 * f_ground + 1)
        * wigner6j(j_excited, f_excited, nuclear_spin, f_ground, j_ground, 1) ** 2
    )
