"""Zeeman basis, rotating-frame Hamiltonian and dipole couplings.

Everything is expressed in units of the natural linewidth Gamma. The
default scheme is 87Rb D1 with F_g=2 and both excited hyperfine levels
F_e=1, 2 (13 states). F_g=1 is far off resonance and never couples to the
light; optionally it is kept as a single dark reservoir population that
collects the spontaneous decay not returning to F_g=2.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Tuple

import numpy as np

from . import angmom
from .constants import GAMMA_NATURAL, HYPERFINE_SPLIT_GAMMA


@dataclass(frozen=True)
class Level:
    tag: str
    F: int
    excited: bool
    optical: bool = True


D1_LEVELS = (Level("G2", 2, False), Level("E1", 1, True), Level("E2", 2, True))
# lumped F_g=1 population: no Zeeman structure, no coupling to either field
RESERVOIR = Level("R1", 0, False, optical=False)

# Lande g_F factors for 87Rb 5S_1/2 F=2 and 5P_1/2 F'=1, 2
LANDE_G = {"G2": 0.5, "E1": -1.0 / 6.0, "E2": 1.0 / 6.0}


@dataclass(frozen=True)
class ZeemanBasis:
    """Ordered list of (level tag, F, m) states with a reverse index."""

    levels: Tuple[Level, ...] = D1_LEVELS
    j_ground: Fraction = angmom.J_GROUND
    j_excited: Fraction = angmom.J_EXCITED
    nuclear_spin: Fraction = angmom.NUCLEAR_SPIN
    states: List[Tuple[str, int, int]] = field(init=False, compare=False)
    index: Dict[Tuple[str, int], int] = field(init=False, compare=False)

    def __post_init__(self):
        states = [(lv.tag, lv.F, m) for lv in self.levels for m in range(-lv.F, lv.F + 1)]
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "index", {(t, m): i for i, (t, _, m) in enumerate(states)})

    def __len__(self):
        return len(self.states)

    def level(self, tag):
        for lv in self.levels:
            if lv.tag == tag:
                return lv
        raise KeyError(tag)

    def indices(self, tag):
        return [i for i, s in enumerate(self.states) if s[0] == tag]

    @property
    def ground_indices(self):
        return [i for lv in self.levels if not lv.excited for i in self.indices(lv.tag)]

    @property
    def excited_indices(self):
        return [i for lv in self.levels if lv.excited for i in self.indices(lv.tag)]

    def projector(self, tag):
        p = np.zeros((len(self), len(self)))
        for i in self.indices(tag):
            p[i, i] = 1.0
        return p

    @property
    def has_reservoir(self):
        return any(not lv.optical for lv in self.levels)

    def m_values(self):
        return np.array([m for _, _, m in self.states])


@dataclass(frozen=True)
class DriveParams:
    """Drive settings in units of Gamma.

    ``detuning`` is measured from the F_g=2 -> F_e=1 resonance, positive
    when the laser is blue of it. ``rabi`` may be complex inside the
    propagation code (the drive picks up a phase in the medium).
    """

    rabi: complex = 0.0
    detuning: float = 0.0
    zeeman_shift: float = 0.0
    analysis_freq: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.rabi):
            raise ValueError("rabi must be finite")
        if self.analysis_freq < 0:
            raise ValueError("analysis_freq must be >= 0")


@dataclass(frozen=True)
class AtomicConstants:
    gamma_natural: float = GAMMA_NATURAL
    hyperfine_split: float = HYPERFINE_SPLIT_GAMMA

    def __post_init__(self):
        if self.hyperfine_split <= 0:
            raise ValueError("hyperfine_split must be positive")


def build_basis(hyperfine_loss=False):
    """Canonical 13-state basis: G2 m=-2..2, E1 m=-1..1, E2 m=-2..2.

    With ``hyperfine_loss`` a 14th state (the F_g=1 reservoir) is appended.
    """
    if hyperfine_loss:
        return ZeemanBasis(levels=D1_LEVELS + (RESERVOIR,))
    return ZeemanBasis()


def two_level_basis():
    """F_g=0 -> F_e=1 scheme (J_g=0, J_e=1, no nuclear spin); used as an oracle."""
    return ZeemanBasis(
        levels=(Level("G0", 0, False), Level("E1", 1, True)),
        j_ground=Fraction(0), j_excited=Fraction(1), nuclear_spin=Fraction(0),
    )


def dipole_matrices(basis):
    """Spherical dipole components D_q (excited row, ground column), q = -1, 0, 1."""
    n = len(basis)
    mats = {q: np.zeros((n, n)) for q in (-1, 0, 1)}
    for ig, (gtag, fg, mg) in enumerate(basis.states):
        glv = basis.level(gtag)
        if glv.excited or not glv.optical:
            continue
        for ie, (etag, fe, me) in enumerate(basis.states):
            elv = basis.level(etag)
            if not elv.excited or not elv.optical:
                continue
            q = me - mg
            if q not in mats:
                continue
            mats[q][ie, ig] = angmom.dipole_element(
                angmom.AngularQuantum(fg, mg), angmom.AngularQuantum(fe, me), q,
                basis.j_excited, basis.j_ground, basis.nuclear_spin,
            )
    return mats


def decay_operators(basis, dq=None):
    """Raising matrices whose adjoints are the spontaneous-emission jumps.

    Every excited sublevel decays at unit total rate. Without a reservoir
    the dipole matrices are rescaled per excited level, so the share that
    would reach F_g=1 is redirected into F_g=2 with that level's own Zeeman
    branching. With a reservoir the physical branching into F_g=2 is kept
    and the remainder goes to the reservoir (extra keys ``("loss", i)``).
    """
    if dq is None:
        dq = dipole_matrices(basis)
    strength = sum(d @ d.T for d in dq.values()).diagonal()
    if basis.has_reservoir:
        (r,) = [i for lv in basis.levels if not lv.optical for i in basis.indices(lv.tag)]
        ops = dict(dq)
        # one incoherent channel per excited sublevel (the lumped reservoir
        # stands for distinct F_g=1 sublevels, so no coherence is transferred)
        for i in basis.excited_indices:
            loss = np.zeros((len(basis), len(basis)))
            loss[i, r] = np.sqrt(max(1.0 - strength[i], 0.0))
            ops[("loss", i)] = loss
        return ops
    scale = np.ones(len(basis))
    for i in basis.excited_indices:
        if strength[i] > 0:
            scale[i] = 1.0 / np.sqrt(strength[i])
    return {q: scale[:, None] * d for q, d in dq.items()}


def refill_state(basis):
    """Isotropic mixture over the optically active ground sublevels."""
    idx = [i for lv in basis.levels if lv.optical and not lv.excited
           for i in basis.indices(lv.tag)]
    rho = np.zeros((len(basis), len(basis)))
    rho[idx, idx] = 1.0 / len(idx)
    return rho


def polarization_operator(dq, pol):
    """Raising part of d.e for pol in {"x", "y"} (spherical decomposition)."""
    if pol == "x":
        return (dq[-1] - dq[1]) / np.sqrt(2)
    if pol == "y":
        return 1j * (dq[-1] + dq[1]) / np.sqrt(2)
    raise ValueError(f"unknown polarization {pol!r}")


def hamiltonian(basis, drive, consts=None, dq=None, g_factors=None):
    """Rotating-frame Hamiltonian (units of Gamma) for an x-polarised drive."""
    consts = consts or AtomicConstants()
    g_factors = LANDE_G if g_factors is None else g_factors
    if dq is None:
        dq = dipole_matrices(basis)
    n = len(basis)
    diag = np.zeros(n)
    for i, (tag, _, m) in enumerate(basis.states):
        if basis.level(tag).excited:
            offset = consts.hyperfine_split if tag == "E2" else 0.0
            diag[i] = offset - drive.detuning
        if drive.zeeman_shift:
            diag[i] += drive.zeeman_shift * g_factors.get(tag, 0.0) * m
    dx = polarization_operator(dq, "x")
    rabi = complex(drive.rabi)
    h = np.diag(diag).astype(complex)
    h -= 0.5 * (rabi * dx + np.conj(rabi) * dx.conj().T)
    return h
