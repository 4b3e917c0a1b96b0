"""Single-pass propagation of the drive and of the orthogonal vacuum mode.

The x-polarised drive is a classical Rabi frequency attenuated slice by
slice. The y-polarised mode is quantum: its annihilation/creation sideband
amplitudes a(w) = (b(w), b^dag(w)) obey, per unit cooperativity,

    da/dC = M(w) a + K(w) F(w)

where M and K follow from eliminating the linearised atomic response at the
analysis frequency w. The quadrature spectral matrix is propagated at +w and
-w and symmetrised at the end. Quadratures are X_+ = b + b^dag and
X_- = i(b^dag - b); vacuum gives unit variance (0 dB).
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import atom_model, langevin, liouvillian
from .constants import C_LIGHT, EPS0, GAMMA_NATURAL, HBAR, WAVELENGTH_NM

# quadrature rows (X_+, X_-) in terms of (b, b^dag)
_R = np.array([[1.0, 1.0], [-1j, 1j]])
_R_INV = np.linalg.inv(_R)
# vacuum: <b(w) b^dag(-w)> = 1, everything else zero
_VAC_A = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


class SliceThicknessError(ValueError):
    pass


@dataclass(frozen=True)
class MediumParams:
    """Sample settings. ``hyperfine_loss`` keeps decay into F_g=1 as a
    loss to a dark reservoir that only the gamma refill empties."""

    cooperativity: float
    gamma: float
    n_slices: int = 32
    hyperfine_loss: bool = True

    def __post_init__(self):
        if not math.isfinite(self.cooperativity) or self.cooperativity < 0:
            raise ValueError("cooperativity must be finite and >= 0")
        if self.n_slices < 1:
            raise ValueError("n_slices must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")

    @property
    def slice_cooperativity(self):
        return self.cooperativity / self.n_slices

    @property
    def reduced_optical_density(self):
        return 4.0 * self.cooperativity


def optical_pumping_rate(rabi, hyperfine_split):
    """Off-resonant pumping scale alpha ~ Omega^2 Gamma / Delta^2 (units of Gamma)."""
    return abs(rabi) ** 2 / hyperfine_split ** 2


@dataclass(frozen=True)
class FieldCovariance:
    """Symmetrised (X_+, X_-) covariance in shot-noise units."""

    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.shape != (2, 2) or not np.allclose(v, v.T, atol=1e-12):
            raise ValueError("covariance must be a symmetric 2x2 matrix")
        object.__setattr__(self, "v", v)

    @property
    def det(self):
        return float(np.linalg.det(self.v))


@dataclass(frozen=True)
class NoiseSpectrumPoint:
    detuning: float  # MHz
    omega: float  # MHz
    v_min_db: float
    v_max_db: float
    theta_min: float

    @property
    def contrast_db(self):
        return self.v_max_db - self.v_min_db


def _dipole_strength_si(wavelength_nm, gamma_natural):
    """Unit-strength dipole moment (C m) from the spontaneous rate."""
    omega = 2 * math.pi * C_LIGHT / (wavelength_nm * 1e-9)
    return math.sqrt(3 * math.pi * EPS0 * HBAR * C_LIGHT ** 3 * gamma_natural / omega ** 3)


def cooperativity_from_physical(density, length, wavelength=WAVELENGTH_NM,
                                gamma_natural=GAMMA_NATURAL):
    """C = eta L omega mu^2 / (2 eps0 Gamma c hbar).

    density in atoms/cm^3, length in cm, wavelength in nm. With mu fixed
    by Gamma this reduces to C = eta L 3 lambda^2 / (8 pi).
    """
    for name, x in (("density", density), ("length", length),
                    ("wavelength", wavelength), ("gamma_natural", gamma_natural)):
        if not x > 0:
            raise ValueError(f"{name} must be positive")
    mu = _dipole_strength_si(wavelength, gamma_natural)
    omega = 2 * math.pi * C_LIGHT / (wavelength * 1e-9)
    eta = density * 1e6
    ell = length * 1e-2
    return eta * ell * omega * mu ** 2 / (2 * EPS0 * gamma_natural * C_LIGHT * HBAR)


def cooperativity_from_optical_density(od):
    return od / 4.0


def rabi_from_power(power, cross_section, gamma_natural=GAMMA_NATURAL,
                    wavelength=WAVELENGTH_NM):
    """Omega / Gamma for a top-hat beam; power in mW, cross_section in cm^2.

    Omega = mu E / hbar with I = eps0 c E^2 / 2, i.e. (Omega/Gamma)^2 = I / (2 I_sat).
    """
    if power < 0 or not cross_section > 0 or not gamma_natural > 0:
        raise ValueError("power must be >= 0 and cross_section, gamma positive")
    intensity = power * 1e-3 / (cross_section * 1e-4)  # W/m^2
    field = math.sqrt(2 * intensity / (EPS0 * C_LIGHT))
    mu = _dipole_strength_si(wavelength, gamma_natural)
    return mu * field / HBAR / gamma_natural


def quadrature_noise(v, theta):
    """V(theta) = u^T v u with u = (cos theta, sin theta)."""
    v = v.v if isinstance(v, FieldCovariance) else np.asarray(v)
    c, s = np.cos(theta), np.sin(theta)
    return c * c * v[0, 0] + 2 * c * s * v[0, 1] + s * s * v[1, 1]


def min_max_noise(v):
    """(v_min, v_max, theta_min) with theta_min in [0, pi)."""
    v = v.v if isinstance(v, FieldCovariance) else np.asarray(v)
    w, u = np.linalg.eigh(v)
    if np.isclose(w[0], w[1], rtol=0, atol=1e-15):
        return float(w[0]), float(w[1]), 0.0
    theta = math.atan2(u[1, 0], u[0, 0]) % math.pi
    if math.isclose(theta, math.pi):
        theta = 0.0
    return float(w[0]), float(w[1]), theta


def to_db(x):
    return 10.0 * np.log10(x)


class AtomicMedium:
    """Generator of one slice of atoms as an affine function of the local drive.

    L(Omega) = L0 + Omega Lp + conj(Omega) Lm, so re-linearising at a new
    drive value costs only a matrix sum.
    """

    def __init__(self, detuning, gamma, zeeman_shift=0.0, consts=None, basis=None,
                 hyperfine_loss=True):
        self.basis = basis or atom_model.build_basis(hyperfine_loss)
        self.dq = atom_model.dipole_matrices(self.basis)
        self.dx = atom_model.polarization_operator(self.dq, "x")
        self.dy = atom_model.polarization_operator(self.dq, "y")
        dec = atom_model.decay_operators(self.basis, self.dq)
        drive = atom_model.DriveParams(rabi=0.0, detuning=detuning, zeeman_shift=zeeman_shift)
        h0 = atom_model.hamiltonian(self.basis, drive, consts, dq=self.dq)
        self.n = len(self.basis)
        refill = atom_model.refill_state(self.basis)
        self.l0 = liouvillian.build_drift(h0, dec, gamma, refill=refill).matrix
        self.lp = liouvillian.commutator_superop(-0.5 * self.dx)
        self.lm = liouvillian.commutator_superop(-0.5 * self.dx.conj().T)

    def drift(self, rabi):
        rabi = complex(rabi)
        return liouvillian.DriftGenerator(
            self.l0 + rabi * self.lp + rabi.conjugate() * self.lm, self.n
        )

    def steady(self, rabi):
        drift = self.drift(rabi)
        return liouvillian.steady_state(drift), drift


def _default_dipoles(n):
    """D1 dipole matrices for the 13-state basis, or 14 with the reservoir."""
    basis = atom_model.build_basis(hyperfine_loss=(n == 14))
    if len(basis) != n:
        raise ValueError(f"no default basis with {n} states; pass dq")
    return atom_model.dipole_matrices(basis)


def mean_field_derivative(rho, dx):
    """dOmega/dC = 2 i <D_x^dag>."""
    return 2j * np.trace(rho @ dx.conj().T)


def mean_field_step(omega_rabi_in, rho_ss, dC, dq=None):
    """Explicit update of the drive across a slice of cooperativity dC."""
    if dq is None:
        dq = _default_dipoles(rho_ss.shape[0])
    dx = atom_model.polarization_operator(dq, "x")
    return omega_rabi_in + dC * mean_field_derivative(rho_ss, dx)


def _couplings(drift, rho, dy, omega, diff=None):
    """Per-unit-C drift M(w), M(-w) and noise Q(w), Q(-w) in the (b, b^dag) basis.

    ``diff`` is the full diffusion matrix; when omitted the needed
    quadratic forms are evaluated directly from the Einstein relation.
    """
    n = drift.n
    v1 = liouvillian.vec(dy @ rho - rho @ dy)
    dyh = dy.conj().T
    v2 = liouvillian.vec(dyh @ rho - rho @ dyh)
    # Tr(rho X) = vec(X^T) . vec(rho)
    c_row = liouvillian.vec(dyh.T)
    cp_row = liouvillian.vec(dy.T)
    rows = np.vstack([c_row, cp_row])
    areg = langevin.regularized_generator(drift, rho)
    a = -1j * omega * np.eye(n * n) - areg
    # row vectors w = c G  <=>  G^T c^T
    lu = scipy.linalg.lu_factor(a, check_finite=False)
    wc_p, wcp_p = scipy.linalg.lu_solve(lu, rows.T, trans=1, check_finite=False).T
    # Hermiticity preservation gives G(-w) = P conj(G(w)) P with P the transpose
    # permutation, and P conj maps c_row onto cp_row, so -w needs no second solve
    perm = np.arange(n * n).reshape(n, n).T.ravel()
    wc_m, wcp_m = wcp_p[perm].conj(), wc_p[perm].conj()
    out = {}
    for sgn, (wc, wcp) in ((1, (wc_p, wcp_p)), (-1, (wc_m, wcp_m))):
        m = np.array([[-wc @ v1, -wc @ v2], [wcp @ v1, wcp @ v2]])
        k = np.vstack([1j * wc, -1j * wcp])
        out[sgn] = (m, k)
    (mp, kp), (mm, km) = out[1], out[-1]
    if diff is not None:
        qp = kp @ (2 * diff) @ km.T
        qm = km @ (2 * diff) @ kp.T
    else:
        qp = np.array([[langevin.diffusion_form(drift, rho, x, y) for y in km] for x in kp])
        qm = np.array([[langevin.diffusion_form(drift, rho, x, y) for y in kp] for x in km])
    return mp, mm, qp, qm


def _evolve(m1, m2, q, h):
    """Exact solution over h of dS = m1 S + S m2^T + q (Van Loan)."""
    blk = np.zeros((4, 4), dtype=complex)
    blk[:2, :2] = m1
    blk[:2, 2:] = q
    blk[2:, 2:] = -m2.T
    e = scipy.linalg.expm(blk * h)
    e1 = e[:2, :2]
    e2t = scipy.linalg.expm(m2.T * h)
    return e1, e2t, e[:2, 2:] @ e2t


def slice_transfer(rho_ss, drift, diff, dC, omega, dq=None, max_step=0.1):
    """Quadrature-basis transfer T and added noise N for one slice.

    The (X_+, X_-) spectral matrix at +omega maps as S -> T S T^dag + N.
    T is complex for omega != 0. Raises :class:`SliceThicknessError` when
    ||T - I|| exceeds ``max_step``.
    """
    if dq is None:
        dq = _default_dipoles(drift.n)
    if dC == 0:
        return np.eye(2, dtype=complex), np.zeros((2, 2), dtype=complex)
    dy = atom_model.polarization_operator(dq, "y")
    mp, mm, qp, _ = _couplings(drift, rho_ss, dy, omega, diff)
    e1, e2t, nint = _evolve(mp, mm, qp, dC)
    t = _R @ e1 @ _R_INV
    if np.linalg.norm(t - np.eye(2), 2) > max_step:
        raise SliceThicknessError(
            f"slice too thick (||T - I|| = {np.linalg.norm(t - np.eye(2), 2):.3f}); raise n_slices"
        )
    return t, _R @ nint @ _R.T


def vacuum_spectral_matrix():
    return _R @ _VAC_A @ _R.T


def symmetrized_covariance(s_plus, s_minus, phase=0.0):
    """Real symmetric covariance from the +w and -w spectral matrices,
    expressed relative to a local oscillator of the given phase."""
    v = 0.5 * (s_plus + s_minus)
    v = 0.5 * (v + v.T).real
    c, s = math.cos(phase), math.sin(phase)
    rot = np.array([[c, -s], [s, c]])
    return rot.T @ v @ rot


@dataclass
class PropagationResult:
    covariance: FieldCovariance
    rabi_out: complex
    n_slices: int
    min_det: float


def propagate_covariance(drive, medium, consts=None, basis=None, max_step=0.1):
    """Fold the slice maps over the medium starting from vacuum.

    ``drive.rabi`` is the input drive (units of Gamma), ``drive.detuning``
    and ``drive.analysis_freq`` in units of Gamma. Returns a
    :class:`PropagationResult`; the covariance is referenced to the phase
    of the transmitted drive, which serves as local oscillator.
    """
    rabi = complex(drive.rabi)
    if medium.cooperativity == 0:
        return PropagationResult(FieldCovariance(np.eye(2)), rabi, medium.n_slices, 1.0)
    model = AtomicMedium(drive.detuning, medium.gamma, drive.zeeman_shift, consts, basis,
                         medium.hyperfine_loss)
    # Work in the frame co-rotating with the drive phase: the atoms see the
    # real amplitude |Omega| and the phase rate enters the field drift.
    amp, phase = abs(rabi), np.angle(rabi)
    sig_p = _VAC_A.copy()
    sig_m = _VAC_A.copy()
    dC = medium.slice_cooperativity
    omega = drive.analysis_freq
    dx, dy = model.dx, model.dy
    min_det = np.inf

    def rates(a):
        rho, drift = model.steady(a)
        k = mean_field_derivative(rho, dx)
        return rho, drift, k.real, (k.imag / a if a > 0 else 0.0)

    # the drive at the slice midpoint is predicted with the previous
    # midpoint rate (explicit two-step rule; one steady-state solve per slice)
    _, _, damp_prev, _ = rates(amp)
    for _ in range(medium.n_slices):
        amp_mid = max(amp + 0.5 * dC * damp_prev, 0.0)
        rho_mid, drift_mid, damp_mid, dphase_mid = rates(amp_mid)
        mp, mm, qp, qm = _couplings(drift_mid, rho_mid, dy, omega)
        # thickness is judged on the atomic coupling alone; the frame
        # rotation below is exact whatever its size
        step = np.linalg.norm(_R @ scipy.linalg.expm(mp * dC) @ _R_INV - np.eye(2), 2)
        if step > max_step:
            raise SliceThicknessError(
                f"slice too thick (||T - I|| = {step:.3f}); raise n_slices"
            )
        frame = np.diag([-1j * dphase_mid, 1j * dphase_mid])
        e1, e2t, np_int = _evolve(mp + frame, mm + frame, qp, dC)
        sig_p = e1 @ sig_p @ e2t + np_int
        e1m, e2tm, nm_int = _evolve(mm + frame, mp + frame, qm, dC)
        sig_m = e1m @ sig_m @ e2tm + nm_int
        amp = max(amp + dC * damp_mid, 0.0)
        phase = phase + dC * dphase_mid
        damp_prev = damp_mid
        v = symmetrized_covariance(_R @ sig_p @ _R.T, _R @ sig_m @ _R.T)
        min_det = min(min_det, float(np.linalg.det(v)))
    rabi = amp * np.exp(1j * phase)
    return PropagationResult(FieldCovariance(v), rabi, medium.n_slices, min_det)
