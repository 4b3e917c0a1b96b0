"""Langevin forces and linear fluctuation response around a steady state.

Operator basis: s_mu = |j><i| for mu = i + n*j, so that <s_mu> = vec(rho)[mu]
and the Heisenberg drift of the vector s is the same matrix L that evolves
vec(rho). Fourier convention f(w) = int f(t) exp(iwt) dt.
"""

import warnings

import numpy as np
import scipy.linalg

from . import liouvillian
from .liouvillian import vec, unvec


class ResolventError(RuntimeError):
    pass


def heisenberg_operators(drift):
    """Array Y with Y[mu] = L^dag(s_mu) (the Heisenberg-picture drift of s_mu)."""
    n = drift.n
    # Tr(rho L^dag(X)) = Tr(L(rho) X) gives L^dag(s_mu)[b, a] = L[mu, a + n b]
    return drift.matrix.reshape(n * n, n, n)


def diffusion_matrix(drift, rho_ss, check=True, tol=1e-8):
    """Diffusion matrix D with <F_mu(t) F_nu(t')> = 2 D_mu,nu delta(t - t').

    Generalised Einstein relation, all expectations in the steady state:
    2 D_mu,nu = <L^dag(s_mu s_nu)> - <L^dag(s_mu) s_nu> - <s_mu L^dag(s_nu)>.
    """
    n = drift.n
    lrho = drift.apply(rho_ss)
    if check:
        scale = max(1.0, np.abs(drift.matrix).sum(axis=0).max())
        if np.linalg.norm(lrho) > tol * scale:
            raise ValueError("rho_ss is not a steady state of the generator")
    y = heisenberg_operators(drift)
    eye = np.eye(n)
    # s_mu s_nu = delta(i, j') |j><i'|, so <L^dag(s_mu s_nu)> = delta(i, j') L(rho)[i', j]
    term_a = np.einsum("iJ,Ij->jiJI", eye, lrho).reshape(n * n, n * n)
    # <L^dag(s_mu) s_nu> = (rho Y_mu)[i', j']
    term_b = np.einsum("ab,mbc->mca", rho_ss, y).reshape(n * n, n * n)
    # <s_mu L^dag(s_nu)> = (Y_nu rho)[i, j]
    term_c = np.einsum("mab,bc->mca", y, rho_ss).reshape(n * n, n * n).T
    return 0.5 * (term_a - term_b - term_c)


def operator_from_coefficients(x, n):
    """X = sum_mu x_mu s_mu as an n x n matrix."""
    return np.asarray(x).reshape(n, n, order="F").T


def diffusion_form(drift, rho_ss, x, y):
    """sum_mu,nu x_mu y_nu 2 D_mu,nu without building D.

    Uses bilinearity of the Einstein relation:
    <L^dag(XY)> - <L^dag(X) Y> - <X L^dag(Y)> for X = x.s, Y = y.s.
    """
    n = drift.n
    lm = drift.matrix
    xo = operator_from_coefficients(x, n)
    yo = operator_from_coefficients(y, n)
    lx = (np.asarray(x) @ lm).reshape(n, n)
    ly = (np.asarray(y) @ lm).reshape(n, n)
    xy = xo @ yo
    lxy = (liouvillian.vec(xy.T) @ lm).reshape(n, n)
    return np.trace(rho_ss @ (lxy - lx @ yo - xo @ ly))


def regularized_generator(drift, rho_ss):
    """L - vec(rho_ss) vec(I)^T: invertible, and equal to L on traceless vectors.

    The trace mode carries no fluctuations (the identity operator is
    constant), so replacing its zero eigenvalue leaves every physical
    response unchanged while making w = 0 well posed.
    """
    n = drift.n
    return drift.matrix - np.outer(vec(rho_ss), vec(np.eye(n)))


def resolvent(drift, omega, rho_ss, check=True):
    """G(w) = (-i w - L)^-1 restricted to traceless inputs."""
    a = -1j * omega * np.eye(drift.n ** 2) - regularized_generator(drift, rho_ss)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    if check:
        anorm = np.abs(a).sum(axis=0).max()
        rcond, info = scipy.linalg.lapack.zgecon(lu, anorm, norm="1")
        if rcond < 1e-12:
            raise ResolventError(
                f"resolvent near singular at omega={omega} (rcond={rcond:.2e}); undamped mode"
            )
    return lu, piv


def fluctuation_spectrum(drift, diff, omega, rho_ss):
    """S_mu,nu(w) with <ds_mu(w) ds_nu(w')> = 2 pi delta(w + w') S_mu,nu(w).

    S(w) = G(w) 2D G(-w)^T; at w = 0 this is A^-1 2D A^-T.
    """
    lu_p = resolvent(drift, omega, rho_ss)
    lu_m = resolvent(drift, -omega, rho_ss)
    left = scipy.linalg.lu_solve(lu_p, 2.0 * diff)
    # right-multiply by G(-w)^T: X G(-w)^T = (G(-w) X^T)^T
    return scipy.linalg.lu_solve(lu_m, left.T).T


def equal_time_covariance(rho_ss, n=None):
    """<s_mu s_nu> - <s_mu><s_nu> evaluated directly in the steady state."""
    n = rho_ss.shape[0]
    eye = np.eye(n)
    # <s_mu s_nu> = delta(i, j') rho[i', j]
    second = np.einsum("iJ,Ij->jiJI", eye, rho_ss).reshape(n * n, n * n)
    r = vec(rho_ss)
    return second - np.outer(r, r)
