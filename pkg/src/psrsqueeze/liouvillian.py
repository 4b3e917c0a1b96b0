"""Linear generator of density-matrix evolution and its steady state.

Density matrices are column-major vectorised: vec(rho)[i + n*j] = rho[i, j],
so vec(A X B) = kron(B.T, A) vec(X).
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class SteadyStateError(RuntimeError):
    def __init__(self, msg, null_dim=None):
        super().__init__(msg)
        self.null_dim = null_dim


@dataclass
class DriftGenerator:
    matrix: np.ndarray
    n: int

    def apply(self, rho):
        return (self.matrix @ vec(rho)).reshape(self.n, self.n, order="F")

    def adjoint_apply(self, op):
        """Heisenberg-picture action on an operator."""
        return (self.matrix.conj().T @ vec(op)).reshape(self.n, self.n, order="F")


def vec(m):
    return np.asarray(m).reshape(-1, order="F")


def unvec(v, n):
    return np.asarray(v).reshape(n, n, order="F")


def _left(a):
    # vec(A X) = kron(I, A) vec(X)
    return np.kron(np.eye(a.shape[0]), a)


def _right(b):
    # vec(X B) = kron(B.T, I) vec(X)
    return np.kron(b.T, np.eye(b.shape[0]))


def isotropic_ground(decay_ops):
    """Equal mixture of every state that receives spontaneous decay."""
    n = next(iter(decay_ops.values())).shape[0]
    targets = sum(d.T @ d for d in decay_ops.values()).diagonal() > 0
    rho = np.diag(targets.astype(float))
    return rho / rho.trace()


def commutator_superop(h):
    """Matrix of rho -> -i[H, rho]."""
    h = np.asarray(h, dtype=complex)
    return -1j * (_left(h) - _right(h))


def build_drift(h, decay_ops, gamma, refill=None, gamma_natural=1.0):
    """L(rho) = -i[H, rho] + Gamma sum_q (D_q^+ rho D_q - 1/2 {D_q D_q^+, rho})
    + gamma (rho_iso Tr rho - rho).

    ``decay_ops`` maps q to raising matrices (excited row, ground column);
    their adjoints are the jump operators. ``refill`` defaults to the
    isotropic mixture of the decay targets.
    """
    h = np.asarray(h, dtype=complex)
    if not np.allclose(h, h.conj().T, atol=1e-12, rtol=0):
        raise ValueError("Hamiltonian is not Hermitian")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    n = h.shape[0]
    ident = np.eye(n)
    lmat = commutator_superop(h)
    for d in decay_ops.values():
        jump = d.conj().T
        jdj = jump.conj().T @ jump
        lmat += gamma_natural * (
            np.kron(jump.conj(), jump) - 0.5 * _left(jdj) - 0.5 * _right(jdj)
        )
    if gamma:
        if refill is None:
            refill = isotropic_ground(decay_ops)
        lmat += gamma * (np.outer(vec(refill), vec(ident)) - np.eye(n * n))
    return DriftGenerator(lmat, n)


def _null_dim(lmat, rcond=1e-11):
    sv = scipy.linalg.svdvals(lmat)
    return int(np.sum(sv <= rcond * sv[0]))


def steady_state(drift, rtol=1e-10, method="lu"):
    """Unique trace-one null vector of the generator.

    ``method="lstsq"`` solves the stacked system [L; Tr] x = [0; 1] by least
    squares. The default ``"lu"`` solves the equivalent square system
    (L - u Tr) x = -u with u the trace-one isotropic vector, which has the
    same unique solution whenever the null space of L is one-dimensional
    and is several times faster. Either way a non-unique steady state raises
    :class:`SteadyStateError` carrying the null-space dimension.
    """
    n = drift.n
    lmat = drift.matrix
    trace_row = vec(np.eye(n))
    if method == "lstsq":
        a = np.vstack([lmat, trace_row[None, :]])
        b = np.zeros(n * n + 1, dtype=complex)
        b[-1] = 1.0
        x, _, rank, _ = scipy.linalg.lstsq(a, b, lapack_driver="gelsd")
        if rank < n * n:
            dim = _null_dim(lmat)
            raise SteadyStateError(
                f"steady state is not unique: null space dimension {dim}", null_dim=dim
            )
    elif method == "lu":
        u = trace_row / n
        a = lmat - np.outer(u, trace_row)
        with warnings.catch_warnings():
            # exact singularity is reported below with the null-space dimension
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
        anorm = np.abs(a).sum(axis=0).max()
        rcond, _ = scipy.linalg.lapack.zgecon(lu, anorm, norm="1")
        if rcond < 1e-13:
            dim = _null_dim(lmat)
            raise SteadyStateError(
                f"steady state is not unique: null space dimension {dim}", null_dim=dim
            )
        x = scipy.linalg.lu_solve((lu, piv), -u, check_finite=False)
    else:
        raise ValueError(f"unknown method {method!r}")
    rho = unvec(x, n)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= rho.trace().real
    resid = np.linalg.norm(lmat @ vec(rho))
    if resid > rtol * max(1.0, np.abs(lmat).sum(axis=0).max()):
        raise SteadyStateError(f"steady-state residual {resid:.3e} too large")
    return rho
