"""Dense operators and states on a truncated Fock space.

Operators, state vectors and density operators are plain complex numpy
arrays.  Functions that take states accept a leading batch axis, so an
ensemble of trajectories can be pushed through the same code path as a
single state.
"""

from dataclasses import dataclass
import warnings

import numpy as np

from .errors import IntegrationDivergedError, InvalidDimensionError, ShapeError

#: population of the highest retained Fock level above which we warn
LEAKAGE_WARN = 1e-6


@dataclass(frozen=True)
class Tolerances:
    """Physicality tolerances.

    Values below the ``eps_*`` thresholds are treated as exact; violations
    between those and ``hard_fail`` are repaired silently by
    :func:`project_physical`; anything beyond ``hard_fail`` aborts.
    """

    eps_norm: float = 1e-8
    eps_trace: float = 1e-8
    eps_herm: float = 1e-8
    eps_pos: float = 1e-8
    eps_im: float = 1e-9
    hard_fail: float = 1e-3


DEFAULT_TOL = Tolerances()


def _check_dim(dim):
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"truncation dimension must be an integer >= 2, got {dim!r}")
    return int(dim)


def annihilation(dim):
    """Truncated ladder operator with ``a[k, k+1] = sqrt(k+1)``."""
    dim = _check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def creation(dim):
    return adjoint(annihilation(dim))


def number_operator(dim):
    """``diag(0, 1, ..., dim-1)``, i.e. ``a^dagger a`` without rounding."""
    dim = _check_dim(dim)
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def identity(dim):
    return np.eye(dim, dtype=complex)


def fock_state(dim, n):
    dim = _check_dim(dim)
    if not 0 <= n < dim:
        raise InvalidDimensionError(f"Fock level {n} outside truncation 0..{dim - 1}")
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return psi


def ket_to_dm(psi):
    """``|psi><psi|`` for a single ket or a batch of kets."""
    psi = np.asarray(psi)
    return psi[..., :, None] * psi.conj()[..., None, :]


def adjoint(op):
    return np.conj(np.swapaxes(op, -1, -2))


def commutator(a, b):
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"commutator needs equal square operators, got {a.shape} and {b.shape}")
    return a @ b - b @ a


def vector_commutator(a_vec, b_vec):
    """Commutator of two operator vectors, ``a b^T - (b a^T)^T``.

    Entry ``(i, j)`` is ``[a_i, b_j]``.  Returns an array of shape
    ``(n, m, dim, dim)``.
    """
    a_vec = np.asarray(a_vec)
    b_vec = np.asarray(b_vec)
    if a_vec.ndim != 3 or b_vec.ndim != 3 or a_vec.shape[1:] != b_vec.shape[1:]:
        raise ShapeError("operator vectors must have shape (n, dim, dim) with a common dim")
    ab = np.einsum("iab,jbc->ijac", a_vec, b_vec)
    ba = np.einsum("jab,ibc->ijac", b_vec, a_vec)
    return ab - ba


def expect_kets(psi, op):
    """``<psi|op|psi> / <psi|psi>`` over the last axis of ``psi``."""
    psi = np.asarray(psi)
    op = np.asarray(op)
    _check_op(op, psi.shape[-1])
    eye = np.eye(op.shape[0], dtype=op.dtype)
    # same contraction for numerator and norm, so <I> is exactly 1
    num = np.einsum("...i,ij,...j->...", psi.conj(), op, psi)
    den = np.einsum("...i,ij,...j->...", psi.conj(), eye, psi).real
    return _ratio(num, den)


def expect_dms(rho, op):
    """``tr(rho op) / tr(rho)`` over the last two axes of ``rho``."""
    rho = np.asarray(rho)
    op = np.asarray(op)
    _check_op(op, rho.shape[-1])
    if rho.shape[-2] != rho.shape[-1]:
        raise ShapeError(f"density operator must be square, got {rho.shape[-2:]}")
    eye = np.eye(op.shape[0], dtype=op.dtype)
    num = np.einsum("...ij,ji->...", rho, op)
    den = np.einsum("...ij,ji->...", rho, eye).real
    return _ratio(num, den)


def _ratio(num, den):
    # complex / float rounds in numpy; dividing parts separately keeps <I> == 1
    return num.real / den + 1j * (num.imag / den)


def _check_op(op, d):
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ShapeError(f"operator must be square, got {op.shape}")
    if op.shape[0] != d:
        raise ShapeError(f"state dimension {d} does not match operator dimension {op.shape[0]}")


def expectation(state, op):
    """Expectation of ``op`` in a ket (1-d) or a density operator (2-d).

    Returns a complex scalar; its imaginary part is at rounding level when
    ``op`` is Hermitian.
    """
    state = np.asarray(state)
    if state.ndim == 1:
        return complex(expect_kets(state, op))
    if state.ndim == 2:
        return complex(expect_dms(state, op))
    raise ShapeError("expectation() takes a single state; use expect_kets/expect_dms for batches")


def leakage(state):
    """Population of the highest retained Fock level."""
    state = np.asarray(state)
    if state.ndim == 1:
        return float(abs(state[-1]) ** 2 / np.vdot(state, state).real)
    return float(state[-1, -1].real / np.trace(state).real)


def warn_leakage(value, threshold=LEAKAGE_WARN):
    if value > threshold:
        warnings.warn(
            f"truncation leakage {value:.3e} exceeds {threshold:.0e}; increase dim",
            RuntimeWarning,
            stacklevel=2,
        )


def physicality_violations(rho):
    """Return (hermiticity error, trace error, most negative eigenvalue) per state."""
    rho = np.asarray(rho)
    herm = np.max(np.abs(rho - adjoint(rho)), axis=(-2, -1))
    tr = np.abs(np.trace(rho, axis1=-2, axis2=-1) - 1.0)
    w = np.linalg.eigvalsh(0.5 * (rho + adjoint(rho)))
    return herm, tr, w[..., 0]


def is_physical(rho, tol=DEFAULT_TOL):
    herm, tr, wmin = physicality_violations(rho)
    return bool(np.all(herm <= tol.eps_herm) and np.all(tr <= tol.eps_trace) and np.all(wmin >= -tol.eps_pos))


def project_physical(rho, tol=DEFAULT_TOL):
    """Map an almost-physical density operator back onto the physical set.

    Hermitizes, clips negative eigenvalues to zero and renormalizes to unit
    trace.  Works on a single operator or a batch.  A state that is already
    exactly Hermitian, positive and normalized comes back unchanged.

    Raises
    ------
    IntegrationDivergedError
        If any violation exceeds ``tol.hard_fail``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim < 2 or rho.shape[-1] != rho.shape[-2]:
        raise ShapeError(f"density operator must be square, got {rho.shape}")
    herm = np.max(np.abs(rho - adjoint(rho)), axis=(-2, -1))
    tr = np.trace(rho, axis1=-2, axis2=-1)
    if np.any(herm > tol.hard_fail) or np.any(np.abs(tr - 1.0) > tol.hard_fail):
        raise IntegrationDivergedError(
            f"density operator drifted beyond repair: hermiticity error {np.max(herm):.3e}, "
            f"trace error {np.max(np.abs(tr - 1.0)):.3e}"
        )
    out = 0.5 * (rho + adjoint(rho))
    w, v = np.linalg.eigh(out)
    wmin = w[..., 0]
    if np.any(wmin < -tol.hard_fail):
        raise IntegrationDivergedError(f"density operator has eigenvalue {np.min(wmin):.3e}")
    negative = wmin < 0
    if np.any(negative):
        wc = np.clip(w, 0.0, None)
        fixed = np.einsum("...ij,...j,...kj->...ik", v, wc, v.conj())
        out = np.where(negative[..., None, None], fixed, out)
    tr = np.trace(out, axis1=-2, axis2=-1).real
    if np.any(tr != 1.0):
        out = out / tr[..., None, None]
    return out
