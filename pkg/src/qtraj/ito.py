"""Quantum Ito algebra over the fundamental increments dLambda_{kl}.

Index 0 is reserved for time, so ``dLambda_{00} = dt``, ``dLambda_{0k} = dA_k``
(annihilation on channel k) and ``dLambda_{k0} = dA_k^dagger``.  Channels are
numbered 1..n.  Products follow

    dLambda_{kr} dLambda_{sl} = delta_hat_{rs} dLambda_{kl},

with ``delta_hat_{rs} = 0`` whenever r or s is 0.  Coefficients are system
operators (dense dim x dim arrays) and multiply in left-to-right order; system
operators commute with the increments of the same time step.

The module is deliberately brute force: it is the oracle against which the
closed-form commutativity conditions in :mod:`qtraj.commute` are checked.
"""

import numpy as np

from .errors import ConfigurationError, ShapeError

#: tolerance on S S^dagger = I for scattering matrices
EPS_UNIT = 1e-10
#: relative tolerance for deciding that an operator coefficient is zero
EPS_SYM = 1e-10
#: Hilbert dimension of the random system operators used for probing
PROBE_DIM = 4


class ItoExpression:
    """Formal sum ``sum_{k,l} c_{kl} dLambda_{kl}`` with operator coefficients.

    Parameters
    ----------
    n : int
        Number of field channels.
    dim : int
        Dimension of the system Hilbert space the coefficients act on.
    terms : dict, optional
        Map ``(k, l) -> coefficient``.  Scalars are promoted to multiples of
        the identity.  Exactly-zero coefficients are dropped.
    """

    __slots__ = ("n", "dim", "terms")

    def __init__(self, n, dim, terms=None):
        self.n = int(n)
        self.dim = int(dim)
        self.terms = {}
        for (k, l), c in (terms or {}).items():
            self._accumulate(k, l, c)

    def _coerce(self, c):
        c = np.asarray(c, dtype=complex)
        if c.ndim == 0:
            return c * np.eye(self.dim, dtype=complex)
        if c.shape != (self.dim, self.dim):
            raise ShapeError(f"coefficient has shape {c.shape}, expected {(self.dim, self.dim)}")
        return c

    def _accumulate(self, k, l, c):
        if not (0 <= k <= self.n and 0 <= l <= self.n):
            raise ShapeError(f"increment index ({k}, {l}) outside 0..{self.n}")
        c = self._coerce(c)
        if (k, l) in self.terms:
            c = self.terms[(k, l)] + c
        if np.any(c != 0):
            self.terms[(k, l)] = c
        else:
            self.terms.pop((k, l), None)

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls, n, dim):
        return cls(n, dim)

    @classmethod
    def increment(cls, n, dim, k, l, coeff=1.0):
        return cls(n, dim, {(k, l): coeff})

    @classmethod
    def dt(cls, n, dim, coeff=1.0):
        return cls.increment(n, dim, 0, 0, coeff)

    @classmethod
    def dA(cls, n, dim, k, coeff=1.0):
        return cls.increment(n, dim, 0, k, coeff)

    @classmethod
    def dA_dag(cls, n, dim, k, coeff=1.0):
        return cls.increment(n, dim, k, 0, coeff)

    # algebra ------------------------------------------------------------
    def _compatible(self, other):
        if not isinstance(other, ItoExpression):
            return False
        if (self.n, self.dim) != (other.n, other.dim):
            raise ShapeError(
                f"incompatible Ito expressions: (n={self.n}, dim={self.dim}) vs (n={other.n}, dim={other.dim})"
            )
        return True

    def copy(self):
        out = ItoExpression(self.n, self.dim)
        out.terms = {key: c.copy() for key, c in self.terms.items()}
        return out

    def __add__(self, other):
        if not self._compatible(other):
            return NotImplemented
        out = self.copy()
        for (k, l), c in other.terms.items():
            out._accumulate(k, l, c)
        return out

    def __neg__(self):
        out = ItoExpression(self.n, self.dim)
        out.terms = {key: -c for key, c in self.terms.items()}
        return out

    def __sub__(self, other):
        if not self._compatible(other):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, ItoExpression):
            return ito_product(self, other)
        if np.isscalar(other):
            return ItoExpression(self.n, self.dim, {key: c * other for key, c in self.terms.items()})
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return self * other
        return NotImplemented

    def __matmul__(self, op):
        """Right-multiply every coefficient by a system operator."""
        op = self._coerce(op)
        return ItoExpression(self.n, self.dim, {key: c @ op for key, c in self.terms.items()})

    def __rmatmul__(self, op):
        """Left-multiply every coefficient by a system operator."""
        op = self._coerce(op)
        return ItoExpression(self.n, self.dim, {key: op @ c for key, c in self.terms.items()})

    # inspection ---------------------------------------------------------
    def coefficient(self, k, l):
        return self.terms.get((k, l), np.zeros((self.dim, self.dim), dtype=complex))

    def max_abs(self):
        if not self.terms:
            return 0.0
        return max(float(np.max(np.abs(c))) for c in self.terms.values())

    def is_zero(self, atol=0.0):
        return self.max_abs() <= atol

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        keys = ", ".join(f"dL{k}{l}" for k, l in sorted(self.terms))
        return f"ItoExpression(n={self.n}, dim={self.dim}, terms=[{keys}])"


def ito_product(x, y):
    """Ito product of two increment expressions."""
    if not isinstance(x, ItoExpression) or not isinstance(y, ItoExpression):
        raise ShapeError("ito_product takes two ItoExpression operands")
    x._compatible(y)
    out = ItoExpression(x.n, x.dim)
    for (k, r), cx in x.terms.items():
        if r == 0:
            continue
        for (s, l), cy in y.terms.items():
            if s == r:
                out._accumulate(k, l, cx @ cy)
    return out


def _check_vector(vec):
    if not vec:
        return
    n, dim = vec[0].n, vec[0].dim
    for e in vec:
        if (e.n, e.dim) != (n, dim):
            raise ShapeError("ItoVector entries must share channel count and dimension")


def check_unitary(S, eps=EPS_UNIT):
    S = np.asarray(S, dtype=complex)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ShapeError(f"scattering matrix must be square, got {S.shape}")
    err = np.max(np.abs(S @ S.conj().T - np.eye(S.shape[0])), initial=0.0)
    if err > eps:
        raise ConfigurationError(f"scattering matrix is not unitary (|S S^dag - I| = {err:.3e})")
    return S


def build_dY(F, G, S, L):
    """Measurement increments ``dY = F* dA~* + F dA~ + G dlambda~`` of the outputs.

    The output fields of an ``(S, L, H)`` system are substituted term by term:

    * ``da1_i = sum_k S*_ik dA_k^dag``, ``da2_i = sum_k S_ik dA_k``
    * ``da3_i = sum_j (F*_ij L_j^dag + F_ij L_j) dt``
    * ``db1_i = sum_{k,k'} S*_ik S_ik' dLambda_{kk'}``
    * ``db2_i = sum_k S*_ik L_i dA_k^dag``, ``db3_i = sum_k L_i^dag S_ik dA_k``
    * ``db4_i = L_i^dag L_i dt``

    and ``dY = F* da1 + F da2 + da3 + G (db1 + db2 + db3 + db4)``.

    Parameters
    ----------
    F, G : (n, n) complex arrays
        Quadrature and counting weights.
    S : (n, n) complex array
        Scattering matrix, unitary.
    L : (n, dim, dim) complex array
        Coupling operators, one per channel.

    Returns
    -------
    list of ItoExpression
        ``dY_1 .. dY_n``.
    """
    F = np.asarray(F, dtype=complex)
    G = np.asarray(G, dtype=complex)
    S = check_unitary(S)
    L = np.asarray(L, dtype=complex)
    n = S.shape[0]
    if F.shape != (n, n) or G.shape != (n, n):
        raise ShapeError(f"F and G must be {n}x{n}, got {F.shape} and {G.shape}")
    if L.ndim != 3 or L.shape[0] != n or L.shape[1] != L.shape[2]:
        raise ShapeError(f"L must have shape ({n}, dim, dim), got {L.shape}")
    dim = L.shape[1]
    Ld = np.conj(np.swapaxes(L, -1, -2))
    E = ItoExpression

    da1 = [sum((E.dA_dag(n, dim, k + 1, np.conj(S[i, k])) for k in range(n)), E.zero(n, dim)) for i in range(n)]
    da2 = [sum((E.dA(n, dim, k + 1, S[i, k]) for k in range(n)), E.zero(n, dim)) for i in range(n)]
    db = []
    for i in range(n):
        b1 = E(n, dim, {(k + 1, kp + 1): np.conj(S[i, k]) * S[i, kp] for k in range(n) for kp in range(n)})
        b2 = sum((E.dA_dag(n, dim, k + 1, np.conj(S[i, k]) * L[i]) for k in range(n)), E.zero(n, dim))
        b3 = sum((E.dA(n, dim, k + 1, Ld[i] * S[i, k]) for k in range(n)), E.zero(n, dim))
        b4 = E.dt(n, dim, Ld[i] @ L[i])
        db.append(b1 + b2 + b3 + b4)

    dY = []
    for i in range(n):
        y = E.dt(n, dim, sum(np.conj(F[i, j]) * Ld[j] + F[i, j] * L[j] for j in range(n)))
        for j in range(n):
            y = y + np.conj(F[i, j]) * da1[j] + F[i, j] * da2[j] + G[i, j] * db[j]
        dY.append(y)
    return dY


def product_table(dY):
    """All pairwise Ito products ``(dY dY^T)_{ij} = dY_i dY_j``."""
    _check_vector(dY)
    return [[ito_product(yi, yj) for yj in dY] for yi in dY]


def self_commutator(vec):
    """``vec vec^T - (vec vec^T)^T`` with Ito products as the multiplication."""
    _check_vector(vec)
    return [[ito_product(vi, vj) - ito_product(vj, vi) for vj in vec] for vi in vec]


def random_unitary(n, rng):
    """Haar-ish unitary from the QR decomposition of a complex Gaussian matrix."""
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_operators(n, dim, rng):
    """``n`` system operators with i.i.d. standard-normal real and imaginary parts."""
    return rng.standard_normal((n, dim, dim)) + 1j * rng.standard_normal((n, dim, dim))


def _table_asymmetry(table):
    worst = 0.0
    m = len(table)
    for i in range(m):
        if len(table[i]) != m:
            raise ShapeError("product table must be square")
        for j in range(i + 1, m):
            scale = max(1.0, table[i][j].max_abs(), table[j][i].max_abs())
            worst = max(worst, (table[i][j] - table[j][i]).max_abs() / scale)
    return worst


def is_symmetric(table, probe_count=8, rng=None, tol=EPS_SYM):
    """Decide whether ``dY dY^T`` is symmetric, i.e. the measurements commute.

    ``table`` is either a concrete n x n list of :class:`ItoExpression` (whose
    coefficients are compared directly) or a callable ``builder(S, L)``
    returning such a table.  A builder is probed on ``probe_count`` random
    unitary ``S`` and random coupling vectors ``L``; since the coefficients
    are polynomials in the entries of S and L, a generic probe exposes any
    asymmetry.
    """
    if callable(table):
        n = getattr(table, "n_channels", None)
        if n is None:
            raise ShapeError("builder passed to is_symmetric needs an 'n_channels' attribute")
        if rng is None:
            rng = np.random.default_rng()
        for _ in range(probe_count):
            S = random_unitary(n, rng)
            L = random_operators(n, PROBE_DIM, rng)
            if _table_asymmetry(table(S, L)) > tol:
                return False
        return True
    return _table_asymmetry(table) <= tol


def table_builder(F, G):
    """Callable ``(S, L) -> product_table(build_dY(F, G, S, L))`` for probing."""
    F = np.asarray(F, dtype=complex)
    G = np.asarray(G, dtype=complex)

    def builder(S, L):
        return product_table(build_dY(F, G, S, L))

    builder.n_channels = F.shape[0]
    return builder
