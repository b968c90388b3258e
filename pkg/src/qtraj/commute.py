"""Closed-form self-commutativity test for a general measurement ``(F, G)``.

A measurement vector ``dY = F* dA~* + F dA~ + G dlambda~`` on n output channels
is self-commutative exactly when ``dY dY^T`` is symmetric.  Expanding the Ito
products for a unitary scattering matrix leaves

    (dY dY^T)_ij = (F F^dag)_ij dt
                   + sum_k G_ik F*_jk dA~*_k + sum_k F_ik G_jk dA~_k
                   + sum_k G_ik G_jk (...)_k,

and because the output increments ``dA~_k`` of different channels are
independent, symmetry must hold channel by channel:

* ``F F^dag`` symmetric, i.e. ``Re(F) Im(F)^T`` symmetric;
* for every channel k, ``g_k f_k^dag^T`` symmetric (g_k, f_k the k-th columns);
* for every channel k, ``g_k f_k^T`` symmetric.

Summing the per-channel statements over k gives the matrix identities
``G F^dag = F* G^T`` and ``G F^T = F G^T``; those are necessary but not
sufficient (F = I with G swapping the channels satisfies both, yet puts a
homodyne and a photon counter on the same output).  :func:`cross_validate`
checks the verdict against the brute-force Ito expansion in :mod:`qtraj.ito`.
"""

from dataclasses import dataclass, field
import json

import numpy as np

from . import ito
from .errors import OracleMismatchError, ShapeError


@dataclass(frozen=True)
class MeasurementSpec:
    """Quadrature weights ``F`` and counting weights ``G`` (both n x n)."""

    F: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.F, dtype=complex))
        G = np.atleast_2d(np.asarray(self.G, dtype=complex))
        if F.ndim != 2 or F.shape[0] != F.shape[1]:
            raise ShapeError(f"F must be square, got shape {F.shape}")
        if G.shape != F.shape:
            raise ShapeError(f"G must have the shape of F {F.shape}, got {G.shape}")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)

    @property
    def n(self):
        return self.F.shape[0]


@dataclass(frozen=True)
class CommutativityReport:
    commutative: bool
    condition_F: bool
    condition_GFstar: bool
    condition_GF: bool
    violation_norms: tuple
    #: max asymmetry of G F^dag and G F^T summed over channels (necessary conditions)
    matrix_form_norms: tuple = field(default=(0.0, 0.0))
    tol: float = 0.0

    def to_dict(self):
        return {
            "commutative": self.commutative,
            "condition_F": self.condition_F,
            "condition_GFstar": self.condition_GFstar,
            "condition_GF": self.condition_GF,
            "violation_norms": list(self.violation_norms),
            "matrix_form_norms": list(self.matrix_form_norms),
            "tol": self.tol,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def default_tol(spec):
    scale = max(1.0, np.linalg.norm(spec.F, 2), np.linalg.norm(spec.G, 2))
    return 1e-10 * scale**2


def _asym(M):
    return float(np.max(np.abs(M - M.T), initial=0.0))


def check_self_commutative(spec, tol=None):
    """Evaluate the three commutativity conditions for ``spec``.

    Parameters
    ----------
    spec : MeasurementSpec
    tol : float, optional
        Absolute tolerance on each asymmetry; defaults to
        ``1e-10 * max(1, |F|, |G|)**2``.

    Returns
    -------
    CommutativityReport
    """
    if not isinstance(spec, MeasurementSpec):
        spec = MeasurementSpec(*spec)
    if tol is None:
        tol = default_tol(spec)
    if tol <= 0:
        raise ValueError("tol must be positive")
    F, G = spec.F, spec.G

    v_F = _asym(F @ F.conj().T)
    v_GFstar = 0.0
    v_GF = 0.0
    for k in range(spec.n):
        g, f = G[:, k], F[:, k]
        v_GFstar = max(v_GFstar, _asym(np.outer(g, f.conj())))
        v_GF = max(v_GF, _asym(np.outer(g, f)))

    c_F, c_GFs, c_GF = v_F <= tol, v_GFstar <= tol, v_GF <= tol
    return CommutativityReport(
        commutative=bool(c_F and c_GFs and c_GF),
        condition_F=bool(c_F),
        condition_GFstar=bool(c_GFs),
        condition_GF=bool(c_GF),
        violation_norms=(v_F, v_GFstar, v_GF),
        matrix_form_norms=(_asym(G @ F.conj().T), _asym(G @ F.T)),
        tol=float(tol),
    )


def real_part_conditions(spec, tol=None):
    """Real/imaginary-part form of the channel-wise conditions.

    Returns ``(F-condition, GF-conditions)`` where the first flag checks
    ``Re(F) Im(F)^T`` and the second requires, for every channel k, the four
    products ``Re/Im(g_k) Re/Im(f_k)^T`` to be symmetric.  Their conjunction
    is equivalent to :func:`check_self_commutative`'s verdict.
    """
    if tol is None:
        tol = default_tol(spec)
    F, G = spec.F, spec.G
    ok_F = _asym(F.real @ F.imag.T) <= tol
    ok_G = True
    for k in range(spec.n):
        g, f = G[:, k], F[:, k]
        for a in (g.real, g.imag):
            for b in (f.real, f.imag):
                ok_G &= _asym(np.outer(a, b)) <= tol
    return bool(ok_F), bool(ok_G)


def _serialize_instance(spec, S, L):
    def pairs(M):
        return np.stack([M.real, M.imag], axis=-1).tolist()

    return {"F": pairs(spec.F), "G": pairs(spec.G), "S": pairs(S), "L": [pairs(x) for x in L]}


def cross_validate(spec, trials=50, rng=None, probe_dim=ito.PROBE_DIM):
    """Compare the closed form with the Ito-table symmetry on random systems.

    Each trial draws a random unitary S and random coupling operators L,
    expands ``dY dY^T`` symbolically and checks its symmetry.

    Raises
    ------
    OracleMismatchError
        On the first disagreement; the offending (F, G, S, L) is attached as
        ``instance``.
    """
    if not isinstance(spec, MeasurementSpec):
        spec = MeasurementSpec(*spec)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    verdict = check_self_commutative(spec).commutative
    for _ in range(trials):
        S = ito.random_unitary(spec.n, rng)
        L = ito.random_operators(spec.n, probe_dim, rng)
        table = ito.product_table(ito.build_dY(spec.F, spec.G, S, L))
        oracle = ito.is_symmetric(table)
        if oracle != verdict:
            raise OracleMismatchError(
                f"closed form says commutative={verdict}, Ito table says {oracle}",
                instance=_serialize_instance(spec, S, L),
            )
    return True
