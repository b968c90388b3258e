"""SLH models and their network composition.

An open quantum system with n field channels is the triple ``(S, L, H)``:
an n x n unitary scattering matrix (scalar entries here), a length-n vector
of coupling operators and a Hamiltonian.

Series product convention: ``series(G1, G2)`` feeds the outputs of ``G1``
into the inputs of ``G2`` and gives

    S = S2 S1,   L = L2 + S2 L1,
    H = H1 + H2 + (L2^dag S2 L1 - L1^dag S2^dag L2) / 2i.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError
from .hilbert import adjoint
from .ito import EPS_UNIT
from .serialize import from_pairs, to_pairs

EPS_HERM = 1e-8


@dataclass(frozen=True)
class SLHModel:
    S: np.ndarray
    L: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        # copies, so freezing them below never touches the caller's arrays
        S = np.atleast_2d(np.array(self.S, dtype=complex))
        L = np.array(self.L, dtype=complex)
        H = np.array(self.H, dtype=complex)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ShapeError(f"S must be square, got {S.shape}")
        n = S.shape[0]
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ShapeError(f"H must be a square operator, got {H.shape}")
        dim = H.shape[0]
        if L.ndim == 2 and n == 1:
            L = L[None]
        if L.shape != (n, dim, dim):
            raise ShapeError(f"L must have shape ({n}, {dim}, {dim}), got {L.shape}")
        err = np.max(np.abs(S @ S.conj().T - np.eye(n)))
        if err > EPS_UNIT:
            raise ConfigurationError(f"S is not unitary (|S S^dag - I| = {err:.3e})")
        herr = np.max(np.abs(H - H.conj().T))
        if herr > EPS_HERM:
            raise ConfigurationError(f"H is not Hermitian (|H - H^dag| = {herr:.3e})")
        for name, val in (("S", S), ("L", L), ("H", H)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.S.shape[0]

    @property
    def dim(self):
        return self.H.shape[0]

    def to_dict(self):
        return {"S": to_pairs(self.S), "L": [to_pairs(x) for x in self.L], "H": to_pairs(self.H)}

    @classmethod
    def from_dict(cls, d, name="SLH"):
        try:
            S = from_pairs(d["S"], 2, f"{name}.S")
            H = from_pairs(d["H"], 2, f"{name}.H")
            L = from_pairs(d["L"], 3, f"{name}.L")
        except KeyError as exc:
            raise ConfigurationError(f"{name}: missing field {exc}") from None
        return cls(S, L, H)

    def allclose(self, other, atol=1e-12):
        return (
            self.S.shape == other.S.shape
            and self.L.shape == other.L.shape
            and np.allclose(self.S, other.S, atol=atol, rtol=0)
            and np.allclose(self.L, other.L, atol=atol, rtol=0)
            and np.allclose(self.H, other.H, atol=atol, rtol=0)
        )


def trivial(n, dim):
    """Pass-through component ``(I_n, 0, 0)``."""
    return SLHModel(np.eye(n), np.zeros((n, dim, dim)), np.zeros((dim, dim)))


def concatenate(G1, G2):
    """Parallel composition: block-diagonal S, stacked L, summed H."""
    if G1.dim != G2.dim:
        raise ShapeError(f"cannot concatenate systems of dimension {G1.dim} and {G2.dim}")
    n1, n2 = G1.n, G2.n
    S = np.zeros((n1 + n2, n1 + n2), dtype=complex)
    S[:n1, :n1] = G1.S
    S[n1:, n1:] = G2.S
    return SLHModel(S, np.concatenate([G1.L, G2.L]), G1.H + G2.H)


def series(G1, G2):
    """Cascade: outputs of ``G1`` drive the inputs of ``G2``."""
    if G1.n != G2.n:
        raise ShapeError(f"series product needs equal channel counts, got {G1.n} and {G2.n}")
    if G1.dim != G2.dim:
        raise ShapeError(f"series product needs equal dimensions, got {G1.dim} and {G2.dim}")
    # elementwise products then a plain sum: exact when S2 L1 has one nonzero term
    S2L1 = (G2.S[:, :, None, None] * G1.L[None]).sum(axis=1)
    L = G2.L + S2L1
    cross = np.einsum("iba,ibc->ac", G2.L.conj(), S2L1)
    H = G1.H + G2.H + (cross - adjoint(cross)) / 2j
    return SLHModel(G2.S @ G1.S, L, H)


def beam_splitter_matrix(r, theta):
    if not 0.0 <= r <= 1.0:
        raise ConfigurationError(f"reflectivity amplitude r must lie in [0, 1], got {r}")
    t = np.sqrt(1.0 - r * r)
    phase = np.exp(1j * theta)
    # e^{i(theta + pi/2)} written as i e^{i theta} so r=1, theta=0 is exact
    return np.array([[t * phase, 1j * r * phase], [1j * r * phase, t * phase]])


def beam_splitter(r, theta, dim=1):
    """Static beam splitter ``(S_bs, 0, 0)`` with reflectivity amplitude ``r``."""
    S = beam_splitter_matrix(r, theta)
    return SLHModel(S, np.zeros((2, dim, dim)), np.zeros((dim, dim)))


def beam_splitter_network(L, H, r, theta):
    """Cavity output mixed with vacuum on a beam splitter.

    Builds ``(G1 [+] G2) |> G3`` with ``G1 = (1, L, H)``, ``G2 = (1, 0, 0)``
    and ``G3`` the beam splitter; the result is ``(S_bs, S_bs [L; 0], H)``.
    """
    L = np.asarray(L, dtype=complex)
    dim = L.shape[0]
    system = SLHModel(np.eye(1), L[None], H)
    vacuum = trivial(1, dim)
    return series(concatenate(system, vacuum), beam_splitter(r, theta, dim))


def compose(expr, components):
    """Evaluate a composition tree.

    ``expr`` is a component name or a list ``["series" | "concat", e1, e2, ...]``
    folded from the left.
    """
    if isinstance(expr, str):
        try:
            return components[expr]
        except KeyError:
            raise ConfigurationError(f"unknown component {expr!r}") from None
    if not isinstance(expr, (list, tuple)) or len(expr) < 3:
        raise ConfigurationError(f"malformed composition expression {expr!r}")
    op, *args = expr
    ops = {"series": series, "concat": concatenate, "concatenate": concatenate}
    if op not in ops:
        raise ConfigurationError(f"unknown composition operator {op!r}")
    out = compose(args[0], components)
    for a in args[1:]:
        out = ops[op](out, compose(a, components))
    return out
