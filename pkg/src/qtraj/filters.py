"""Conditional-state propagators for joint homodyne detection and photon counting.

The system output (coupling ``L``, Hamiltonian ``H``) is split on a beam
splitter with reflectivity amplitude ``r``: the transmitted arm
(amplitude ``sqrt(1 - r^2)``) goes to a homodyne detector with local-oscillator
phase ``theta``, the reflected arm (intensity ``r^2``) to a photon counter.
Per channel the effective measurement operators are

    c_hom = sqrt(1 - r^2) e^{i theta} L,      c_cnt = i r e^{i theta} L,

so the homodyne signal has mean ``sqrt(1-r^2) <e^{i theta} L + h.c.> dt`` and
the counter fires at rate ``r^2 <L^dag L>``.

Every stepper works on a single state or on a batch (leading axes), which is
how :mod:`qtraj.ensemble` runs many trajectories at once.  Increments are
either drawn internally (simulation) or passed in (filtering a measured
record, or pairing two steppers on the same noise).

On a step with a photocount the jump map ``L psi / |L psi|`` is applied on its
own; ``dN dt = dN dW = 0`` in the Ito sense, so this is the first-order
completion of the combined update and keeps Fock states exact under jumps.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np

from . import ito
from .commute import MeasurementSpec, check_self_commutative
from .errors import ConfigurationError, ImpossibleJumpError, ShapeError
from .hilbert import DEFAULT_TOL, adjoint, annihilation, expect_dms, project_physical
from .network import beam_splitter_network

#: below this <L^dag L> the counting channel is treated as closed
EPS_RATE = 1e-12
#: rate * dt above which first-order Bernoulli thinning is unreliable
JUMP_PROB_WARN = 0.1

HOMODYNE_F = np.diag([1.0, 0.0])
COUNTING_G = np.diag([0.0, 1.0])


@dataclass(frozen=True)
class FilterSetup:
    """Beam-splitter measurement setup around a system ``(L, H)``."""

    L: np.ndarray
    H: np.ndarray
    r: float
    theta: float = 0.0
    slh: object = field(init=False, repr=False)

    def __post_init__(self):
        L = np.asarray(self.L, dtype=complex)
        H = np.asarray(self.H, dtype=complex)
        if L.ndim != 2 or L.shape[0] != L.shape[1] or H.shape != L.shape:
            raise ShapeError(f"L and H must be square operators of equal shape, got {L.shape}, {H.shape}")
        if not 0.0 <= self.r <= 1.0:
            raise ConfigurationError(f"r must lie in [0, 1], got {self.r}")
        report = check_self_commutative(MeasurementSpec(HOMODYNE_F, COUNTING_G))
        if not report.commutative:
            raise ConfigurationError("homodyne + counting measurement is not self-commutative")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "slh", beam_splitter_network(L, H, self.r, self.theta))
        LdL = adjoint(L) @ L
        object.__setattr__(self, "_LdL", LdL)
        object.__setattr__(self, "_Heff", H - 0.5j * LdL)

    @property
    def dim(self):
        return self.L.shape[0]

    @property
    def r2(self):
        return self.r * self.r

    @property
    def eta(self):
        """Fraction of the output intensity reaching the homodyne detector."""
        return 1.0 - self.r * self.r

    @property
    def phase(self):
        return np.exp(1j * self.theta)

    @property
    def c_hom(self):
        return np.sqrt(self.eta) * self.phase * self.L

    @property
    def c_cnt(self):
        return 1j * self.r * self.phase * self.L

    @property
    def L_vec(self):
        return self.slh.L


def cavity_setup(dim, gamma, r2, theta=0.0, H=None):
    """Damped cavity mode, ``L = sqrt(gamma) a``, with ``H = 0`` by default."""
    if gamma < 0:
        raise ConfigurationError(f"gamma must be non-negative, got {gamma}")
    if not 0.0 <= r2 <= 1.0:
        raise ConfigurationError(f"r2 must lie in [0, 1], got {r2}")
    L = np.sqrt(gamma) * annihilation(dim)
    if H is None:
        H = np.zeros((dim, dim), dtype=complex)
    return FilterSetup(L, H, float(np.sqrt(r2)), theta)


@dataclass(frozen=True)
class StepRecord:
    """Increments of one step (arrays when stepping a batch).

    ``norm_before`` is the state norm before renormalization (SSE steppers
    only).
    """

    dY1: object
    dN: object
    dW: object
    jump_rate: object
    norm_before: object = None


# ---------------------------------------------------------------------------
# a-priori generator, expectations and gains


def lindblad_rhs(rho, H, L_vec):
    """``-i[H, rho] + sum_k (L_k rho L_k^dag - {L_k^dag L_k, rho} / 2)``."""
    rho = np.asarray(rho)
    L_vec = np.asarray(L_vec, dtype=complex)
    if L_vec.ndim == 2:
        L_vec = L_vec[None]
    d = rho.shape[-1]
    if H.shape != (d, d) or L_vec.shape[1:] != (d, d) or rho.shape[-2] != d:
        raise ShapeError("lindblad_rhs: operator shapes do not match the density operator")
    LdL = np.einsum("kji,kjl->il", L_vec.conj(), L_vec)
    K = -1j * H - 0.5 * LdL
    out = K @ rho + rho @ adjoint(K)
    for Lk in L_vec:
        out = out + Lk @ rho @ adjoint(Lk)
    return out


def measurement_expectations(rho, setup, dt):
    """Conditional means and Ito correlation of the two measurement increments.

    Returns ``(e1, e2, Sigma)`` with ``e1 = pi(dY1)``, ``e2 = pi(dY2)`` and
    ``Sigma = diag(dt, e2)``; the cross correlations vanish.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = expect_dms(rho, setup.phase * setup.L + np.conj(setup.phase) * adjoint(setup.L)).real
    e1 = np.sqrt(setup.eta) * x * dt
    e2 = setup.r2 * expect_dms(rho, setup._LdL).real * dt
    Sigma = np.zeros(np.shape(e1) + (2, 2))
    Sigma[..., 0, 0] = dt
    Sigma[..., 1, 1] = e2
    return e1, e2, Sigma


def filter_gains(X, rho, setup):
    """Innovation gains ``(beta1, beta2)`` for an observable ``X``.

    ``beta1 = sqrt(1-r^2) (<X e^{i theta} L + e^{-i theta} L^dag X> - <X><e^{i theta} L + h.c.>)``
    and ``beta2 = <L^dag X L> / <L^dag L> - <X>``.  Both are computed from the
    centred observable ``X - <X>``, which makes the gains of the identity
    exactly zero.  ``beta2`` is 0 when ``<L^dag L>`` is below ``EPS_RATE``
    (the counting channel carries no information there).
    """
    X = np.asarray(X, dtype=complex)
    d = setup.dim
    if X.shape != (d, d):
        raise ShapeError(f"observable must be {d}x{d}, got {X.shape}")
    Xc = X - expect_dms(rho, X) * np.eye(d)
    pL = setup.phase * setup.L
    beta1 = np.sqrt(setup.eta) * expect_dms(rho, Xc @ pL + adjoint(pL) @ Xc).real
    Ld = adjoint(setup.L)
    rate = expect_dms(rho, setup._LdL).real
    if rate < EPS_RATE:
        return float(beta1), 0.0
    beta2 = expect_dms(rho, Ld @ Xc @ setup.L).real / rate
    return float(beta1), float(beta2)


def general_gains(X, rho, slh, F, G, eps_rate=EPS_RATE):
    """Gains from the general multi-measurement formulas, via the Ito algebra.

    Computes ``zeta^T = pi(X dY^T) - pi(X) pi(dY^T) + pi([L^dag, X] S dA dY^T)``
    and ``Sigma = pi(dY dY^T)`` (per unit dt) by expanding ``dY`` symbolically
    in the vacuum, then solves ``Sigma beta = zeta`` on the channels whose
    ``Sigma_ii`` exceeds ``eps_rate``; excised channels get gain 0.
    """
    X = np.asarray(X, dtype=complex)
    dY = ito.build_dY(F, G, slh.S, slh.L)
    n = len(dY)
    mean_X = expect_dms(rho, X)
    comm = np.einsum("mba,bc->mac", slh.L.conj(), X) - np.einsum("ab,mbc->mac", X, np.conj(np.swapaxes(slh.L, 1, 2)))
    # ([L^dag, X] S)_k, one operator per input channel k
    commS = np.einsum("mab,mk->kab", comm, slh.S)
    zeta = np.zeros(n)
    for j, y in enumerate(dY):
        c = y.coefficient(0, 0)
        z = expect_dms(rho, X @ c) - mean_X * expect_dms(rho, c)
        for k in range(n):
            z += expect_dms(rho, commS[k] @ y.coefficient(k + 1, 0))
        zeta[j] = z.real
    Sigma = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            Sigma[i, j] = expect_dms(rho, ito.ito_product(dY[i], dY[j]).coefficient(0, 0)).real
    active = np.diag(Sigma) > eps_rate
    beta = np.zeros(n)
    if np.any(active):
        beta[active] = np.linalg.solve(Sigma[np.ix_(active, active)], zeta[active])
    return beta, zeta, Sigma


def innovation_operators(rho, setup):
    """Schrodinger-picture gains multiplying ``dW1`` and ``dN - e2``.

    ``K1 = c rho + rho c^dag - <c + c^dag> rho`` with ``c`` the homodyne
    operator, and ``K2 = L rho L^dag / <L^dag L> - rho`` (zero where the
    counting rate vanishes).  ``tr(X K_i) = beta_i(X)``.
    """
    rho = np.asarray(rho)
    c = setup.c_hom
    crho = c @ rho
    x = np.trace(crho, axis1=-2, axis2=-1) / np.trace(rho, axis1=-2, axis2=-1)
    K1 = crho + adjoint(crho) - 2 * x.real[..., None, None] * rho
    LrL = setup.L @ rho @ adjoint(setup.L)
    rate = np.trace(LrL, axis1=-2, axis2=-1).real
    safe = np.where(rate < EPS_RATE, 1.0, rate)
    K2 = np.where((rate < EPS_RATE)[..., None, None], 0.0, LrL / safe[..., None, None] - rho)
    return K1, K2


# ---------------------------------------------------------------------------
# increments


def _draw(shape, dt, jump_prob, rng, noise):
    if noise is not None:
        z, u = noise
    else:
        if rng is None:
            raise ValueError("either rng, noise or explicit increments are required")
        z = rng.standard_normal(shape)
        u = rng.random(shape)
    return np.sqrt(dt) * np.asarray(z, dtype=float), np.asarray(u, dtype=float) < jump_prob


def _increments(shape, dt, e1, rate, rng, noise, dY1, dW, dN):
    """Resolve (dY1, dW, dN) from explicit values or by sampling."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    p = rate * dt
    if np.any(p > JUMP_PROB_WARN):
        warnings.warn(
            f"jump probability per step {np.max(p):.3f} exceeds {JUMP_PROB_WARN}; reduce dt",
            RuntimeWarning,
            stacklevel=3,
        )
    if dN is None and dW is None and dY1 is None:
        dW, jumps = _draw(shape, dt, np.minimum(p, 1.0), rng, noise)
        return e1 + dW, dW, jumps
    if dY1 is not None:
        dW = np.asarray(dY1, dtype=float) - e1
    elif dW is None:
        dW = np.zeros(shape)
    dW = np.broadcast_to(np.asarray(dW, dtype=float), shape)
    jumps = np.broadcast_to(np.asarray(0 if dN is None else dN).astype(bool), shape)
    if np.any(jumps & (rate == 0.0)):
        raise ImpossibleJumpError("photocount recorded on a closed counting channel (r = 0 or <L^dag L> below EPS_RATE)")
    return e1 + dW, dW, jumps


# ---------------------------------------------------------------------------
# SME


def sme_step(rho, setup, dt, rng=None, *, dY1=None, dW=None, dN=None, noise=None, scheme="kraus", tol=DEFAULT_TOL):
    """One step of the conditional master equation.

    ``scheme="euler"`` is the literal Euler-Maruyama update
    ``rho + L(rho) dt + K1 dW1 + K2 (dN - e2)``.  Its positivity error is
    ``O(dt)`` per step and exceeds the hard-fail threshold at moderate
    ``dt`` for highly excited states, so the default ``"kraus"`` scheme uses
    the equivalent (to first order) completely positive update

        no count:  rho' ~ M rho M^dag,  M = 1 - (iH + L^dag L / 2) dt + c_hom dY1
        count:     rho' ~ L rho L^dag

    normalized to unit trace.  Either result goes through
    :func:`project_physical`.
    """
    rho = np.asarray(rho, dtype=complex)
    shape = rho.shape[:-2]
    e1, _, _ = measurement_expectations(rho, setup, dt)
    rate_full = expect_dms(rho, setup._LdL).real
    rate = np.where(rate_full < EPS_RATE, 0.0, setup.r2 * rate_full)
    e2 = rate * dt
    dY1, dW, jumps = _increments(shape, dt, e1, rate, rng, noise, dY1, dW, dN)
    if scheme == "euler":
        K1, K2 = innovation_operators(rho, setup)
        out = (
            rho
            + lindblad_rhs(rho, setup.H, setup.L_vec) * dt
            + K1 * np.asarray(dW)[..., None, None]
            + K2 * (jumps.astype(float) - e2)[..., None, None]
        )
    elif scheme == "kraus":
        d = setup.dim
        M = np.eye(d) - 1j * setup._Heff * dt + setup.c_hom * np.asarray(dY1)[..., None, None]
        cont = M @ rho @ adjoint(M)
        jump = setup.L @ rho @ adjoint(setup.L)
        out = np.where(jumps[..., None, None], jump, cont)
        out = out / np.trace(out, axis1=-2, axis2=-1)[..., None, None]
    else:
        raise ValueError(f"unknown SME scheme {scheme!r}")
    out = project_physical(out, tol)
    return out, StepRecord(dY1=dY1, dN=jumps.astype(int), dW=dW, jump_rate=rate)


# ---------------------------------------------------------------------------
# SSE


def _sse_core(psi, setup, dt, eta, phase, compensate, rng, noise, dY1, dW, dN):
    psi = np.asarray(psi, dtype=complex)
    if psi.shape[-1] != setup.dim:
        raise ShapeError(f"state dimension {psi.shape[-1]} does not match setup dimension {setup.dim}")
    shape = psi.shape[:-1]
    L = setup.L
    Lpsi = np.einsum("ij,...j->...i", L, psi)
    Hpsi = np.einsum("ij,...j->...i", setup._Heff, psi)
    norm2 = np.einsum("...i,...i->...", psi.conj(), psi).real
    mean_L = np.einsum("...i,...i->...", psi.conj(), Lpsi) / norm2
    rate_full = np.einsum("...i,...i->...", Lpsi.conj(), Lpsi).real / norm2
    x = 2.0 * (phase * mean_L).real
    count_rate = np.where(rate_full < EPS_RATE, 0.0, setup.r2 * rate_full)
    e1 = np.sqrt(eta) * x * dt if eta > 0 else np.zeros(shape)
    dY1, dW, jumps = _increments(shape, dt, e1, count_rate, rng, noise, dY1, dW, dN)

    comp = (setup.r2 * rate_full / 2.0) if compensate else 0.0
    drift = -1j * Hpsi + (eta / 2.0 * x * phase)[..., None] * Lpsi + (comp - eta / 8.0 * x * x)[..., None] * psi
    delta1 = np.sqrt(eta) * (phase * Lpsi - (x / 2.0)[..., None] * psi)
    cont = psi + drift * dt + delta1 * np.asarray(dW)[..., None]
    safe = np.sqrt(np.where(rate_full < EPS_RATE, 1.0, rate_full * norm2))
    jump = Lpsi / safe[..., None]
    out = np.where(jumps[..., None], jump, cont)
    norm = np.sqrt(np.einsum("...i,...i->...", out.conj(), out).real)
    out = out / norm[..., None]
    return out, StepRecord(dY1=dY1, dN=jumps.astype(int), dW=dW, jump_rate=count_rate, norm_before=norm)


def sse_step(psi, setup, dt, rng=None, *, dY1=None, dW=None, dN=None, noise=None):
    """Normalized joint homodyne/counting SSE step.

    ``d psi = [-i(H - i L^dag L / 2) + sigma] psi dt + delta1 dW + delta2 dN`` with

    * ``sigma = (1-r^2)/2 x e^{i theta} L + r^2 <L^dag L>/2 - (1-r^2)/8 x^2``
    * ``delta1 = sqrt(1-r^2) (e^{i theta} L - x/2)``
    * ``delta2 = L / sqrt(<L^dag L>) - 1``

    where ``x = <e^{i theta} L + e^{-i theta} L^dag>``.  Counts arrive at rate
    ``r^2 <L^dag L>``.  The state is renormalized after every step.
    """
    return _sse_core(psi, setup, dt, setup.eta, setup.phase, True, rng, noise, dY1, dW, dN)


def sse_step_kuramochi(psi, setup, dt, rng=None, *, dY1=None, dW=None, dN=None, noise=None):
    """SSE obtained by adding homodyne and counting updates without the beam splitter.

    ``sigma = <L + L^dag> L / 2 - <L + L^dag>^2 / 8``,
    ``delta1 = L - <L + L^dag> / 2``, ``delta2 = L / sqrt(<L^dag L>) - 1``,
    with theta = 0.  Counts are drawn at the physical rate ``r^2 <L^dag L>``
    of the beam-splitter setup, which is the only rate that makes the two
    filters comparable on shared noise.
    """
    return _sse_core(psi, setup, dt, 1.0, 1.0, False, rng, noise, dY1, dW, dN)


def unnormalized_coefficients(psi, setup):
    """``(A, B, C)`` of the linear SSE ``psi' = [1 + A dt + (B-1) dN + C dW] psi``.

    ``A = -iH - L^dag L / 2 + (1-r^2) L <L + L^dag>``, ``B = r L``,
    ``C = sqrt(1-r^2) L``.  Expectations use the normalized state.
    """
    L = setup.L
    x = np.real(np.vdot(psi, (L + adjoint(L)) @ psi) / np.vdot(psi, psi))
    A = -1j * setup.H - 0.5 * setup._LdL + setup.eta * x * L
    return A, setup.r * L, np.sqrt(setup.eta) * L


def sse_step_corrected_unnormalized(psi_tilde, setup, dt, *, dW, dN):
    """One step of the linear (unnormalized) SSE with beam-splitter gains.

    Increments must be supplied; they are shared with a paired normalized run.
    Only theta = 0 is covered by this form.
    """
    psi_tilde = np.asarray(psi_tilde, dtype=complex)
    A, B, C = unnormalized_coefficients(psi_tilde, setup)
    d = setup.dim
    M = np.eye(d) + A * dt + (B - np.eye(d)) * float(dN) + C * float(dW)
    return M @ psi_tilde


def normalized_from_unnormalized(psi, A, B, C):
    """Normalize a linear SSE ``[1 + A dt + (B-1) dN + C dW]``.

    Returns the operators ``(drift, jump, diffusion)`` of the equivalent
    normalized SSE ``d psi = [drift dt + jump dN + diffusion dW] psi``:

    * ``drift = A + A_hat + C C_hat`` with
      ``A_hat = 3/8 <C + C^dag>^2 - <A + A^dag>/2 - <C^dag C>/2``,
      ``C_hat = -<C + C^dag>/2``
    * ``jump = B / sqrt(<B^dag B>) - 1``
    * ``diffusion = C + C_hat``
    """
    psi = np.asarray(psi, dtype=complex)
    n2 = np.vdot(psi, psi).real

    def mean(op):
        return np.vdot(psi, op @ psi) / n2

    d = A.shape[0]
    I = np.eye(d)
    cc = mean(C + adjoint(C)).real
    A_hat = 3.0 / 8.0 * cc**2 - 0.5 * mean(A + adjoint(A)).real - 0.5 * mean(adjoint(C) @ C).real
    C_hat = -0.5 * cc
    bb = mean(adjoint(B) @ B).real
    jump = B / np.sqrt(bb) - I if bb >= EPS_RATE else np.zeros_like(B)
    return A + A_hat * I + C * C_hat, jump, C + C_hat * I


def paired_step_deviation(psi, setup, dt, nodes=40):
    """Expected one-step gap between the linear and the normalized SSE.

    Both steppers are driven by the same ``(dW, dN)``; the linear result is
    renormalized.  The expectation of ``|psi'><psi'|`` over the increments is
    evaluated exactly, with Gauss-Hermite quadrature in ``dW`` and the
    two-point law of ``dN``, and the max-abs entry of the difference is
    returned.  For a first-order weak pair this is ``O(dt^2)``.
    """
    z, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    rate = setup.r2 * np.real(np.vdot(psi, setup._LdL @ psi))
    p = min(rate * dt, 1.0) if rate >= EPS_RATE else 0.0
    diff = np.zeros((setup.dim, setup.dim), dtype=complex)
    for dN, pw in ((0, 1.0 - p), (1, p)):
        if pw == 0.0:
            continue
        for zk, wk in zip(z, w):
            dW = np.sqrt(dt) * zk
            a, _ = sse_step(psi, setup, dt, dW=dW, dN=dN)
            b = sse_step_corrected_unnormalized(psi, setup, dt, dW=dW, dN=dN)
            b = b / np.linalg.norm(b)
            diff += pw * wk * (np.outer(a, a.conj()) - np.outer(b, b.conj()))
    return float(np.max(np.abs(diff)))


# ---------------------------------------------------------------------------
# deterministic oracle


def integrate_lindblad(rho0, H, L_vec, t_final, dt, save_every=1):
    """Fixed-step RK4 integration of the unconditional master equation.

    Returns ``(times, states)`` sampled every ``save_every`` steps.
    """
    n_steps = int(round(t_final / dt))
    rho = np.asarray(rho0, dtype=complex)
    times = [0.0]
    states = [rho]
    for step in range(1, n_steps + 1):
        k1 = lindblad_rhs(rho, H, L_vec)
        k2 = lindblad_rhs(rho + 0.5 * dt * k1, H, L_vec)
        k3 = lindblad_rhs(rho + 0.5 * dt * k2, H, L_vec)
        k4 = lindblad_rhs(rho + dt * k3, H, L_vec)
        rho = rho + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if step % save_every == 0:
            times.append(step * dt)
            states.append(rho)
    return np.array(times), np.array(states)


def trace_distance(rho, sigma):
    """``||rho - sigma||_1 / 2`` for Hermitian arguments."""
    w = np.linalg.eigvalsh(np.asarray(rho) - np.asarray(sigma))
    return 0.5 * np.sum(np.abs(w), axis=-1)
