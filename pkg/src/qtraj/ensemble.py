"""Monte-Carlo ensembles of conditional trajectories for a decaying cavity.

Trajectory ``i`` of a run with seed ``s`` draws its noise from a Philox
stream keyed by ``(s, i)``: first ``n_steps`` standard normals, then
``n_steps`` uniforms.  Every filter kind consumes the same stream, so two
filters run on the same config see identical increments.  Trajectories are
processed in fixed blocks of ``BLOCK`` and reduced in index order, which
makes a summary bit-identical whatever the number of worker threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
import math
import os

import numpy as np

from . import filters
from .errors import ConfigurationError
from .hilbert import (
    DEFAULT_TOL,
    LEAKAGE_WARN,
    expect_dms,
    expect_kets,
    fock_state,
    ket_to_dm,
    number_operator,
    warn_leakage,
)

BLOCK = 64
#: number of output intervals; the grid has OUTPUT_POINTS + 1 times when dt divides evenly
OUTPUT_POINTS = 500
TRUNCATION_MARGIN = 2
FILTER_KINDS = ("corrected", "kuramochi", "sme")
MODES = ("simulate", "filter-from-records")
KURAMOCHI_RATE_NOTE = "kuramochi jumps drawn at the physical rate r2*<L^dag L> of the beam-splitter setup"


@dataclass(frozen=True)
class SimulationConfig:
    """Cavity-decay experiment; ``dim`` defaults to ``n0 + 3``."""

    n0: int = 5
    dim: int = None
    gamma: float = 1.0
    r2: float = 0.5
    theta: float = 0.0
    dt: float = 1e-3
    t_final: float = 5.0
    n_traj: int = 100
    seed: int = 20240917
    filter_kind: str = "corrected"
    mode: str = "simulate"
    records_path: str = None
    sme_scheme: str = "kraus"

    def __post_init__(self):
        if self.dim is None:
            object.__setattr__(self, "dim", int(self.n0) + 3)
        if int(self.n0) != self.n0 or self.n0 < 0:
            raise ConfigurationError(f"n0 must be a non-negative integer, got {self.n0!r}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise ConfigurationError(f"dim must be an integer >= 2, got {self.dim!r}")
        if self.n0 >= self.dim - TRUNCATION_MARGIN:
            raise ConfigurationError(
                f"truncation margin violated: n0={self.n0} must be below dim-{TRUNCATION_MARGIN}={self.dim - TRUNCATION_MARGIN}"
            )
        if not 0.0 <= self.r2 <= 1.0:
            raise ConfigurationError(f"r2 must lie in [0, 1], got {self.r2}")
        if self.gamma < 0:
            raise ConfigurationError(f"gamma must be non-negative, got {self.gamma}")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.t_final > 0:
            raise ConfigurationError(f"t_final must be positive, got {self.t_final}")
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise ConfigurationError(f"n_traj must be an integer >= 1, got {self.n_traj!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.filter_kind not in FILTER_KINDS:
            raise ConfigurationError(f"filter_kind must be one of {FILTER_KINDS}, got {self.filter_kind!r}")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "filter-from-records" and not self.records_path:
            raise ConfigurationError("filter-from-records mode needs records_path")
        if self.sme_scheme not in ("kraus", "euler"):
            raise ConfigurationError(f"sme_scheme must be 'kraus' or 'euler', got {self.sme_scheme!r}")
        for name in ("n0", "dim", "n_traj", "seed"):
            object.__setattr__(self, name, int(getattr(self, name)))

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    def to_dict(self):
        return asdict(self)

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))

    @property
    def stride(self):
        return max(1, self.n_steps // OUTPUT_POINTS)

    def setup(self):
        return filters.cavity_setup(self.dim, self.gamma, self.r2, self.theta)


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    expectations: dict
    records: list
    seed_used: tuple

    @property
    def n_jumps(self):
        return int(sum(rec.dN for rec in self.records))


@dataclass
class EnsembleSummary:
    """Reduced ensemble statistics on the output grid.

    ``populations[t, k]`` is the ensemble-mean population of Fock level k and
    ``mean_state`` the ensemble-mean density operator; ``trajectory_N`` keeps
    each trajectory's ``<N>`` curve (shape ``(n_traj, n_times)``).
    """

    config: SimulationConfig
    times: np.ndarray
    mean_N: np.ndarray
    stderr_N: np.ndarray
    analytic_N: np.ndarray
    populations: np.ndarray
    mean_state: np.ndarray
    trajectory_N: np.ndarray
    jump_counts: np.ndarray
    leakage_max: float
    metadata: dict = field(default_factory=dict)

    @property
    def jump_histogram(self):
        return np.bincount(self.jump_counts) if self.jump_counts.size else np.zeros(0, dtype=int)

    def jump_statistics(self):
        jc = self.jump_counts
        return {
            "total": int(jc.sum()),
            "mean_per_trajectory": float(jc.mean()),
            "max_per_trajectory": int(jc.max()),
            "histogram": self.jump_histogram.tolist(),
        }

    def index_of(self, t):
        """Index of grid time ``t``; raises if ``t`` is not on the grid."""
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"t={t} is not on the output grid")
        return idx


@dataclass
class ComparisonReport:
    times: np.ndarray
    mean_corrected: np.ndarray
    mean_kuramochi: np.ndarray
    analytic: np.ndarray
    se_corrected: np.ndarray
    se_kuramochi: np.ndarray
    z_corrected: np.ndarray
    z_kuramochi: np.ndarray
    #: z-score of the paired per-trajectory difference kuramochi - corrected
    z_paired: np.ndarray
    corrected: EnsembleSummary
    kuramochi: EnsembleSummary
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# oracles


def analytic_number_distribution(n0, gamma, t, N):
    """Photon-number law of a decaying Fock state, binomial with survival ``exp(-gamma t)``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if int(N) != N or not 0 <= N <= n0:
        raise ValueError(f"N must be an integer in [0, {n0}], got {N!r}")
    s = math.exp(-gamma * t)
    N = int(N)
    return math.comb(n0, N) * s**N * (1.0 - s) ** (n0 - N)


def analytic_mean_number(n0, gamma, t):
    return n0 * math.exp(-gamma * t)


def analytic_distribution_vector(n0, gamma, t, dim):
    out = np.zeros(dim)
    for N in range(n0 + 1):
        out[N] = analytic_number_distribution(n0, gamma, t, N)
    return out


def lindblad_reference(config, times):
    """Unconditional density operators at ``times`` from fixed-step RK4."""
    setup = config.setup()
    rho0 = ket_to_dm(fock_state(config.dim, config.n0))
    t_end = max(times)
    n_steps = int(round(t_end / config.dt))
    grid, states = filters.integrate_lindblad(rho0, setup.H, setup.L_vec, n_steps * config.dt, config.dt)
    idx = [int(round(t / config.dt)) for t in times]
    return states[idx]


def total_variation(p, q):
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


# ---------------------------------------------------------------------------
# noise


def trajectory_noise(seed, index, n_steps):
    """``(z, u)`` for one trajectory from its counter-based stream."""
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))
    z = gen.standard_normal(n_steps)
    u = gen.random(n_steps)
    return z, u


def read_records(path):
    """Load a measurement record CSV with columns ``t, dY1, dN``."""
    try:
        data = np.genfromtxt(path, delimiter=",", names=True, comments="#")
    except OSError as exc:
        raise ConfigurationError(f"cannot read records file {path}: {exc}") from None
    if data.dtype.names is None or not {"t", "dY1", "dN"} <= set(data.dtype.names):
        raise ConfigurationError(f"records file {path} must have columns t, dY1, dN")
    data = np.atleast_1d(data)
    if not all(np.all(np.isfinite(data[k])) for k in ("t", "dY1", "dN")):
        raise ConfigurationError(f"records file {path} contains missing or non-numeric entries")
    dN = data["dN"]
    if not np.all(np.isin(dN, (0, 1))):
        raise ConfigurationError("dN entries must be 0 or 1")
    return data["t"].astype(float), data["dY1"].astype(float), dN.astype(int)


# ---------------------------------------------------------------------------
# stepping


def _stepper(kind):
    return {"corrected": filters.sse_step, "kuramochi": filters.sse_step_kuramochi}[kind]


def _output_steps(n_steps):
    stride = max(1, n_steps // OUTPUT_POINTS)
    return set(range(0, n_steps + 1, stride)) | {n_steps}


def _run_block(config, setup, indices, keep_records=False, increments=None):
    """Run a block of trajectories; returns per-trajectory and summed outputs."""
    B = len(indices)
    n_steps = config.n_steps if increments is None else len(increments[0])
    d = config.dim
    N_op = number_operator(d)
    if increments is None:
        noise = [trajectory_noise(config.seed, i, n_steps) for i in indices]
        Z = np.stack([z for z, _ in noise])
        U = np.stack([u for _, u in noise])
    out_steps = _output_steps(n_steps)
    n_out = len(out_steps)

    is_sme = config.filter_kind == "sme"
    psi0 = fock_state(d, config.n0)
    state = np.tile(ket_to_dm(psi0), (B, 1, 1)) if is_sme else np.tile(psi0, (B, 1))

    traj_N = np.empty((B, n_out))
    pops = np.empty((B, n_out, d))
    state_sum = np.empty((n_out, d, d), dtype=complex)
    jumps = np.zeros(B, dtype=np.int64)
    leak = 0.0
    records = []
    j = 0

    def observe(j):
        if is_sme:
            traj_N[:, j] = expect_dms(state, N_op).real
            pops[:, j] = np.diagonal(state, axis1=1, axis2=2).real
            state_sum[j] = state.sum(axis=0)
        else:
            traj_N[:, j] = expect_kets(state, N_op).real
            p = np.abs(state) ** 2
            pops[:, j] = p
            state_sum[j] = ket_to_dm(state).sum(axis=0)

    observe(0)
    j = 1
    for k in range(n_steps):
        if increments is None:
            kw = {"noise": (Z[:, k], U[:, k])}
        else:
            kw = {"dY1": np.full(B, increments[0][k]), "dN": np.full(B, increments[1][k])}
        if is_sme:
            state, rec = filters.sme_step(state, setup, config.dt, scheme=config.sme_scheme, tol=DEFAULT_TOL, **kw)
            top = state[:, -1, -1].real
        else:
            state, rec = _stepper(config.filter_kind)(state, setup, config.dt, **kw)
            top = np.abs(state[:, -1]) ** 2
        leak = max(leak, float(np.max(top)))
        jumps += rec.dN
        if keep_records:
            records.append(
                filters.StepRecord(
                    dY1=float(rec.dY1[0]),
                    dN=int(rec.dN[0]),
                    dW=float(rec.dW[0]),
                    jump_rate=float(rec.jump_rate[0]),
                    norm_before=None if rec.norm_before is None else float(rec.norm_before[0]),
                )
            )
        if (k + 1) in out_steps:
            observe(j)
            j += 1
    times = np.array(sorted(out_steps)) * config.dt
    return times, traj_N, pops, state_sum, jumps, leak, records


def run_trajectory(config, trajectory_index=0):
    """Single trajectory ``trajectory_index`` of ``config``, with its step records."""
    if config.mode == "filter-from-records":
        return filter_records(config)
    setup = config.setup()
    times, traj_N, _, _, _, leak, records = _run_block(config, setup, [trajectory_index], keep_records=True)
    warn_leakage(leak)
    return TrajectoryRecord(times, {"N": traj_N[0]}, records, (config.seed, trajectory_index))


def filter_records(config, t=None, dY1=None, dN=None):
    """Filter a measured record ``(t, dY1, dN)`` with the configured filter.

    The record is taken from ``config.records_path`` unless arrays are given.
    """
    if dY1 is None:
        t, dY1, dN = read_records(config.records_path)
    dY1 = np.asarray(dY1, dtype=float)
    dN = np.asarray(dN, dtype=int)
    if t is not None and len(t) > 1 and not np.allclose(np.diff(t), config.dt, rtol=1e-6, atol=1e-12):
        raise ConfigurationError("record time stamps are not spaced by the configured dt")
    setup = config.setup()
    times, traj_N, _, _, _, leak, records = _run_block(config, setup, [0], keep_records=True, increments=(dY1, dN))
    warn_leakage(leak)
    return TrajectoryRecord(times, {"N": traj_N[0]}, records, None)


def _resolve_threads(threads):
    if threads is None:
        env = os.environ.get("QTRAJ_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigurationError(f"QTRAJ_THREADS must be an integer, got {env!r}") from None
        else:
            threads = 1
    if threads < 1:
        raise ConfigurationError(f"thread count must be >= 1, got {threads}")
    return threads


def run_ensemble(config, threads=None):
    """Run ``config.n_traj`` trajectories and reduce them in index order."""
    if config.mode == "filter-from-records":
        raise ConfigurationError("run_ensemble needs mode 'simulate'; use filter_records for measured data")
    threads = _resolve_threads(threads)
    setup = config.setup()
    blocks = [list(range(s, min(s + BLOCK, config.n_traj))) for s in range(0, config.n_traj, BLOCK)]

    def work(idx):
        return _run_block(config, setup, idx)

    if threads == 1 or len(blocks) == 1:
        results = [work(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, blocks))

    times = results[0][0]
    traj_N = np.concatenate([r[1] for r in results], axis=0)
    pops = np.concatenate([r[2] for r in results], axis=0)
    state_sum = results[0][3].copy()
    for r in results[1:]:
        state_sum += r[3]
    jumps = np.concatenate([r[4] for r in results])
    leak = max(r[5] for r in results)
    warn_leakage(leak)

    M = config.n_traj
    mean_N = traj_N.mean(axis=0)
    if M > 1:
        stderr = traj_N.std(axis=0, ddof=1) / np.sqrt(M)
    else:
        stderr = np.full_like(mean_N, np.nan)
    analytic = np.array([analytic_mean_number(config.n0, config.gamma, t) for t in times])
    meta = {
        "config": config.to_dict(),
        "n_steps": config.n_steps,
        "output_stride": config.stride,
        "leakage_max": leak,
        "leakage_warn_threshold": LEAKAGE_WARN,
        "rng": "Philox(SeedSequence(seed, spawn_key=(trajectory_index,))): n_steps normals then n_steps uniforms",
    }
    if config.filter_kind == "kuramochi":
        meta["kuramochi_jump_rate"] = KURAMOCHI_RATE_NOTE
    summary = EnsembleSummary(
        config=config,
        times=times,
        mean_N=mean_N,
        stderr_N=stderr,
        analytic_N=analytic,
        populations=pops.mean(axis=0),
        mean_state=state_sum / M,
        trajectory_N=traj_N,
        jump_counts=jumps,
        leakage_max=leak,
        metadata=meta,
    )
    summary.metadata["jump_statistics"] = summary.jump_statistics()
    return summary


def _zscore(diff, se):
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(np.abs(diff) > 1e-12, np.inf, 0.0))
    return z


def compare_filters(config, threads=None):
    """Corrected vs Kuramochi filter on shared noise, against the analytic decay law."""
    if config.n_traj < 2:
        raise ConfigurationError("compare_filters needs n_traj >= 2 for a standard error")
    if config.filter_kind == "sme":
        raise ConfigurationError("compare_filters compares the SSE filters; filter_kind 'sme' is not applicable")
    from dataclasses import replace

    corr = run_ensemble(replace(config, filter_kind="corrected"), threads)
    kura = run_ensemble(replace(config, filter_kind="kuramochi"), threads)
    analytic = corr.analytic_N
    diff = kura.trajectory_N - corr.trajectory_N
    se_diff = diff.std(axis=0, ddof=1) / np.sqrt(config.n_traj)
    meta = {
        "config": config.to_dict(),
        "kuramochi_jump_rate": KURAMOCHI_RATE_NOTE,
        "shared_increments": True,
        "leakage_max": max(corr.leakage_max, kura.leakage_max),
        "jump_statistics": {"corrected": corr.jump_statistics(), "kuramochi": kura.jump_statistics()},
    }
    return ComparisonReport(
        times=corr.times,
        mean_corrected=corr.mean_N,
        mean_kuramochi=kura.mean_N,
        analytic=analytic,
        se_corrected=corr.stderr_N,
        se_kuramochi=kura.stderr_N,
        z_corrected=_zscore(corr.mean_N - analytic, corr.stderr_N),
        z_kuramochi=_zscore(kura.mean_N - analytic, kura.stderr_N),
        z_paired=_zscore(diff.mean(axis=0), se_diff),
        corrected=corr,
        kuramochi=kura,
        metadata=meta,
    )
