"""Acceptance criteria, each at its stated tolerance.

Run standalone with ``python3 tests/test_acceptance.py`` or as part of the
suite; one PASS/FAIL line per criterion is printed in the terminal summary.
"""

import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from qtraj import filters, ito
from qtraj import hilbert as h
from qtraj.commute import MeasurementSpec, check_self_commutative
from qtraj.ensemble import (
    SimulationConfig,
    analytic_distribution_vector,
    compare_filters,
    lindblad_reference,
    run_ensemble,
    total_variation,
)
from qtraj.network import beam_splitter_matrix, beam_splitter_network

GRID = (0.5, 1.0, 2.0, 4.0)
# scaled-down decay experiment shared by criteria 4-6
DECAY = SimulationConfig(n0=5, gamma=1.0, r2=0.5, dt=1e-3, t_final=5.0, n_traj=100, seed=20240917)


def decay_bounds(summary):
    """Worst |z| over GRID and the total-variation distance at t = 1."""
    z = []
    for t in GRID:
        i = summary.index_of(t)
        z.append(abs(summary.mean_N[i] - summary.analytic_N[i]) / summary.stderr_N[i])
    i = summary.index_of(1.0)
    tv = total_variation(summary.populations[i], analytic_distribution_vector(5, 1.0, 1.0, summary.config.dim))
    return max(z), tv


def test_criterion_1_commutativity_oracle(acceptance):
    rng = np.random.default_rng(1)
    entries = np.array([0, 1, -1, 1j, -1j])
    start = time.perf_counter()
    agree = 0
    n_noncomm = 0
    for k in range(200):
        n = 2 + k % 2
        F = rng.choice(entries, size=(n, n))
        G = rng.choice(entries, size=(n, n))
        verdict = check_self_commutative(MeasurementSpec(F, G)).commutative
        oracle = ito.is_symmetric(ito.table_builder(F, G), probe_count=8, rng=rng)
        agree += verdict == oracle
        n_noncomm += not oracle
    elapsed = time.perf_counter() - start
    ok = agree == 200 and elapsed < 30
    detail = f"{agree}/200 agree, {n_noncomm} non-commutative, {elapsed:.1f} s"
    assert acceptance(1, "closed form equals Ito-table symmetry on 200 random specs", ok, detail)


def test_criterion_2_worked_examples(acceptance):
    examples = [
        (np.eye(2), np.zeros((2, 2)), True),
        (np.diag([1, 0]), np.diag([0, 1]), True),
        (np.array([[0, 0], [1, 0]]), np.array([[1, 0], [0, 0]]), False),
    ]
    verdicts = [check_self_commutative(MeasurementSpec(F, G)).commutative for F, G, _ in examples]
    E = ito.ItoExpression
    table = ito.self_commutator([E.dA(1, 1, 1), E.dA_dag(1, 1, 1)])
    C = np.array([[table[i][j].coefficient(0, 0)[0, 0] for j in range(2)] for i in range(2)])
    only_dt = all(set(table[i][j].terms) <= {(0, 0)} for i in range(2) for j in range(2))
    ok = verdicts == [e[2] for e in examples] and np.array_equal(C, [[0, 1], [-1, 0]]) and only_dt
    detail = f"verdicts {verdicts}, self-commutator {C.real.astype(int).tolist()} dt"
    assert acceptance(2, "worked examples and ladder self-commutator", ok, detail)


def test_criterion_3_composite_network(acceptance):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(20):
        d = int(rng.integers(2, 7))
        L = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        H = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        H = H + H.conj().T
        r, theta = rng.uniform(0, 1), rng.uniform(-np.pi, np.pi)
        G = beam_splitter_network(L, H, r, theta)
        Sbs = beam_splitter_matrix(r, theta)
        target_L = np.stack([Sbs[0, 0] * L, Sbs[1, 0] * L])
        worst = max(worst, np.abs(G.S - Sbs).max(), np.abs(G.L - target_L).max(), np.abs(G.H - H).max())
    ok = worst <= 1e-15
    assert acceptance(3, "(G1 [+] G2) |> G3 = (S_bs, S_bs[L;0], H)", ok, f"max deviation {worst:.1e}")


def test_criterion_4_decay_law(acceptance):
    start = time.perf_counter()
    summary = run_ensemble(DECAY)
    elapsed = time.perf_counter() - start
    zmax, tv = decay_bounds(summary)
    ok = zmax < 3 and tv < 0.07 and elapsed < 120
    detail = f"max |z| {zmax:.2f} over t in {GRID}, TV(t=1) {tv:.4f} < 0.07, {elapsed:.1f} s"
    assert acceptance(4, "ensemble mean follows n0 exp(-gamma t)", ok, detail)


def test_criterion_5_limits(acceptance):
    # per-step staircase: the output grid can merge two jumps into one interval
    s = filters.cavity_setup(DECAY.dim, 1.0, 1.0)
    rng = np.random.default_rng(5)
    psi = np.tile(h.fock_state(DECAY.dim, 5), (100, 1))
    Nop = h.number_operator(DECAY.dim)
    prev = h.expect_kets(psi, Nop).real
    staircase = True
    for _ in range(DECAY.n_steps):
        psi, rec = filters.sse_step(psi, s, DECAY.dt, rng)
        cur = h.expect_kets(psi, Nop).real
        staircase &= bool(np.all(np.abs(cur - np.round(cur)) < 1e-12))
        staircase &= bool(np.all(np.abs((prev - cur) - rec.dN) < 1e-12))
        prev = cur
    counting = run_ensemble(replace(DECAY, r2=1.0))
    homodyne = run_ensemble(replace(DECAY, r2=0.0))
    no_jumps = int(homodyne.jump_counts.sum()) == 0
    z1, tv1 = decay_bounds(counting)
    z0, tv0 = decay_bounds(homodyne)
    bounds = max(z0, z1) < 3 and max(tv0, tv1) < 0.07
    ok = staircase and no_jumps and bounds
    detail = (
        f"r2=1 unit-step integer staircase {staircase}, r2=0 jumps {int(homodyne.jump_counts.sum())}, "
        f"|z| {z1:.2f}/{z0:.2f}, TV {tv1:.3f}/{tv0:.3f}"
    )
    assert acceptance(5, "r2 = 1 and r2 = 0 limits", ok, detail)


def test_criterion_6_kuramochi_bias(acceptance):
    rep = compare_filters(DECAY)
    idx = [rep.corrected.index_of(t) for t in GRID]
    zc = np.abs(rep.z_corrected[idx])
    zk = np.abs(rep.z_kuramochi[idx])
    ok = zk.max() > 3 and zc.max() < 3
    detail = f"|z| corrected {np.round(zc, 2).tolist()}, kuramochi {np.round(zk, 2).tolist()}"
    assert acceptance(6, "Kuramochi filter biased, corrected filter not", ok, detail)


def test_criterion_7_unconditional_consistency(acceptance):
    start = time.perf_counter()
    M = 2000
    base = replace(DECAY, n_traj=M, t_final=2.0, seed=7)
    times = (0.5, 1.0, 2.0)
    ref = lindblad_reference(base, times)
    bound = 5 / np.sqrt(M)
    dists = {}
    for kind in ("corrected", "sme"):
        s = run_ensemble(replace(base, filter_kind=kind))
        dists[kind] = [filters.trace_distance(s.mean_state[s.index_of(t)], r) for t, r in zip(times, ref)]
    elapsed = time.perf_counter() - start
    worst = max(max(v) for v in dists.values())
    ok = worst < bound and elapsed < 600
    detail = (
        f"SSE {np.round(dists['corrected'], 4).tolist()}, SME {np.round(dists['sme'], 4).tolist()} "
        f"< {bound:.3f}, {elapsed:.0f} s"
    )
    assert acceptance(7, "ensemble average equals the Lindblad solution", ok, detail)


def test_criterion_8_structural_invariants(acceptance):
    d, dt = 8, 1e-3
    rng = np.random.default_rng(8)
    worst_norm = worst_trace = 0.0
    worst_pos = 0.0
    identity_exact = True
    for r2 in (0.0, 0.5, 1.0):
        s = filters.cavity_setup(d, 1.0, r2)
        psi = np.tile(h.fock_state(d, 5), (32, 1))
        psi_k = psi.copy()
        rho = np.tile(h.ket_to_dm(h.fock_state(d, 5)), (32, 1, 1))
        for step in range(2000):
            psi, _ = filters.sse_step(psi, s, dt, rng)
            psi_k, _ = filters.sse_step_kuramochi(psi_k, s, dt, rng)
            rho, _ = filters.sme_step(rho, s, dt, rng)
            norms = np.concatenate([np.linalg.norm(psi, axis=1), np.linalg.norm(psi_k, axis=1)])
            worst_norm = max(worst_norm, float(np.abs(norms - 1).max()))
            herm, tr, wmin = h.physicality_violations(rho)
            worst_trace = max(worst_trace, float(tr.max()), float(herm.max()))
            worst_pos = min(worst_pos, float(wmin.min()))
            if step % 100 == 0:
                for state in (rho[0], h.ket_to_dm(psi[0])):
                    identity_exact &= filters.filter_gains(np.eye(d), state, s) == (0.0, 0.0)
    s = filters.cavity_setup(d, 1.0, 0.5)
    fidelity = 1.0
    for n in range(1, d):
        for stepper in (filters.sse_step, filters.sse_step_kuramochi):
            out, _ = stepper(h.fock_state(d, n), s, dt, dW=0.02, dN=1)
            fidelity = min(fidelity, abs(np.vdot(h.fock_state(d, n - 1), out)) ** 2)
        rho_out, _ = filters.sme_step(h.ket_to_dm(h.fock_state(d, n)), s, dt, dY1=0.02, dN=1)
        fidelity = min(fidelity, np.real(rho_out[n - 1, n - 1]))
    ok = worst_norm <= 1e-8 and worst_trace <= 1e-8 and worst_pos >= -1e-8 and identity_exact and fidelity >= 1 - 1e-12
    detail = (
        f"norm err {worst_norm:.1e}, trace/herm err {worst_trace:.1e}, min eig {worst_pos:.1e}, "
        f"identity gains exact {identity_exact}, jump fidelity 1-{1 - fidelity:.1e}"
    )
    assert acceptance(8, "structural invariants along trajectories", ok, detail)


def test_criterion_9_unnormalized_equivalence(acceptance):
    rng = np.random.default_rng(9)
    s = filters.cavity_setup(8, 1.0, 0.5)
    states = [h.fock_state(8, 5), (h.fock_state(8, 2) + h.fock_state(8, 3)) / np.sqrt(2)]
    for _ in range(4):
        psi = np.zeros(8, dtype=complex)
        psi[:6] = rng.normal(size=6) + 1j * rng.normal(size=6)
        states.append(psi / np.linalg.norm(psi))
    dts = np.array([1e-2, 1e-3, 1e-4])
    devs = np.array([max(filters.paired_step_deviation(p, s, dt) for p in states) for dt in dts])
    slope = np.polyfit(np.log(dts), np.log(devs), 1)[0]
    ok = slope >= 1.9
    detail = f"weak one-step gap {np.array2string(devs, precision=2)}, slope {slope:.3f}"
    assert acceptance(9, "linear SSE + normalization matches the normalized SSE to O(dt^2)", ok, detail)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
