import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qtraj import ito, network
from qtraj.errors import ConfigurationError, ShapeError
from qtraj.network import SLHModel, beam_splitter, beam_splitter_matrix, concatenate, series, trivial


def random_slh(rng, n, dim, scatter=True):
    S = ito.random_unitary(n, rng) if scatter else np.eye(n)
    L = rng.normal(size=(n, dim, dim)) + 1j * rng.normal(size=(n, dim, dim))
    H = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return SLHModel(S, L, H + H.conj().T)


def test_beam_splitter_limits():
    assert np.array_equal(beam_splitter_matrix(0.0, 0.0), np.eye(2))
    assert np.array_equal(beam_splitter_matrix(1.0, 0.0), [[0, 1j], [1j, 0]])


def test_balanced_beam_splitter_unitary():
    S = beam_splitter_matrix(np.sqrt(0.5), 0.0)
    assert np.max(np.abs(S @ S.conj().T - np.eye(2))) < 1e-14


@pytest.mark.parametrize("r", [-0.1, 1.5])
def test_beam_splitter_range(r):
    with pytest.raises(ConfigurationError):
        beam_splitter_matrix(r, 0.0)


def test_rejects_non_unitary_and_non_hermitian():
    with pytest.raises(ConfigurationError):
        SLHModel([[2.0]], np.zeros((1, 2, 2)), np.zeros((2, 2)))
    with pytest.raises(ConfigurationError):
        SLHModel([[1.0]], np.zeros((1, 2, 2)), [[0, 1], [0, 0]])


def test_concatenate_with_vacuum():
    rng = np.random.default_rng(0)
    G1 = random_slh(rng, 1, 3, scatter=False)
    G = concatenate(G1, trivial(1, 3))
    assert np.array_equal(G.S, np.eye(2))
    assert np.array_equal(G.L[0], G1.L[0]) and not G.L[1].any()
    assert np.array_equal(G.H, G1.H)


def test_concatenate_trivial_pair():
    G = concatenate(trivial(1, 2), trivial(1, 2))
    assert G.n == 2 and np.array_equal(G.S, np.eye(2)) and not G.L.any() and not G.H.any()


def test_concatenate_dimension_mismatch():
    with pytest.raises(ShapeError):
        concatenate(trivial(1, 2), trivial(1, 3))


def test_series_channel_mismatch():
    with pytest.raises(ShapeError):
        series(trivial(1, 2), trivial(2, 2))


def test_series_identity_passthrough():
    rng = np.random.default_rng(1)
    G = random_slh(rng, 2, 3)
    assert series(G, trivial(2, 3)).allclose(G)
    assert series(trivial(2, 3), G).allclose(G)


def test_series_hamiltonian_correction_vanishes_without_coupling():
    rng = np.random.default_rng(2)
    G1 = random_slh(rng, 2, 3)
    G2 = SLHModel(ito.random_unitary(2, rng), np.zeros((2, 3, 3)), np.zeros((3, 3)))
    assert np.allclose(series(G1, G2).H, G1.H)


def test_series_hamiltonian_convention():
    # two cascaded single-channel systems pin the sign of the correction
    rng = np.random.default_rng(3)
    G1, G2 = random_slh(rng, 1, 2), random_slh(rng, 1, 2)
    L1, L2 = G1.L[0], G2.L[0]
    s = G2.S[0, 0]
    cross = L2.conj().T @ (s * L1)
    expected = G1.H + G2.H + (cross - cross.conj().T) / 2j
    out = series(G1, G2)
    assert np.allclose(out.H, expected)
    assert np.allclose(out.L[0], L2 + s * L1)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(-np.pi, np.pi))
def test_composite_network(seed, r, theta):
    rng = np.random.default_rng(seed)
    dim = 4
    L = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    H = rng.normal(size=(dim, dim))
    H = H + H.T
    G = network.beam_splitter_network(L, H, r, theta)
    Sbs = beam_splitter_matrix(r, theta)
    assert np.array_equal(G.S, Sbs)
    assert np.array_equal(G.L[0], Sbs[0, 0] * L)
    assert np.array_equal(G.L[1], Sbs[1, 0] * L)
    assert np.array_equal(G.H, H)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_composition_preserves_validity(seed, n):
    rng = np.random.default_rng(seed)
    G1, G2 = random_slh(rng, n, 2), random_slh(rng, n, 2)
    for G in (series(G1, G2), concatenate(G1, G2)):
        assert np.max(np.abs(G.S @ G.S.conj().T - np.eye(G.n))) < 1e-12
        assert np.max(np.abs(G.H - G.H.conj().T)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_series_is_associative(seed):
    rng = np.random.default_rng(seed)
    G1, G2, G3 = (random_slh(rng, 2, 2) for _ in range(3))
    assert series(series(G1, G2), G3).allclose(series(G1, series(G2, G3)), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_concatenate_is_associative(seed):
    rng = np.random.default_rng(seed)
    G1, G2, G3 = random_slh(rng, 1, 2), random_slh(rng, 2, 2), random_slh(rng, 1, 2)
    assert concatenate(concatenate(G1, G2), G3).allclose(concatenate(G1, concatenate(G2, G3)))


def test_json_roundtrip():
    rng = np.random.default_rng(4)
    G = random_slh(rng, 2, 3)
    back = SLHModel.from_dict(json.loads(json.dumps(G.to_dict())))
    assert back.allclose(G, atol=0)


def test_caller_arrays_stay_writable():
    H = np.zeros((2, 2), dtype=complex)
    SLHModel([[1.0]], np.zeros((1, 2, 2), dtype=complex), H)
    H[0, 0] = 1.0


def test_compose_expression():
    rng = np.random.default_rng(5)
    G1 = random_slh(rng, 1, 2, scatter=False)
    comps = {"G1": G1, "G2": trivial(1, 2), "G3": beam_splitter(0.3, 0.2, 2)}
    out = network.compose(["series", ["concat", "G1", "G2"], "G3"], comps)
    direct = network.beam_splitter_network(G1.L[0], G1.H, 0.3, 0.2)
    assert out.allclose(direct)
    with pytest.raises(ConfigurationError):
        network.compose(["cascade", "G1", "G2"], comps)
    with pytest.raises(ConfigurationError):
        network.compose("G9", comps)
