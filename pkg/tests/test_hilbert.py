import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qtraj import hilbert as h
from qtraj.errors import IntegrationDivergedError, InvalidDimensionError, ShapeError


def random_ket(rng, d):
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    return psi / np.linalg.norm(psi)


def random_dm(rng, d, rank=None):
    rank = rank or d
    A = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = A @ A.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


seeds = st.integers(0, 2**32 - 1)
dims = st.integers(2, 9)


def test_annihilation_entries():
    a = h.annihilation(4)
    assert a[0, 1] == 1.0
    assert np.isclose(a[2, 3], np.sqrt(3))
    assert np.count_nonzero(a) == 3


def test_number_operator_matches_ladder_product():
    a = h.annihilation(6)
    assert np.allclose(h.number_operator(6), h.adjoint(a) @ a, atol=1e-14)


@pytest.mark.parametrize("bad", [1, 0, -3, 2.5])
def test_invalid_dimension(bad):
    with pytest.raises(InvalidDimensionError):
        h.annihilation(bad)


def test_fock_out_of_range():
    with pytest.raises(InvalidDimensionError):
        h.fock_state(4, 4)


def test_ladder_on_fock():
    a = h.annihilation(6)
    out = a @ h.fock_state(6, 3)
    assert np.allclose(out, np.sqrt(3) * h.fock_state(6, 2))


def test_commutator_truncation_artifact():
    d = 5
    a = h.annihilation(d)
    c = h.commutator(a, h.creation(d))
    expected = np.eye(d)
    expected[-1, -1] = -(d - 1)
    assert np.allclose(c, expected)


def test_commutator_shape_error():
    with pytest.raises(ShapeError):
        h.commutator(np.eye(2), np.eye(3))


def test_vector_commutator_entries():
    d = 4
    a = h.annihilation(d)
    vec = np.stack([a, h.creation(d)])
    C = h.vector_commutator(vec, vec)
    assert C.shape == (2, 2, d, d)
    assert np.allclose(C[0, 1], h.commutator(a, h.creation(d)))
    assert np.allclose(C[0, 0], 0)


def test_expectation_number_on_fock():
    d = 6
    for n in range(d):
        assert h.expectation(h.fock_state(d, n), h.number_operator(d)) == n
        assert h.expectation(h.ket_to_dm(h.fock_state(d, n)), h.number_operator(d)) == n


def test_expectation_shape_mismatch():
    with pytest.raises(ShapeError):
        h.expectation(h.fock_state(4, 0), np.eye(5))


@settings(max_examples=50, deadline=None)
@given(seeds, dims)
def test_identity_expectation_is_exactly_one(seed, d):
    rng = np.random.default_rng(seed)
    psi = random_ket(rng, d) * rng.uniform(0.5, 2.0)
    assert h.expect_kets(psi, np.eye(d)) == 1.0
    assert h.expect_dms(random_dm(rng, d), np.eye(d)) == 1.0


@settings(max_examples=50, deadline=None)
@given(seeds, dims)
def test_hermitian_expectation_is_real(seed, d):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    X = X + X.conj().T
    assert abs(h.expectation(random_ket(rng, d), X).imag) < 1e-9 * np.abs(X).max()
    assert abs(h.expectation(random_dm(rng, d), X).imag) < 1e-9 * np.abs(X).max()


def test_batched_expectations_match_single():
    rng = np.random.default_rng(1)
    psis = np.stack([random_ket(rng, 5) for _ in range(7)])
    N = h.number_operator(5)
    batch = h.expect_kets(psis, N)
    assert np.allclose(batch, [h.expectation(p, N) for p in psis])
    rhos = h.ket_to_dm(psis)
    assert np.allclose(h.expect_dms(rhos, N), batch)


def test_leakage():
    d = 5
    assert h.leakage(h.fock_state(d, d - 1)) == 1.0
    assert h.leakage(h.ket_to_dm(h.fock_state(d, 0))) == 0.0
    with pytest.warns(RuntimeWarning):
        h.warn_leakage(1e-3)


@settings(max_examples=50, deadline=None)
@given(seeds, dims)
def test_project_physical_is_identity_on_physical_states(seed, d):
    rng = np.random.default_rng(seed)
    rho = h.ket_to_dm(random_ket(rng, d))
    rho = rho / np.trace(rho).real
    out = h.project_physical(rho)
    assert np.allclose(out, rho, atol=1e-14)
    assert h.is_physical(out)


@settings(max_examples=50, deadline=None)
@given(seeds, dims, st.floats(1e-9, 5e-4))
def test_project_physical_repairs_small_violations(seed, d, eps):
    rng = np.random.default_rng(seed)
    rho = random_dm(rng, d, rank=1)
    E = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    bad = rho + eps * E / np.abs(E).max()
    out = h.project_physical(bad)
    herm, tr, wmin = h.physicality_violations(out)
    assert herm < 1e-12 and tr < 1e-12 and wmin >= -1e-12


def test_project_physical_hard_fail():
    rho = np.diag([1.1, -0.1]).astype(complex)
    with pytest.raises(IntegrationDivergedError):
        h.project_physical(rho)


def test_project_physical_batch():
    rng = np.random.default_rng(5)
    rhos = np.stack([random_dm(rng, 4) for _ in range(3)])
    rhos[1] += 1e-6 * np.diag([1, -1, 1, -1])
    out = h.project_physical(rhos)
    assert np.allclose(out[0], rhos[0]) and np.allclose(out[2], rhos[2])
    assert h.is_physical(out)
