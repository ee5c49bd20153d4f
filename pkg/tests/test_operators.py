import numpy as np
import oracles
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from opwork.errors import DomainError, ValidationError
from opwork.operators import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    commutator,
    eig_hermitian,
    expm_h,
    hermitian,
    kron,
    logm_h,
    matrix_function,
    max_norm,
    partial_trace,
    random_hermitian,
    unitary_exp,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 5)


def test_pauli_algebra():
    assert max_norm(SIGMA_X @ SIGMA_Y - 1j * SIGMA_Z) == 0
    assert max_norm(commutator(SIGMA_X, SIGMA_Y) - 2j * SIGMA_Z) == 0


def test_hermitian_rejects_asymmetric():
    with pytest.raises(ValidationError, match="H0"):
        hermitian([[0, 1], [0, 0]], "H0")
    with pytest.raises(ValidationError):
        hermitian(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        hermitian([[np.nan, 0], [0, 1]])


def test_eig_degenerate_block_is_canonical():
    h = np.diag([1.0, 1.0, -2.0])
    u = scipy.linalg.expm(-1j * random_hermitian(3, np.random.default_rng(0)))
    a = eig_hermitian(u @ h @ u.conj().T)
    b = eig_hermitian(u @ h @ u.conj().T + 1e-15 * np.eye(3))
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, atol=1e-12)
    # projector onto the degenerate block is basis independent; canonical vectors coincide
    np.testing.assert_allclose(a.eigenvectors, b.eigenvectors, atol=1e-10)


@given(seeds, dims)
def test_eig_reconstructs(seed, d):
    h = random_hermitian(d, np.random.default_rng(seed))
    es = eig_hermitian(h)
    assert np.all(np.diff(es.eigenvalues) >= 0)
    np.testing.assert_allclose(es.reconstruct(), h, atol=1e-12)
    np.testing.assert_allclose(es.eigenvectors.conj().T @ es.eigenvectors, np.eye(d), atol=1e-12)


@given(seeds, dims)
def test_expm_matches_scipy(seed, d):
    h = random_hermitian(d, np.random.default_rng(seed))
    np.testing.assert_allclose(expm_h(h), scipy.linalg.expm(h), rtol=1e-10, atol=1e-12)


@given(seeds, dims)
def test_log_inverts_exp(seed, d):
    h = random_hermitian(d, np.random.default_rng(seed))
    np.testing.assert_allclose(logm_h(expm_h(h)), h, atol=1e-10)


def test_log_matches_scipy_on_positive(rng):
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    a = g @ g.conj().T + 0.1 * np.eye(3)
    np.testing.assert_allclose(logm_h(a), oracles.logm(a), atol=1e-10)


def test_log_domain_error():
    with pytest.raises(DomainError) as err:
        logm_h(np.diag([1.0, 0.0]))
    assert err.value.eigenvalue == 0.0
    with pytest.raises(DomainError):
        matrix_function(np.diag([1.0, -1.0]), "inverse-shifted")


def test_inverse_shifted():
    a = np.diag([1.0, 3.0])
    np.testing.assert_allclose(matrix_function(a, "inverse-shifted", 1.0), np.diag([0.5, 0.25]))


@given(seeds, dims, st.floats(-3, 3))
def test_unitary_exp_is_unitary(seed, d, t):
    u = unitary_exp(random_hermitian(d, np.random.default_rng(seed)), t)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(d), atol=1e-12)


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_partial_trace_of_product(seed, da, db):
    rng = np.random.default_rng(seed)
    a, b = random_hermitian(da, rng), random_hermitian(db, rng)
    ab = kron(a, b)
    np.testing.assert_allclose(partial_trace(ab, "system", (da, db)), a * np.trace(b), atol=1e-12)
    np.testing.assert_allclose(partial_trace(ab, "environment", (da, db)), b * np.trace(a), atol=1e-12)
    np.testing.assert_allclose(partial_trace(ab, "system", (da, db)),
                               oracles.partial_trace_env(ab, da, db), atol=1e-12)


def test_partial_trace_bad_dims():
    with pytest.raises(ValidationError):
        partial_trace(np.eye(4), "system", (3, 2))
