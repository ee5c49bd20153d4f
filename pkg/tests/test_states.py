import math

import numpy as np
import oracles
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from opwork.errors import RangeError, ValidationError
from opwork.operators import SIGMA_Z, random_hermitian
from opwork.states import (
    POVM,
    Decomposition,
    decompose_via_povm,
    density_operator,
    eigen_decomposition,
    energy_decomposition,
    gibbs_state,
    haar_unitary,
    log_gibbs_state,
    log_partition_function,
    partition_function,
    purify,
    random_povm,
    schmidt_povm,
    trivial_decomposition,
    von_neumann_entropy,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 4)
betas = st.floats(0.0, 5.0)


def test_qubit_gibbs_values():
    rho = gibbs_state(SIGMA_Z, 1.0)
    np.testing.assert_allclose(np.diag(rho).real, [math.exp(-1) / (2 * math.cosh(1)), math.exp(1) / (2 * math.cosh(1))])
    assert partition_function(SIGMA_Z, 1.0) == pytest.approx(2 * math.cosh(1.0), rel=1e-14)


def test_overflow_guard():
    with pytest.raises(RangeError):
        gibbs_state(np.diag([0.0, 1000.0]), 1.0)
    # a large common shift is harmless
    rho = gibbs_state(np.diag([1e6, 1e6 + 1.0]), 1.0)
    assert np.isfinite(rho).all()
    assert log_partition_function(np.diag([1e6, 1e6 + 1.0]), 1.0) == pytest.approx(-1e6 + math.log(1 + math.exp(-1)))


def test_beta_validation():
    with pytest.raises(ValidationError):
        gibbs_state(SIGMA_Z, -1.0)
    with pytest.raises(ValidationError):
        gibbs_state(SIGMA_Z, float("nan"))


@given(seeds, dims, betas)
def test_gibbs_matches_oracle(seed, d, beta):
    h = random_hermitian(d, np.random.default_rng(seed))
    np.testing.assert_allclose(gibbs_state(h, beta), oracles.gibbs(h, beta), atol=1e-11)


@given(seeds, dims, st.floats(0.01, 5.0))
def test_log_gibbs_exponentiates_to_gibbs(seed, d, beta):
    h = random_hermitian(d, np.random.default_rng(seed))
    np.testing.assert_allclose(expm(log_gibbs_state(h, beta)), oracles.gibbs(h, beta), atol=1e-12)


@given(seeds, dims, st.floats(0.01, 1.0))
def test_log_gibbs_matches_logm(seed, d, beta):
    # logm itself degrades on nearly singular states, so keep beta moderate
    h = random_hermitian(d, np.random.default_rng(seed))
    np.testing.assert_allclose(log_gibbs_state(h, beta), oracles.logm(oracles.gibbs(h, beta)), atol=1e-8)


def test_entropy_bounds():
    assert von_neumann_entropy(np.diag([1.0, 0.0])) == pytest.approx(0.0, abs=1e-14)
    assert von_neumann_entropy(np.eye(3) / 3) == pytest.approx(math.log(3))


def test_purification_examples():
    psi = purify(np.diag([1.0, 0.0]))
    np.testing.assert_allclose(psi.joint_state, [1, 0, 0, 0], atol=1e-15)
    psi = purify(gibbs_state(SIGMA_Z, 1.0))
    p = gibbs_state(SIGMA_Z, 1.0).diagonal().real
    np.testing.assert_allclose(psi.joint_state, [math.sqrt(p[0]), 0, 0, math.sqrt(p[1])], atol=1e-15)


@given(seeds, dims, betas)
def test_purification_reduces_to_state(seed, d, beta):
    rho = gibbs_state(random_hermitian(d, np.random.default_rng(seed)), beta)
    psi = purify(rho)
    assert np.linalg.norm(psi.joint_state) == pytest.approx(1.0)
    np.testing.assert_allclose(psi.reduced_state(), rho, atol=1e-12)
    np.testing.assert_allclose(oracles.partial_trace_env(psi.density_matrix(), d, d), rho, atol=1e-12)


def test_density_operator_validation():
    with pytest.raises(ValidationError):
        density_operator(np.diag([0.7, 0.7]))
    with pytest.raises(ValidationError):
        density_operator(np.diag([1.5, -0.5]))


def test_povm_validation():
    with pytest.raises(ValidationError):
        POVM(np.array([np.eye(2), np.eye(2)]))
    with pytest.raises(ValidationError):
        POVM(np.array([np.diag([1.5, 0.5]), np.diag([-0.5, 0.5])]))


@given(seeds, st.integers(1, 4), st.integers(1, 6), st.booleans())
def test_random_povm_is_complete(seed, d, m, projective):
    if projective and m > d:
        with pytest.raises(ValidationError):
            random_povm(d, m, seed, projective=True)
        return
    povm = random_povm(d, m, seed, projective=projective)
    assert povm.outcome_count == m
    np.testing.assert_allclose(povm.elements.sum(axis=0), np.eye(d), atol=1e-12)
    for a in povm.elements:
        assert np.linalg.eigvalsh(a).min() > -1e-12


@given(seeds, st.integers(1, 3), st.integers(1, 6), betas)
def test_decomposition_mixes_to_gibbs(seed, d, m, beta):
    rng = np.random.default_rng(seed)
    rho = gibbs_state(random_hermitian(d, rng), beta)
    psi = purify(rho)
    povm = random_povm(d, m, rng)
    D = decompose_via_povm(psi, povm)
    np.testing.assert_allclose(D.mixture(), rho, atol=1e-10)
    assert D.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    p, states = oracles.conditional_states(psi.joint_state, povm.elements, d)
    if not D.pruned:
        np.testing.assert_allclose(D.probabilities, p, atol=1e-12)
        np.testing.assert_allclose(D.states, states, atol=1e-9)
    for s in D.states:
        assert np.trace(s).real == pytest.approx(1.0)
        assert np.linalg.eigvalsh(s).min() > -1e-10


def test_schmidt_povm_reproduces_eigen_decomposition():
    rho = gibbs_state(np.diag([0.0, 0.4, 1.5]), 1.2)
    D = decompose_via_povm(purify(rho), schmidt_povm(rho))
    E = eigen_decomposition(rho)
    np.testing.assert_allclose(np.sort(D.probabilities), np.sort(E.probabilities), atol=1e-12)


def test_energy_decomposition_keeps_tiny_weights():
    h = np.diag([0.0, 40.0])
    D = energy_decomposition(h, 1.0)
    assert len(D) == 2 and D.probabilities[1] < 1e-17
    E = eigen_decomposition(gibbs_state(h, 1.0))
    assert len(E) == 1 and E.pruned


def test_trivial_decomposition():
    rho = gibbs_state(SIGMA_Z, 0.3)
    D = trivial_decomposition(rho)
    assert len(D) == 1
    np.testing.assert_allclose(D.states[0], rho)


def test_decomposition_rejects_wrong_mixture():
    with pytest.raises(ValidationError):
        Decomposition(np.array([1.0]), np.array([np.diag([1.0, 0.0])]), np.eye(2) / 2)


def test_decomposition_dimension_mismatch():
    with pytest.raises(ValidationError):
        decompose_via_povm(purify(np.eye(2) / 2), random_povm(3, 2, 0))


def test_all_outcomes_pruned_is_an_error():
    psi = purify(np.diag([1.0, 0.0]))
    with pytest.raises(ValidationError):
        decompose_via_povm(psi, POVM(np.array([np.diag([0.0, 1.0]), np.diag([1.0, 0.0])])), p_floor=2.0)


@given(seeds, st.integers(1, 5))
def test_haar_unitary(seed, d):
    u = haar_unitary(d, seed)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(d), atol=1e-12)
    np.testing.assert_array_equal(u, haar_unitary(d, seed))
