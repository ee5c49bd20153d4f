import math

import numpy as np
import oracles
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from opwork.driving import (
    ConstantPath,
    DrivingProtocol,
    LinearPath,
    Segment,
    assemble_report,
    conditional_work,
    delta_F,
    propagator,
    tpm_estimator,
    work_operator,
    work_report,
)
from opwork.errors import InequalityViolation, ValidationError
from opwork.operators import SIGMA_X, SIGMA_Z, random_hermitian
from opwork.states import (
    decompose_via_povm,
    energy_decomposition,
    gibbs_state,
    haar_unitary,
    purify,
    random_povm,
    trivial_decomposition,
)
from opwork.suites import random_closed_scenario

seeds = st.integers(0, 2**32 - 1)


def test_qubit_delta_f_closed_form():
    assert delta_F(SIGMA_Z, 2 * SIGMA_Z, 1.0) == pytest.approx(-math.log(math.cosh(2) / math.cosh(1)), abs=1e-14)


def test_constant_protocol_propagator_is_exact():
    h = SIGMA_X + 0.3 * SIGMA_Z
    p = DrivingProtocol.constant(h, duration=2.0)
    np.testing.assert_allclose(propagator(p, 3), scipy.linalg.expm(-2j * h), atol=1e-12)


def test_linear_protocol_propagator_converges_to_ode():
    p = DrivingProtocol.linear(SIGMA_Z, SIGMA_X + 2 * SIGMA_Z, duration=1.5)
    ref = oracles.schrodinger_propagator(p.hamiltonian, 0.0, 1.5, 2)
    errs = [np.abs(propagator(p, n) - ref).max() for n in (50, 100, 200)]
    assert errs[-1] < 1e-5
    # midpoint rule is second order
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_propagator_splits_at_intermediate_times():
    p = DrivingProtocol.linear(SIGMA_Z, SIGMA_X, duration=1.0)
    whole = propagator(p, 64)
    split = propagator(p, 32, 0.5, 1.0) @ propagator(p, 32, 0.0, 0.5)
    np.testing.assert_allclose(whole, split, atol=1e-14)


def test_protocol_validation():
    a = ConstantPath(SIGMA_Z)
    with pytest.raises(ValidationError):
        DrivingProtocol(1.0, (Segment(0.0, 0.5, a), Segment(0.6, 1.0, a)))
    with pytest.raises(ValidationError):
        DrivingProtocol(1.0, (Segment(0.0, 0.5, a),))
    with pytest.raises(ValidationError):
        DrivingProtocol(1.0, (Segment(0.0, 0.5, a), Segment(0.5, 1.0, ConstantPath(np.eye(3)))))


def test_multi_segment_endpoints():
    p = DrivingProtocol(2.0, (Segment(0.0, 1.0, LinearPath(SIGMA_Z, SIGMA_X)),
                              Segment(1.0, 2.0, LinearPath(SIGMA_X, 2 * SIGMA_Z))))
    np.testing.assert_allclose(p.initial_hamiltonian, SIGMA_Z)
    np.testing.assert_allclose(p.final_hamiltonian, 2 * SIGMA_Z)
    np.testing.assert_allclose(p.hamiltonian(1.0), SIGMA_X)
    np.testing.assert_allclose(DrivingProtocol.sampled([SIGMA_Z, SIGMA_X, SIGMA_Z]).hamiltonian(0.25),
                               0.5 * (SIGMA_Z + SIGMA_X))


def test_work_operator_and_conditional_work():
    u = scipy.linalg.expm(-0.7j * SIGMA_X)
    w = work_operator(u, SIGMA_Z, 2 * SIGMA_Z)
    rho = np.diag([1.0, 0.0])
    assert conditional_work(rho, u, SIGMA_Z, 2 * SIGMA_Z) == pytest.approx(np.trace(rho @ w).real)


def test_reference_must_be_gibbs():
    D = trivial_decomposition(gibbs_state(SIGMA_Z, 2.0))
    with pytest.raises(ValidationError):
        work_report(D, np.eye(2), SIGMA_Z, 2 * SIGMA_Z, 1.0)


def test_non_unitary_rejected():
    D = trivial_decomposition(gibbs_state(SIGMA_Z, 1.0))
    with pytest.raises(ValidationError):
        work_report(D, 1.1 * np.eye(2), SIGMA_Z, 2 * SIGMA_Z, 1.0)


def test_assemble_report_raises_on_violation():
    # one outcome of work -10 with delta_F = 0 breaks the inequality
    with pytest.raises(InequalityViolation):
        assemble_report([1.0], [-10.0], 1.0, 0.0)
    rep = assemble_report([1.0], [-10.0], 1.0, 0.0, check=False)
    assert rep.violations()


def test_trivial_decomposition_gap_is_jensen_only():
    # a single outcome makes W_avg == dF~
    u = haar_unitary(2, 3)
    rep = work_report(trivial_decomposition(gibbs_state(SIGMA_Z, 1.0)), u, SIGMA_Z, SIGMA_X, 1.0)
    assert rep.gap_jensen == pytest.approx(0.0, abs=1e-14)
    assert rep.gap_quantum >= 0


@given(seeds)
def test_bound_chain_property(seed):
    h0, ht, beta, u, D = random_closed_scenario(np.random.default_rng(seed))
    rep = work_report(D, u, h0, ht, beta)
    tol = 1e-9 * rep.scale
    assert rep.W_avg >= rep.delta_F_tilde - tol
    assert rep.delta_F_tilde >= rep.delta_F - tol
    assert rep.delta_F == pytest.approx(oracles.delta_f(h0, ht, beta), abs=1e-9)
    direct = sum(p * math.exp(-beta * w) for p, w in zip(rep.probabilities, rep.works))
    assert rep.estimator == pytest.approx(direct, rel=1e-12)


@given(seeds)
def test_tpm_matches_brute_force(seed):
    h0, ht, beta, u, _ = random_closed_scenario(np.random.default_rng(seed))
    assert tpm_estimator(h0, ht, u, beta) == pytest.approx(oracles.tpm_sum(h0, ht, u, beta), rel=1e-10)
    assert tpm_estimator(h0, ht, u, beta) == pytest.approx(math.exp(-beta * delta_F(h0, ht, beta)), rel=1e-10)


def test_refining_the_povm_lowers_the_bound():
    # the finest decomposition of the qubit (energy basis) beats the trivial one
    h0, ht = SIGMA_Z, 2 * SIGMA_Z
    coarse = work_report(trivial_decomposition(gibbs_state(h0, 1.0)), np.eye(2), h0, ht, 1.0)
    fine = work_report(energy_decomposition(h0, 1.0), np.eye(2), h0, ht, 1.0)
    assert fine.delta_F_tilde < coarse.delta_F_tilde
    assert fine.gap_quantum == pytest.approx(0.0, abs=1e-14)


def test_work_report_serializes():
    rng = np.random.default_rng(0)
    h0, ht = random_hermitian(3, rng), random_hermitian(3, rng)
    D = decompose_via_povm(purify(gibbs_state(h0, 1.0)), random_povm(3, 4, rng))
    d = work_report(D, haar_unitary(3, rng), h0, ht, 1.0, {"tag": "x"}).to_dict()
    assert d["metadata"]["tag"] == "x"
    assert sum(o["p"] for o in d["outcomes"]) == pytest.approx(1.0)
