import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opwork.errors import InequalityViolation, ValidationError
from opwork.operators import SIGMA_X, SIGMA_Z, random_hermitian
from opwork.optimize import (
    OptimizationConfig,
    _Objective,
    hermitian_from_params,
    minimize_bound,
    params_from_hermitian,
    povm_from_params,
    report_at,
    saturating_params,
    unitary_from_params,
)

seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.integers(1, 4))
def test_hermitian_parametrization_round_trip(seed, d):
    g = random_hermitian(d, np.random.default_rng(seed))
    np.testing.assert_allclose(hermitian_from_params(params_from_hermitian(g), d), g, atol=1e-15)


def test_parameter_layout():
    g = hermitian_from_params([1.0, 2.0, 0.5, -0.25], 2)
    np.testing.assert_allclose(g, [[1.0, 0.5 - 0.25j], [0.5 + 0.25j, 2.0]])
    np.testing.assert_allclose(unitary_from_params([0, 0, np.pi / 2, 0]), -1j * SIGMA_X, atol=1e-15)


@given(st.lists(st.floats(-3, 3), min_size=16, max_size=16), st.integers(1, 2))
def test_povm_parametrization_is_valid(theta, m):
    theta = np.array(theta)
    d_e = 2
    n = (m * d_e) ** 2
    povm = povm_from_params(np.resize(theta, n), d_e, m)
    np.testing.assert_allclose(povm.elements.sum(axis=0), np.eye(d_e), atol=1e-12)


def test_wrong_lengths():
    with pytest.raises(ValidationError):
        unitary_from_params(np.zeros(5))
    with pytest.raises(ValidationError):
        povm_from_params(np.zeros(3), 2, 2)
    with pytest.raises(ValidationError):
        OptimizationConfig(restarts=0)


def test_saturating_point_reaches_delta_f():
    obj = _Objective(SIGMA_Z, 2 * SIGMA_Z, 1.0, 2)
    x = saturating_params(SIGMA_Z)
    assert obj(x) == pytest.approx(obj.delta_F, abs=1e-12)


def test_objective_flags_an_impossible_point():
    obj = _Objective(SIGMA_Z, 2 * SIGMA_Z, 1.0, 2)
    # pretend the true free energy is higher than it is: every point now "violates"
    obj.delta_F = 10.0
    with pytest.raises(InequalityViolation):
        obj(np.zeros(obj.size))


def test_minimize_small_budget_is_deterministic():
    cfg = OptimizationConfig(restarts=2, max_iters=300, seed=3, polish_rounds=1)
    a = minimize_bound(SIGMA_Z, 2 * SIGMA_Z + 0.3 * SIGMA_X, 0.7, cfg)
    b = minimize_bound(SIGMA_Z, 2 * SIGMA_Z + 0.3 * SIGMA_X, 0.7, cfg)
    assert a.delta_F_tilde == b.delta_F_tilde
    assert a.certificate_gap >= -1e-9
    assert all(np.diff(a.trace) <= 0)
    assert len(a.restart_values) == 2
    assert a.evaluations == len(a.trace)


def test_parallel_restarts_match_serial():
    base = dict(restarts=3, max_iters=200, seed=1, polish_rounds=0)
    serial = minimize_bound(SIGMA_Z, SIGMA_X, 1.0, OptimizationConfig(**base))
    parallel = minimize_bound(SIGMA_Z, SIGMA_X, 1.0, OptimizationConfig(jobs=2, **base))
    assert serial.restart_values == parallel.restart_values
    assert serial.best_restart == parallel.best_restart


def test_report_at_best_point():
    cfg = OptimizationConfig(restarts=1, max_iters=200, polish_rounds=0)
    res = minimize_bound(SIGMA_Z, 2 * SIGMA_Z, 1.0, cfg)
    rep = report_at(SIGMA_Z, 2 * SIGMA_Z, 1.0, res, cfg.povm_outcomes)
    assert rep.delta_F_tilde == pytest.approx(res.delta_F_tilde, abs=1e-14)


def test_initial_point_is_used():
    x = saturating_params(SIGMA_Z)
    res = minimize_bound(SIGMA_Z, 2 * SIGMA_Z, 1.0, OptimizationConfig(restarts=1, max_iters=50, polish_rounds=0),
                         initial=x)
    assert res.certificate_gap == pytest.approx(0.0, abs=1e-12)
