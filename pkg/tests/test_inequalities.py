import numpy as np
import oracles
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opwork.errors import DomainError, ValidationError
from opwork.inequalities import (
    concavity_probe,
    dilate,
    floored_log,
    lgt_gap,
    lieb_trace_function,
    lifted_work_identity_check,
    log_ratio_sum,
    peierls_bogoliubov_gap,
    resolvent_double_integral,
    stinespring,
)
from opwork.openthermo import apply_channel, mixture_reset_channel
from opwork.operators import SIGMA_Z, partial_trace, random_hermitian
from opwork.suites import (
    random_closed_scenario,
    random_density,
    random_gibbs_preserving_channel,
    random_positive,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 4)


def test_pb_is_tight_for_commuting_scalar_shift():
    a = np.diag([0.3, -1.0])
    p = peierls_bogoliubov_gap(a, 0.7 * np.eye(2))
    assert p.gap == pytest.approx(0.0, abs=1e-14)


@given(seeds, dims)
def test_peierls_bogoliubov(seed, d):
    rng = np.random.default_rng(seed)
    assert peierls_bogoliubov_gap(random_hermitian(d, rng), random_hermitian(d, rng)).holds()


@given(seeds, dims, st.floats(0.0, 1.0))
def test_lieb_concavity(seed, d, lam):
    rng = np.random.default_rng(seed)
    assert concavity_probe(random_positive(d, rng), random_positive(d, rng), lam, random_hermitian(d, rng)).holds()


def test_lieb_function_is_trace_of_a_when_l_vanishes(rng):
    a = random_positive(3, rng)
    assert lieb_trace_function(a, np.zeros((3, 3))) == pytest.approx(np.trace(a).real)


def test_concavity_lambda_range():
    with pytest.raises(ValidationError):
        concavity_probe(np.eye(2), np.eye(2), 1.5, np.zeros((2, 2)))


@given(seeds, dims)
def test_lgt(seed, d):
    rng = np.random.default_rng(seed)
    assert lgt_gap(random_positive(d, rng), random_positive(d, rng), random_positive(d, rng)).holds()


def test_lgt_equality_when_all_commute():
    t, r, s = np.diag([1.0, 2.0]), np.diag([0.5, 3.0]), np.diag([2.0, 0.7])
    assert lgt_gap(t, r, s).gap == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_resolvent_matches_quadrature(d):
    rng = np.random.default_rng(d)
    s, t = random_positive(d, rng), random_positive(d, rng)
    np.testing.assert_allclose(resolvent_double_integral(s, t), oracles.resolvent_quadrature(s, t), atol=1e-6)


def test_resolvent_near_degenerate_spectrum():
    s = np.diag([1.0, 1.0 + 1e-11, 2.0])
    t = np.ones((3, 3))
    np.testing.assert_allclose(resolvent_double_integral(s, t), oracles.resolvent_quadrature(s, t), atol=1e-6)


@given(seeds, dims)
def test_resolvent_of_state_with_itself_is_identity(seed, d):
    rho = random_density(d, np.random.default_rng(seed))
    np.testing.assert_allclose(resolvent_double_integral(rho, rho), np.eye(d), atol=1e-10)


def test_resolvent_requires_positive_definite():
    with pytest.raises(DomainError):
        resolvent_double_integral(np.diag([1.0, 0.0]), np.eye(2))


@given(seeds, st.integers(2, 3), st.floats(0.1, 3.0))
def test_stinespring_round_trip(seed, d, beta):
    rng = np.random.default_rng(seed)
    ch = random_gibbs_preserving_channel(random_hermitian(d, rng), beta, rng)
    u, eps = stinespring(ch)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(u.shape[0]), atol=1e-12)
    rho = random_density(d, rng)
    out = partial_trace(dilate(u, eps, rho), "system", (d, eps.shape[0]))
    np.testing.assert_allclose(out, apply_channel(ch, rho), atol=1e-12)


def test_floored_log_reports_added_mass():
    log, added = floored_log(np.diag([1.0, 0.0]), 1e-13)
    assert added == pytest.approx(1e-13)
    assert np.isfinite(log).all()


@given(seeds, st.integers(2, 3))
def test_lifted_identities(seed, d):
    rng = np.random.default_rng(seed)
    h_a, h_b, h_c = (random_hermitian(d, rng) for _ in range(3))
    ch = random_gibbs_preserving_channel(h_b, 1.0, rng)
    r = lifted_work_identity_check(random_density(d, rng), ch, h_a, h_b, h_c, 1.0)
    assert r.max() < 1e-8


def test_lifted_check_requires_gibbs_preserving():
    with pytest.raises(ValidationError):
        lifted_work_identity_check(np.eye(2) / 2, mixture_reset_channel(SIGMA_Z, 1.0, 1.0),
                                   SIGMA_Z, -SIGMA_Z, SIGMA_Z, 1.0)


@given(seeds)
def test_log_ratio_form_agrees_with_estimator(seed):
    from opwork.driving import work_report

    h0, ht, beta, u, D = random_closed_scenario(np.random.default_rng(seed))
    rep = work_report(D, u, h0, ht, beta)
    lhs = log_ratio_sum(D, u, h0, ht, beta)
    assert lhs <= 1 + 1e-9
    assert lhs == pytest.approx(np.exp(rep.log_estimator + beta * rep.delta_F), rel=1e-10)
