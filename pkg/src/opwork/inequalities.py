"""Numerical certificates for the trace inequalities behind the work bound.

Each probe returns an :class:`InequalityProbe` whose ``gap = rhs - lhs``
must be non-negative up to ``1e-9 * max(1, |rhs|)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .driving import INEQUALITY_RTOL
from .errors import DomainError, ValidationError
from .openthermo import (
    FIXED_POINT_TOL,
    QuantumChannel,
    apply_channel,
    verify_gibbs_fixed_point,
)
from .operators import (
    as_matrix,
    dagger,
    eig_hermitian,
    expm_h,
    hermitian,
    hermitize,
    kron,
    logm_h,
    max_norm,
)
from .states import Decomposition, gibbs_state, log_gibbs_state

LIFT_FLOOR = 1e-13


@dataclass(frozen=True)
class InequalityProbe:
    lhs: float
    rhs: float
    inputs: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return self.rhs - self.lhs

    @property
    def scale(self) -> float:
        return max(1.0, abs(self.rhs))

    def holds(self, rtol: float = INEQUALITY_RTOL) -> bool:
        return self.gap >= -rtol * self.scale


def _tr(m) -> float:
    return float(np.trace(m).real)


def peierls_bogoliubov_gap(a, b, inputs=None) -> InequalityProbe:
    """``tr[e^A] e^<B> <= tr[e^(A+B)]`` with ``<B> = tr[e^A B] / tr[e^A]``."""
    a = hermitian(a, "A")
    b = hermitian(b, "B")
    ea = expm_h(a)
    z = _tr(ea)
    mean_b = _tr(ea @ b) / z
    return InequalityProbe(z * math.exp(mean_b), _tr(expm_h(a + b)), dict(inputs or {}))


def lieb_trace_function(a, l) -> float:
    """``tr exp(ln A + L)``; concave in positive definite ``A`` for fixed Hermitian ``L``."""
    return _tr(expm_h(logm_h(a) + hermitian(l, "L")))


def concavity_probe(a1, a2, lam: float, l, inputs=None) -> InequalityProbe:
    """Midpoint-concavity check of :func:`lieb_trace_function` at weight ``lam``."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must lie in [0, 1], got {lam!r}", field="lam")
    a1 = hermitian(a1, "A1")
    a2 = hermitian(a2, "A2")
    lhs = lam * lieb_trace_function(a1, l) + (1 - lam) * lieb_trace_function(a2, l)
    rhs = lieb_trace_function(lam * a1 + (1 - lam) * a2, l)
    return InequalityProbe(lhs, rhs, dict(inputs or {}))


def _log_mean_kernel(s: np.ndarray) -> np.ndarray:
    """``ln(s_j / s_k) / (s_j - s_k)``, with ``1 / s_j`` on (near-)coincident pairs."""
    sj = s[:, None]
    sk = s[None, :]
    x = (sj - sk) / sk
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.log1p(x) / (sj - sk)
    small = np.abs(x) < 1e-8
    # series of log1p(x)/x around 0
    k = np.where(small, (1.0 - x / 2.0 + x * x / 3.0) / sk, k)
    return k


def resolvent_double_integral(s, t) -> np.ndarray:
    """``int_0^inf (S + u)^-1 T (S + u)^-1 du`` in closed form.

    In the eigenbasis of ``S`` the integral multiplies ``T_jk`` by
    ``ln(s_j/s_k) / (s_j - s_k)`` (``1/s_j`` on the diagonal).
    """
    vals, vecs = eig_hermitian(s)
    if vals.min() <= 0:
        raise DomainError(f"S must be positive definite; smallest eigenvalue {vals.min():.3e}",
                          eigenvalue=float(vals.min()))
    t = hermitian(t, "T")
    t_eig = dagger(vecs) @ t @ vecs
    return hermitize(vecs @ (_log_mean_kernel(vals) * t_eig) @ dagger(vecs))


def lgt_gap(t, r, s, inputs=None) -> InequalityProbe:
    """Lieb's triple-matrix inequality ``tr e^(ln T + ln R - ln S) <= tr[R I(S, T)]``.

    ``I(S, T)`` is :func:`resolvent_double_integral`.
    """
    lhs = _tr(expm_h(logm_h(t) + logm_h(r) - logm_h(s)))
    rhs = _tr(hermitian(r, "R") @ resolvent_double_integral(s, t))
    return InequalityProbe(lhs, rhs, dict(inputs or {}))


def _null_space_completion(v: np.ndarray) -> np.ndarray:
    """Orthonormal columns spanning the complement of the column space of ``v``."""
    return scipy.linalg.null_space(dagger(v))


def stinespring(channel: QuantumChannel):
    """Unitary dilation ``K[rho] = tr_E[U (rho (x) |0><0|) U^dag]``.

    The environment has one level per Kraus operator. ``U`` maps
    ``|psi>|0>`` to ``sum_j K_j|psi>|j>``; the remaining columns are an
    orthonormal completion computed from the SVD null space.
    """
    if not isinstance(channel, QuantumChannel):
        channel = QuantumChannel(channel)
    k = channel.kraus
    r, d = k.shape[0], k.shape[1]
    n = d * r
    # isometry column s: sum_j K_j|s> (x) |j>, index (row, j) -> row * r + j
    iso = np.transpose(k, (1, 0, 2)).reshape(n, d)
    err = max_norm(dagger(iso) @ iso - np.eye(d))
    if err > 1e-10:
        raise ValidationError(f"Kraus operators are not trace preserving ({err:.3e})", field="kraus")
    comp = _null_space_completion(iso)
    u = np.zeros((n, n), dtype=complex)
    first = [s * r for s in range(d)]
    rest = [c for c in range(n) if c % r != 0]
    u[:, first] = iso
    u[:, rest] = comp
    eps = np.zeros((r, r), dtype=complex)
    eps[0, 0] = 1.0
    return u, eps


def dilate(u, eps, rho) -> np.ndarray:
    """``U (rho (x) eps) U^dag``."""
    return u @ kron(rho, eps) @ dagger(u)


def floored_log(rho, floor: float = LIFT_FLOOR):
    """``ln`` of ``rho`` after raising eigenvalues to ``floor`` and renormalizing.

    Returns the logarithm and the probability mass added by the floor.
    """
    vals, vecs = eig_hermitian(rho)
    added = float(np.clip(floor - vals, 0.0, None).sum())
    v = np.maximum(vals, floor)
    v = v / v.sum()
    return hermitize((vecs * np.log(v)) @ dagger(vecs)), added


@dataclass(frozen=True)
class LiftedResiduals:
    first: float
    second: float
    floored_mass: float

    def max(self) -> float:
        return max(self.first, self.second)


def lifted_work_identity_check(rho_i, channel: QuantumChannel, h_a, h_b, h_c, beta: float,
                               floor: float = LIFT_FLOOR) -> LiftedResiduals:
    """Compare the system-level work exponents with their dilated forms.

    First: ``tr[rho_i (ln rho_B - ln rho_A)]`` against
    ``tr[rho_iE (ln rho_BE - ln rho_AE)]`` with ``rho_xE = U(rho_x (x) eps)U^dag``.
    Second: ``tr[K[rho_i] (ln rho_C - ln rho_B)]`` against
    ``tr[rho_iE (ln rho_C1 - ln rho_B1)]`` with ``rho_x1 = rho_x (x) 1/d_E``.
    The dilated states are rank deficient, so their logs are floored.
    """
    residual = verify_gibbs_fixed_point(channel, h_b, beta)
    if residual > FIXED_POINT_TOL:
        raise ValidationError(f"channel is not Gibbs preserving for H_B (residual {residual:.3e})",
                              field="channel")
    rho_i = as_matrix(rho_i, "rho_i")
    rho_a, rho_b = gibbs_state(h_a, beta), gibbs_state(h_b, beta)
    u, eps = stinespring(channel)
    d_e = eps.shape[0]

    log_a, log_b, log_c = (log_gibbs_state(h, beta) for h in (h_a, h_b, h_c))
    direct_1 = _tr(rho_i @ (log_b - log_a))
    rho_ie = dilate(u, eps, rho_i)
    log_be, m_b = floored_log(dilate(u, eps, rho_b), floor)
    log_ae, m_a = floored_log(dilate(u, eps, rho_a), floor)
    lifted_1 = _tr(rho_ie @ (log_be - log_ae))

    direct_2 = _tr(apply_channel(channel, rho_i) @ (log_c - log_b))
    # ln(rho (x) 1/d_E) = ln rho (x) 1 - ln d_E; the constant cancels in the difference
    eye_e = np.eye(d_e)
    lifted_2 = _tr(rho_ie @ (kron(log_c, eye_e) - kron(log_b, eye_e)))
    return LiftedResiduals(abs(direct_1 - lifted_1), abs(direct_2 - lifted_2), m_a + m_b)


def log_ratio_sum(decomposition: Decomposition, u, h0, ht, beta: float) -> float:
    """``sum_i p_i exp(tr[rho_i (ln rho_B - ln rho_A)])`` with ``rho_B ~ exp(-beta U^dag H_T U)``.

    This is the work inequality in log-ratio form; it is at most 1 and equals
    ``estimator * Z_0 / Z_T``.
    """
    u = as_matrix(u, "U")
    diff = log_gibbs_state(hermitize(dagger(u) @ as_matrix(ht) @ u), beta) - log_gibbs_state(h0, beta)
    exps = np.einsum("ijk,kj->i", decomposition.states, diff).real
    return float(np.dot(decomposition.probabilities, np.exp(exps)))
