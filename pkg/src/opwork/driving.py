"""Closed-system driving and the operational work bound.

A protocol is a piecewise Hamiltonian path ``t -> H(t)`` on ``[0, T]``. The
experimenter never sees ``H(t)``; they only see the conditional average
works ``<w>_i`` and from them build ``Delta F~``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import InequalityViolation, ValidationError
from .operators import (
    dagger,
    eig_hermitian,
    hermitian,
    hermitize,
    max_norm,
    unitary_exp,
)
from .states import Decomposition, check_unitary, gibbs_state, log_partition_function

REFERENCE_TOL = 1e-9
INEQUALITY_RTOL = 1e-9


@dataclass(frozen=True)
class ConstantPath:
    hamiltonian: np.ndarray

    def at(self, s: float) -> np.ndarray:
        return self.hamiltonian


@dataclass(frozen=True)
class LinearPath:
    """``(1 - s) H_a + s H_b`` for the segment-local fraction ``s``."""

    start: np.ndarray
    end: np.ndarray

    def at(self, s: float) -> np.ndarray:
        return (1.0 - s) * self.start + s * self.end


@dataclass(frozen=True)
class SampledPath:
    """Hamiltonians at equally spaced segment fractions, linearly interpolated."""

    samples: tuple

    def at(self, s: float) -> np.ndarray:
        n = len(self.samples)
        if n == 1:
            return self.samples[0]
        x = min(max(s, 0.0), 1.0) * (n - 1)
        k = min(int(math.floor(x)), n - 2)
        f = x - k
        return (1.0 - f) * self.samples[k] + f * self.samples[k + 1]


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    path: object

    def hamiltonian(self, t: float) -> np.ndarray:
        width = self.t_end - self.t_start
        s = 0.0 if width == 0 else (t - self.t_start) / width
        return self.path.at(s)


@dataclass(frozen=True)
class DrivingProtocol:
    """Contiguous segments covering ``[0, duration]``, all of one dimension."""

    duration: float
    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValidationError("protocol needs at least one segment", field="protocol")
        if self.duration <= 0:
            raise ValidationError("duration must be positive", field="protocol.duration")
        if abs(segs[0].t_start) > 1e-12 or abs(segs[-1].t_end - self.duration) > 1e-12:
            raise ValidationError("segments must cover [0, T]", field="protocol.segments")
        for k, (a, b) in enumerate(zip(segs, segs[1:])):
            if abs(a.t_end - b.t_start) > 1e-12:
                raise ValidationError("segments are not contiguous", field=f"protocol.segments[{k + 1}]")
        dims = set()
        for k, seg in enumerate(segs):
            if seg.t_end < seg.t_start:
                raise ValidationError("segment ends before it starts", field=f"protocol.segments[{k}]")
            for s in (0.0, 1.0):
                dims.add(seg.path.at(s).shape)
        if len(dims) != 1:
            raise ValidationError(f"Hamiltonians of differing dimensions {sorted(dims)}",
                                  field="protocol.segments")
        object.__setattr__(self, "segments", segs)

    @property
    def dim(self) -> int:
        return self.segments[0].path.at(0.0).shape[0]

    def hamiltonian(self, t: float) -> np.ndarray:
        for seg in self.segments:
            if t < seg.t_end:
                return seg.hamiltonian(t)
        return self.segments[-1].hamiltonian(t)

    @property
    def initial_hamiltonian(self) -> np.ndarray:
        return self.hamiltonian(0.0)

    @property
    def final_hamiltonian(self) -> np.ndarray:
        return self.segments[-1].hamiltonian(self.duration)

    @classmethod
    def constant(cls, h, duration: float = 1.0) -> "DrivingProtocol":
        h = hermitian(h, "H")
        return cls(duration, (Segment(0.0, duration, ConstantPath(h)),))

    @classmethod
    def linear(cls, h_a, h_b, duration: float = 1.0) -> "DrivingProtocol":
        h_a, h_b = hermitian(h_a, "H_a"), hermitian(h_b, "H_b")
        return cls(duration, (Segment(0.0, duration, LinearPath(h_a, h_b)),))

    @classmethod
    def sampled(cls, hamiltonians: Sequence, duration: float = 1.0) -> "DrivingProtocol":
        hs = tuple(hermitian(h, f"H[{k}]") for k, h in enumerate(hamiltonians))
        return cls(duration, (Segment(0.0, duration, SampledPath(hs)),))


def time_ordered_exponential(
    hamiltonian: Callable[[float], np.ndarray], t0: float, t1: float, steps: int
) -> np.ndarray:
    """Midpoint product ``prod_k exp(-i H(t_k + dt/2) dt)``, later times on the left."""
    if steps < 1:
        raise ValidationError("steps must be >= 1", field="steps")
    dt = (t1 - t0) / steps
    h0 = hamiltonian(t0)
    u = np.eye(h0.shape[0], dtype=complex)
    if dt == 0:
        return u
    for k in range(steps):
        u = unitary_exp(hamiltonian(t0 + (k + 0.5) * dt), dt) @ u
    return u


def propagator(protocol: DrivingProtocol, steps: int, t0: float = 0.0, t1: float | None = None) -> np.ndarray:
    """Unitary generated by the protocol on ``[t0, t1]`` (default the whole protocol)."""
    t1 = protocol.duration if t1 is None else t1
    return time_ordered_exponential(protocol.hamiltonian, t0, t1, steps)


def _check_same_dim(**ops):
    shapes = {name: np.shape(op) for name, op in ops.items()}
    if len(set(shapes.values())) != 1:
        raise ValidationError(f"dimension mismatch: {shapes}")


def work_operator(u, h0, ht) -> np.ndarray:
    """``U^dag H_T U - H_0``; its expectation in a state is that state's average work."""
    return hermitize(dagger(u) @ ht @ u - h0)


def conditional_work(rho_i, u, h0, ht) -> float:
    """Average work ``tr[rho_i (U^dag H_T U - H_0)]`` for one initial state."""
    rho_i, u, h0, ht = (np.asarray(x, dtype=complex) for x in (rho_i, u, h0, ht))
    _check_same_dim(rho_i=rho_i, U=u, H0=h0, HT=ht)
    w = np.trace(rho_i @ work_operator(u, h0, ht))
    if abs(w.imag) > 1e-12 * max(1.0, abs(w.real)):
        raise ValidationError(f"work has imaginary residue {w.imag:.3e}", field="conditional_work")
    return float(w.real)


def delta_F(h0, ht, beta: float) -> float:
    """Free energy difference ``-ln(Z_T / Z_0) / beta``."""
    if not beta > 0:
        raise ValidationError(f"beta must be > 0, got {beta!r}", field="beta")
    return -(log_partition_function(ht, beta) - log_partition_function(h0, beta)) / beta


@dataclass
class WorkReport:
    """Per-outcome conditional works and the quantities built from them.

    ``estimator`` is ``sum_i p_i exp(-beta <w>_i)``; ``log_estimator`` is its
    logarithm, which is what ``delta_F_tilde`` is computed from.
    """

    probabilities: np.ndarray
    works: np.ndarray
    beta: float
    W_avg: float
    log_estimator: float
    estimator: float
    delta_F_tilde: float
    delta_F: float
    gap_jensen: float
    gap_quantum: float
    metadata: dict = field(default_factory=dict)

    @property
    def scale(self) -> float:
        return max(1.0, abs(self.W_avg))

    def violations(self, rtol: float = INEQUALITY_RTOL) -> list[str]:
        out = []
        if self.gap_jensen < -rtol * self.scale:
            out.append(f"W_avg < delta_F_tilde by {-self.gap_jensen:.3e}")
        if self.gap_quantum < -rtol * self.scale:
            out.append(f"delta_F_tilde < delta_F by {-self.gap_quantum:.3e}")
        # estimator <= exp(-beta dF) (1 + rtol), compared in the log domain
        if self.log_estimator > -self.beta * self.delta_F + math.log1p(rtol):
            out.append("estimator exceeds exp(-beta delta_F)")
        return out

    def check(self, rtol: float = INEQUALITY_RTOL) -> "WorkReport":
        bad = self.violations(rtol)
        if bad:
            raise InequalityViolation("; ".join(bad))
        return self

    def to_dict(self) -> dict:
        return {
            "outcomes": [
                {"p": float(p), "work": float(w)} for p, w in zip(self.probabilities, self.works)
            ],
            "beta": float(self.beta),
            "W_avg": self.W_avg,
            "estimator": self.estimator,
            "log_estimator": self.log_estimator,
            "delta_F_tilde": self.delta_F_tilde,
            "delta_F": self.delta_F,
            "gap_jensen": self.gap_jensen,
            "gap_quantum": self.gap_quantum,
            "metadata": dict(self.metadata),
        }


def assemble_report(probabilities, works, beta: float, dF: float, metadata=None,
                    check: bool = True) -> WorkReport:
    """Build a :class:`WorkReport` from outcome probabilities and conditional works."""
    p = np.asarray(probabilities, dtype=float)
    w = np.asarray(works, dtype=float)
    w_avg = float(np.dot(p, w))
    log_est = float(logsumexp(-beta * w, b=p))
    dF_tilde = -log_est / beta
    report = WorkReport(
        probabilities=p,
        works=w,
        beta=float(beta),
        W_avg=w_avg,
        log_estimator=log_est,
        estimator=float(np.exp(log_est)),
        delta_F_tilde=dF_tilde,
        delta_F=float(dF),
        gap_jensen=w_avg - dF_tilde,
        gap_quantum=dF_tilde - dF,
        metadata=dict(metadata or {}),
    )
    return report.check() if check else report


def check_reference(decomposition: Decomposition, h0, beta: float, tol: float = REFERENCE_TOL) -> None:
    err = max_norm(decomposition.reference - gibbs_state(h0, beta))
    if err > tol:
        raise ValidationError(
            f"decomposition does not mix to the Gibbs state of H0 (max-norm error {err:.3e})",
            field="decomposition.reference",
        )


def work_report(decomposition: Decomposition, u, h0, ht, beta: float, metadata=None,
                check: bool = True) -> WorkReport:
    """Operational bound for a closed driving ``U`` and a decomposition of ``rho_0``.

    Raises :class:`ValidationError` unless ``decomposition`` mixes to
    ``gibbs_state(h0, beta)``; with ``check`` (default) a violated inequality
    raises :class:`InequalityViolation`.
    """
    h0 = hermitian(h0, "H0")
    ht = hermitian(ht, "HT")
    u = check_unitary(u)
    _check_same_dim(U=u, H0=h0, HT=ht, rho=decomposition.reference)
    check_reference(decomposition, h0, beta)
    wop = work_operator(u, h0, ht)
    works = np.einsum("ijk,kj->i", decomposition.states, wop).real
    meta = {"pruned_mass": decomposition.pruned_mass, **(metadata or {})}
    return assemble_report(decomposition.probabilities, works, beta, delta_F(h0, ht, beta), meta, check)


def tpm_estimator(h0, ht, u, beta: float) -> float:
    """Two-point-measurement average of ``exp(-beta (E^T_k - E^0_j))``.

    Summed term by term over the transition probabilities; equals
    ``Z_T / Z_0`` for every unitary, which makes it a cross-check of
    :func:`delta_F`.
    """
    if not beta > 0:
        raise ValidationError(f"beta must be > 0, got {beta!r}", field="beta")
    h0 = hermitian(h0, "H0")
    ht = hermitian(ht, "HT")
    u = np.asarray(u, dtype=complex)
    _check_same_dim(U=u, H0=h0, HT=ht)
    e0, v0 = eig_hermitian(h0)
    et, vt = eig_hermitian(ht)
    transition = np.abs(dagger(vt) @ u @ v0) ** 2  # [k, j]
    log_w0 = -beta * e0 - log_partition_function(h0, beta)
    with np.errstate(divide="ignore"):
        log_terms = log_w0[None, :] + np.log(transition) - beta * (et[:, None] - e0[None, :])
    return float(np.exp(logsumexp(log_terms)))
