"""Open-system driving: Gibbs-preserving damping interleaved with unitary segments.

Damping is instantaneous. Between events the state evolves under the
protocol's propagator; the work of one run is the sum, over the intervals
between events, of the energy change during that interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .driving import (
    DrivingProtocol,
    assemble_report,
    check_reference,
    conditional_work,
    delta_F,
    propagator,
    work_report,
)
from .errors import ConstructionError, ValidationError
from .operators import (
    as_matrix,
    commutator,
    dagger,
    eig_hermitian,
    hermitian,
    hermitize,
    kron,
    max_norm,
)
from .states import Decomposition, _rng, gibbs_state, haar_unitary

TP_TOL = 1e-10
FIXED_POINT_TOL = 1e-9
SCHEDULE_TOL = 1e-9
DEFAULT_STEPS = 64


@dataclass(frozen=True)
class QuantumChannel:
    """CPTP map in Kraus form, ``rho -> sum_j K_j rho K_j^dag``."""

    kraus: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kraus, dtype=complex)
        if k.ndim == 2:
            k = k[None]
        if k.ndim != 3 or k.shape[1] != k.shape[2] or k.shape[0] < 1:
            raise ValidationError(f"Kraus operators must have shape (r, d, d), got {k.shape}",
                                  field="kraus")
        err = max_norm(np.einsum("jab,jac->bc", k.conj(), k) - np.eye(k.shape[1]))
        if err > TP_TOL:
            raise ValidationError(f"not trace preserving: max |sum K^dag K - I| = {err:.3e}",
                                  field="kraus")
        k.setflags(write=False)
        object.__setattr__(self, "kraus", k)

    @property
    def dim(self) -> int:
        return self.kraus.shape[1]

    @property
    def rank(self) -> int:
        return self.kraus.shape[0]

    def __call__(self, rho) -> np.ndarray:
        return apply_channel(self, rho)


def apply_channel(channel: QuantumChannel, rho) -> np.ndarray:
    rho = as_matrix(rho, "rho")
    if rho.shape != (channel.dim, channel.dim):
        raise ValidationError(f"state has shape {rho.shape}, channel acts on dimension {channel.dim}",
                              field="rho")
    k = channel.kraus
    return hermitize(np.einsum("jab,bc,jdc->ad", k, rho, k.conj()))


def identity_channel(dim: int) -> QuantumChannel:
    return QuantumChannel(np.eye(dim, dtype=complex)[None])


def reset_channel(sigma) -> QuantumChannel:
    """Replacement map ``rho -> tr[rho] sigma`` with Kraus ``sqrt(l_k)|phi_k><j|``."""
    vals, vecs = eig_hermitian(sigma)
    d = vecs.shape[0]
    ops = [
        math.sqrt(max(l, 0.0)) * np.outer(vecs[:, k], np.eye(d)[j])
        for k, l in enumerate(vals) if l > 0
        for j in range(d)
    ]
    return QuantumChannel(np.array(ops))


def dephasing_channel(basis, strength: float = 1.0) -> QuantumChannel:
    """Dephasing in the orthonormal ``basis`` (columns); ``strength=1`` removes all coherences."""
    basis = as_matrix(basis, "basis")
    d = basis.shape[0]
    ops = [math.sqrt(1.0 - strength) * np.eye(d, dtype=complex)] if strength < 1 else []
    ops += [math.sqrt(strength) * np.outer(basis[:, k], basis[:, k].conj()) for k in range(d)]
    return QuantumChannel(np.array(ops))


def mixture_reset_channel(h, beta: float, lam: float) -> QuantumChannel:
    """``rho -> (1 - lam) rho + lam gibbs(h, beta)``.

    Kraus form: ``sqrt(1 - lam) I`` and resets ``sqrt(lam p_k) |k><j|`` over the
    Gibbs eigenbasis ``|k>`` and the computational basis ``|j>``.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must lie in [0, 1], got {lam!r}", field="lambda")
    sigma = gibbs_state(h, beta)
    vals, vecs = eig_hermitian(sigma)
    d = sigma.shape[0]
    ops = []
    if lam < 1.0:
        ops.append(math.sqrt(1.0 - lam) * np.eye(d, dtype=complex))
    if lam > 0.0:
        for k in range(d):
            pk = max(vals[k], 0.0)
            if pk == 0.0:
                continue
            for j in range(d):
                ops.append(math.sqrt(lam * pk) * np.outer(vecs[:, k], np.eye(d)[j]))
    return QuantumChannel(np.array(ops))


def swap_operator(d: int) -> np.ndarray:
    s = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            s[b * d + a, a * d + b] = 1.0
    return s


def partial_swap(d: int, theta: float) -> np.ndarray:
    """``exp(-i theta SWAP) = cos(theta) I - i sin(theta) SWAP`` on ``C^d (x) C^d``."""
    return math.cos(theta) * np.eye(d * d) - 1j * math.sin(theta) * swap_operator(d)


def energy_conserving_unitary(h_total, seed=None, degeneracy_tol: float = 1e-9) -> np.ndarray:
    """Random unitary commuting with ``h_total``: Haar blocks on its degenerate eigenspaces."""
    vals, vecs = eig_hermitian(h_total)
    rng = _rng(seed)
    scale = max(1.0, float(np.max(np.abs(vals))))
    blocks = np.zeros_like(vecs)
    start = 0
    n = vals.size
    while start < n:
        stop = start + 1
        while stop < n and vals[stop] - vals[start] <= degeneracy_tol * scale:
            stop += 1
        blocks[start:stop, start:stop] = haar_unitary(stop - start, rng)
        start = stop
    return vecs @ blocks @ dagger(vecs)


def thermal_attach_channel(h, beta: float, v, h_anc=None) -> QuantumChannel:
    """``rho -> tr_anc[V (rho (x) gibbs(h_anc, beta)) V^dag]`` for energy-conserving ``V``.

    ``h_anc`` defaults to ``h``. ``V`` must commute with
    ``h (x) 1 + 1 (x) h_anc``; the Gibbs fixed point is verified before the
    channel is returned.
    """
    h = hermitian(h, "H")
    h_anc = h if h_anc is None else hermitian(h_anc, "H_anc")
    d, d_a = h.shape[0], h_anc.shape[0]
    v = as_matrix(v, "V")
    if v.shape != (d * d_a, d * d_a):
        raise ValidationError(f"V must act on dimension {d * d_a}", field="V")
    h_tot = kron(h, np.eye(d_a)) + kron(np.eye(d), h_anc)
    err = max_norm(commutator(v, h_tot))
    if err > 1e-10 * max(1.0, max_norm(h_tot)):
        raise ConstructionError(f"V does not conserve total energy: max |[V, H_tot]| = {err:.3e}")
    q, anc_basis = eig_hermitian(gibbs_state(h_anc, beta))
    v4 = v.reshape(d, d_a, d, d_a)
    ops = []
    for b in range(d_a):
        if q[b] <= 0:
            continue
        # V acting on |psi> (x) |b>, then projected on ancilla basis state <a|
        vb = np.einsum("sati,i->sat", v4, anc_basis[:, b])
        for a in range(d_a):
            ops.append(math.sqrt(q[b]) * vb[:, a, :])
    channel = QuantumChannel(np.array(ops))
    residual = verify_gibbs_fixed_point(channel, h, beta)
    if residual > FIXED_POINT_TOL:
        raise ConstructionError(f"channel does not preserve the Gibbs state (residual {residual:.3e})")
    return channel


def verify_gibbs_fixed_point(channel: QuantumChannel, h, beta: float) -> float:
    """Max-norm residual ``|K[rho_B] - rho_B|`` with ``rho_B = gibbs(h, beta)``."""
    sigma = gibbs_state(h, beta)
    return max_norm(apply_channel(channel, sigma) - sigma)


@dataclass(frozen=True)
class DampingEvent:
    time: float
    hamiltonian: np.ndarray
    channel: QuantumChannel


@dataclass(frozen=True)
class DampingSchedule:
    """Ordered damping events; times strictly increasing."""

    events: tuple = ()

    def __post_init__(self):
        ev = tuple(self.events)
        times = [e.time for e in ev]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("event times must be strictly increasing", field="schedule")
        object.__setattr__(self, "events", ev)

    def __len__(self):
        return len(self.events)

    def validate(self, protocol: DrivingProtocol, beta: float) -> None:
        """Check event times, Hamiltonian consistency and Gibbs fixed points."""
        for n, e in enumerate(self.events):
            where = f"schedule.events[{n}]"
            if not 0.0 <= e.time <= protocol.duration:
                raise ValidationError(f"time {e.time} outside [0, {protocol.duration}]", field=where)
            if e.channel.dim != protocol.dim:
                raise ValidationError("channel dimension differs from protocol", field=where)
            mismatch = max_norm(e.hamiltonian - protocol.hamiltonian(e.time))
            if mismatch > SCHEDULE_TOL:
                raise ValidationError(
                    f"event Hamiltonian differs from the protocol at t={e.time} by {mismatch:.3e}",
                    field=where,
                )
            residual = verify_gibbs_fixed_point(e.channel, e.hamiltonian, beta)
            if residual > FIXED_POINT_TOL:
                raise ValidationError(f"channel is not Gibbs preserving (residual {residual:.3e})",
                                      field=where)

    @classmethod
    def from_protocol(cls, protocol: DrivingProtocol, times: Sequence[float], channels) -> "DampingSchedule":
        """Attach channels at ``times``, reading ``H_n`` off the protocol."""
        return cls(tuple(
            DampingEvent(float(t), protocol.hamiltonian(t), k) for t, k in zip(times, channels)
        ))


@dataclass(frozen=True)
class _Leg:
    u: np.ndarray
    h_start: np.ndarray
    h_end: np.ndarray
    channel: QuantumChannel | None  # applied at the end of the leg


def _legs(schedule: DampingSchedule, protocol: DrivingProtocol, steps: int) -> list[_Leg]:
    T = protocol.duration
    bounds = [0.0] + [e.time for e in schedule.events] + [T]
    hams = [protocol.initial_hamiltonian] + [e.hamiltonian for e in schedule.events] + [protocol.final_hamiltonian]
    channels = [e.channel for e in schedule.events] + [None]
    legs = []
    for k in range(len(bounds) - 1):
        a, b = bounds[k], bounds[k + 1]
        n = max(1, math.ceil(steps * (b - a) / T))
        legs.append(_Leg(propagator(protocol, n, a, b), hams[k], hams[k + 1], channels[k]))
    return legs


def _open_work(rho, legs: list[_Leg]) -> float:
    work = 0.0
    for leg in legs:
        before = float(np.trace(rho @ leg.h_start).real)
        rho = hermitize(leg.u @ rho @ dagger(leg.u))
        work += float(np.trace(rho @ leg.h_end).real) - before
        if leg.channel is not None:
            rho = apply_channel(leg.channel, rho)
    return work


def open_conditional_work(rho_i, schedule: DampingSchedule, protocol: DrivingProtocol, beta: float,
                          steps: int = DEFAULT_STEPS) -> float:
    """Average work of one initial state under driving interrupted by damping.

    ``sum_n tr[H_n rho^(n)-] - tr[H_(n-1) rho^(n-1)+]``, where ``-``/``+`` are
    the states right before/after the damping at ``t_n``.
    """
    schedule.validate(protocol, beta)
    if not schedule.events:
        u = propagator(protocol, steps)
        return conditional_work(rho_i, u, protocol.initial_hamiltonian, protocol.final_hamiltonian)
    return _open_work(np.asarray(rho_i, dtype=complex), _legs(schedule, protocol, steps))


def open_work_report(decomposition: Decomposition, schedule: DampingSchedule, protocol: DrivingProtocol,
                     beta: float, steps: int = DEFAULT_STEPS, metadata=None, check: bool = True):
    """Operational bound for the open-system protocol; same fields as the closed report."""
    schedule.validate(protocol, beta)
    h0, ht = protocol.initial_hamiltonian, protocol.final_hamiltonian
    meta = {"damping_events": len(schedule), **(metadata or {})}
    if not schedule.events:
        return work_report(decomposition, propagator(protocol, steps), h0, ht, beta, meta, check)
    check_reference(decomposition, h0, beta)
    legs = _legs(schedule, protocol, steps)
    works = [_open_work(rho, legs) for rho in decomposition.states]
    meta = {"pruned_mass": decomposition.pruned_mass, **meta}
    return assemble_report(decomposition.probabilities, works, beta, delta_F(h0, ht, beta), meta, check)


def quasistatic_schedule(protocol: DrivingProtocol, beta: float, n: int, lam: float = 1.0) -> DampingSchedule:
    """``n`` equally spaced thermalizations at ``t_k = k T / n``, ``k = 1..n``.

    With ``lam = 1`` each event resets to the instantaneous Gibbs state, so
    the protocol approaches the quasistatic limit as ``n`` grows.
    """
    if n < 1:
        raise ValidationError("need at least one event", field="n")
    times = [protocol.duration * k / n for k in range(1, n + 1)]
    channels = [mixture_reset_channel(protocol.hamiltonian(t), beta, lam) for t in times]
    return DampingSchedule.from_protocol(protocol, times, channels)
