"""Stroboscopic meter: implements an effective Hamiltonian on the system and reads out work.

Each step prepares the meter in ``M_n = |mu_n><mu_n|``, lets system and meter
interact for ``dt`` under ``H_SM``, then measures ``Omega_n = -i[dM_n, M_n]``
on the meter. The joint step is simulated exactly (full matrix exponential),
so the first-order statements about this scheme become convergence checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .driving import time_ordered_exponential, work_operator
from .errors import ValidationError
from .operators import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    dagger,
    eig_hermitian,
    hermitian,
    hermitize,
    kron,
    partial_trace,
    unitary_exp,
)
from .states import _rng, density_operator, gibbs_state

NORM_TOL = 1e-12
FD_DIVISOR = 16


@dataclass(frozen=True)
class MeterProtocol:
    """Path ``t -> |mu_t>`` of meter states on ``[0, duration]``, run in ``steps`` steps.

    ``derivative`` (optional) returns ``d|mu_t>/dt``; without it the projector
    derivative falls back to finite differences.
    """

    meter_dim: int
    state: Callable[[float], np.ndarray]
    duration: float
    steps: int
    derivative: Optional[Callable[[float], np.ndarray]] = None
    descriptor: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.steps < 1:
            raise ValidationError("steps must be >= 1", field="meter.steps")
        if self.duration <= 0:
            raise ValidationError("duration must be positive", field="meter.duration")

    @property
    def dt(self) -> float:
        return self.duration / self.steps

    def mu(self, t: float) -> np.ndarray:
        v = np.asarray(self.state(t), dtype=complex).reshape(-1)
        if v.size != self.meter_dim:
            raise ValidationError(f"meter state has length {v.size}, expected {self.meter_dim}",
                                  field="meter.state")
        if abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
            raise ValidationError(f"meter state at t={t} is not normalized", field="meter.state")
        return v

    def with_steps(self, steps: int) -> "MeterProtocol":
        return replace(self, steps=int(steps))

    @classmethod
    def rotation(cls, omega: float, duration: float = 1.0, steps: int = 100, meter_dim: int = 2,
                 axis: tuple[int, int] = (0, 1)) -> "MeterProtocol":
        """``cos(omega t)|a> + sin(omega t)|b>`` for ``axis = (a, b)``."""
        a, b = axis
        ea, eb = np.eye(meter_dim)[a], np.eye(meter_dim)[b]

        def state(t):
            return math.cos(omega * t) * ea + math.sin(omega * t) * eb

        def derivative(t):
            return omega * (-math.sin(omega * t) * ea + math.cos(omega * t) * eb)

        desc = {"type": "rotation", "omega": omega, "axis": [a, b]}
        return cls(meter_dim, state, duration, steps, derivative, desc)

    @classmethod
    def constant(cls, mu, duration: float = 1.0, steps: int = 100) -> "MeterProtocol":
        mu = np.asarray(mu, dtype=complex)
        mu = mu / np.linalg.norm(mu)
        zero = np.zeros_like(mu)
        return cls(mu.size, lambda t: mu, duration, steps, lambda t: zero, {"type": "constant"})

    @classmethod
    def sampled(cls, times: Sequence[float], states: Sequence, steps: int = 100) -> "MeterProtocol":
        """Piecewise-linear interpolation of sampled states, renormalized.

        Samples are phase-aligned to their predecessor first so that the
        interpolation never passes through a cancellation.
        """
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
            raise ValidationError("need >= 2 strictly increasing sample times", field="meter.times")
        if abs(times[0]) > 1e-12:
            raise ValidationError("sample times must start at 0", field="meter.times")
        vs = [np.asarray(s, dtype=complex) / np.linalg.norm(s) for s in states]
        if len(vs) != times.size:
            raise ValidationError("one state per sample time", field="meter.states")
        for k in range(1, len(vs)):
            ov = np.vdot(vs[k - 1], vs[k])
            if abs(ov) > 0:
                vs[k] = vs[k] * (abs(ov) / ov).conjugate()
        arr = np.array(vs)

        def state(t):
            x = float(np.clip(t, times[0], times[-1]))
            k = min(int(np.searchsorted(times, x, side="right")) - 1, times.size - 2)
            f = (x - times[k]) / (times[k + 1] - times[k])
            v = (1 - f) * arr[k] + f * arr[k + 1]
            return v / np.linalg.norm(v)

        return cls(arr.shape[1], state, float(times[-1]), steps, None, {"type": "sampled"})


@dataclass(frozen=True)
class JointHamiltonian:
    """``H_SM`` on system (x) meter, system factor first."""

    system_dim: int
    meter_dim: int
    matrix: np.ndarray

    def __post_init__(self):
        m = hermitian(self.matrix, "H_SM")
        n = self.system_dim * self.meter_dim
        if m.shape != (n, n):
            raise ValidationError(f"H_SM must be {n}x{n}, got {m.shape}", field="H_SM")
        object.__setattr__(self, "matrix", m)


class ProjectorPair(tuple):
    """``(M_n, dM_n)`` plus a flag telling whether a one-sided difference was used."""

    def __new__(cls, projector, derivative, one_sided=False):
        obj = super().__new__(cls, (projector, derivative))
        obj.one_sided = one_sided
        return obj


def _projector(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


def projector_and_derivative(mp: MeterProtocol, n: int, dt: float | None = None) -> ProjectorPair:
    """``M_n = |mu><mu|`` at ``t = n dt`` and its time derivative."""
    if not 0 <= n <= mp.steps:
        raise ValidationError(f"step {n} outside [0, {mp.steps}]", field="n")
    dt = mp.dt if dt is None else dt
    t = n * dt
    mu = mp.mu(t)
    proj = _projector(mu)
    if mp.derivative is not None:
        dmu = np.asarray(mp.derivative(t), dtype=complex)
        return ProjectorPair(proj, np.outer(dmu, mu.conj()) + np.outer(mu, dmu.conj()))
    h = dt / FD_DIVISOR
    if t - h >= 0.0 and t + h <= mp.duration:
        d = (_projector(mp.mu(t + h)) - _projector(mp.mu(t - h))) / (2 * h)
        return ProjectorPair(proj, hermitize(d))
    if t + h <= mp.duration:
        return ProjectorPair(proj, hermitize((_projector(mp.mu(t + h)) - proj) / h), one_sided=True)
    return ProjectorPair(proj, hermitize((proj - _projector(mp.mu(t - h))) / h), one_sided=True)


def effective_hamiltonian(joint: JointHamiltonian, mu) -> np.ndarray:
    """``<mu| H_SM |mu>`` contracted over the meter factor."""
    mu = np.asarray(mu, dtype=complex).reshape(-1)
    if mu.size != joint.meter_dim:
        raise ValidationError(f"meter state has length {mu.size}, expected {joint.meter_dim}",
                              field="mu")
    d, m = joint.system_dim, joint.meter_dim
    h4 = joint.matrix.reshape(d, m, d, m)
    return hermitize(np.einsum("a,satb,b->st", mu.conj(), h4, mu))


def work_observable(mp: MeterProtocol, n: int, dt: float | None = None) -> np.ndarray:
    """``Omega_n = -i [dM_n, M_n]``."""
    proj, deriv = projector_and_derivative(mp, n, dt)
    return hermitize(-1j * (deriv @ proj - proj @ deriv))


@dataclass
class MeterRunRecord:
    """Outcome of one stroboscopic run.

    ``omega_expectations[n]`` is ``tr[Omega_n chi_n]``; ``step_variances`` are
    the Born variances of the same observables, whose sum is the variance of
    the total single-shot estimator.
    """

    steps: int
    dt: float
    omega_expectations: np.ndarray
    step_variances: np.ndarray
    system_states: np.ndarray
    meter_states: np.ndarray
    total_work: float
    reference_work: float
    estimator_variance: float
    sample_mean: float | None = None
    sample_variance: float | None = None
    shots: int | None = None
    seed: int | None = None

    @property
    def error(self) -> float:
        return self.total_work - self.reference_work

    def to_dict(self) -> dict:
        d = {
            "steps": self.steps,
            "dt": self.dt,
            "omega_expectations": [float(x) for x in self.omega_expectations],
            "total_work": self.total_work,
            "reference_work": self.reference_work,
            "error": self.error,
            "estimator_variance": self.estimator_variance,
        }
        if self.shots is not None:
            d.update(sample_mean=self.sample_mean, sample_variance=self.sample_variance,
                     shots=self.shots, seed=self.seed)
        return d


def effective_propagator(joint: JointHamiltonian, mp: MeterProtocol, steps: int | None = None) -> np.ndarray:
    """Unitary generated by ``H_mu(t) = <mu_t|H_SM|mu_t>`` over the whole protocol."""
    steps = steps or max(4096, 32 * mp.steps)
    return time_ordered_exponential(lambda t: effective_hamiltonian(joint, mp.mu(t)), 0.0, mp.duration, steps)


def reference_work(rho0, joint: JointHamiltonian, mp: MeterProtocol, steps: int | None = None) -> float:
    """``tr[rho0 (U^dag H_T U - H_0)]`` for the effective Hamiltonian path."""
    u = effective_propagator(joint, mp, steps)
    h0 = effective_hamiltonian(joint, mp.mu(0.0))
    ht = effective_hamiltonian(joint, mp.mu(mp.duration))
    return float(np.trace(np.asarray(rho0) @ work_operator(u, h0, ht)).real)


def stroboscopic_run(rho0, joint: JointHamiltonian, mp: MeterProtocol,
                     reference_steps: int | None = None) -> MeterRunRecord:
    """Exact joint evolution of the prepare-interact-measure cycle."""
    rho = density_operator(rho0, tol=1e-10)
    d, m = joint.system_dim, joint.meter_dim
    if rho.shape[0] != d or mp.meter_dim != m:
        raise ValidationError("system or meter dimension does not match H_SM", field="meter")
    dt = mp.dt
    x = unitary_exp(joint.matrix, dt)
    xd = dagger(x)
    n_steps = mp.steps
    means = np.empty(n_steps)
    variances = np.empty(n_steps)
    states = np.empty((n_steps + 1, d, d), dtype=complex)
    chis = np.empty((n_steps, m, m), dtype=complex)
    states[0] = rho
    for n in range(n_steps):
        proj, deriv = projector_and_derivative(mp, n, dt)
        omega = hermitize(-1j * (deriv @ proj - proj @ deriv))
        joint_state = x @ kron(rho, proj) @ xd
        chi = hermitize(partial_trace(joint_state, "environment", (d, m)))
        rho = hermitize(partial_trace(joint_state, "system", (d, m)))
        mean = float(np.trace(omega @ chi).real)
        means[n] = mean
        variances[n] = max(float(np.trace(omega @ omega @ chi).real) - mean ** 2, 0.0)
        states[n + 1] = rho
        chis[n] = chi
    ref = reference_work(states[0], joint, mp, reference_steps)
    return MeterRunRecord(
        steps=n_steps,
        dt=dt,
        omega_expectations=means,
        step_variances=variances,
        system_states=states,
        meter_states=chis,
        total_work=float(means.sum()),
        reference_work=ref,
        estimator_variance=float(variances.sum()),
    )


def sample_run(rho0, joint: JointHamiltonian, mp: MeterProtocol, shots: int, seed=None,
               record: MeterRunRecord | None = None) -> MeterRunRecord:
    """Monte Carlo readout of the meter.

    Each step's outcome is drawn from the Born distribution of ``Omega_n`` in
    the post-interaction meter state of the unconditional run; the system is
    not conditioned on the outcome. Summing a shot's outcomes gives an
    unbiased single-shot estimate of ``sum_n <Omega_n>``.
    """
    if shots < 1:
        raise ValidationError("shots must be >= 1", field="shots")
    rec = record if record is not None else stroboscopic_run(rho0, joint, mp)
    rng = _rng(seed)
    totals = np.zeros(shots)
    for n in range(rec.steps):
        vals, vecs = eig_hermitian(work_observable(mp, n))
        probs = np.einsum("ak,ab,bk->k", vecs.conj(), rec.meter_states[n], vecs).real
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum()
        totals += vals[rng.choice(vals.size, size=shots, p=probs)]
    return replace(
        rec,
        sample_mean=float(totals.mean()),
        sample_variance=float(totals.var(ddof=1)) if shots > 1 else 0.0,
        shots=int(shots),
        seed=seed if isinstance(seed, (int, type(None))) else None,
    )


@dataclass(frozen=True)
class ScanRow:
    steps: int
    dt: float
    error: float
    variance: float
    predicted_variance: float

    def to_dict(self) -> dict:
        return {"steps": self.steps, "dt": self.dt, "error": self.error,
                "variance": self.variance, "predicted_variance": self.predicted_variance}


def convergence_scan(rho0, joint: JointHamiltonian, mp: MeterProtocol, step_counts: Sequence[int],
                     shots: int = 4000, seed=0) -> list[ScanRow]:
    """Error of the summed work and sampled total variance for each step count."""
    if len(step_counts) == 0:
        raise ValidationError("need at least one step count", field="N_list")
    seeds = np.random.SeedSequence(seed).spawn(len(step_counts))
    rows = []
    for n, ss in zip(step_counts, seeds):
        p = mp.with_steps(n)
        rec = stroboscopic_run(rho0, joint, p)
        sampled = sample_run(rho0, joint, p, shots, np.random.default_rng(ss), record=rec)
        rows.append(ScanRow(int(n), p.dt, abs(rec.error), sampled.sample_variance, rec.estimator_variance))
    return rows


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def standard_scenario(steps: int = 100, beta: float = 1.0):
    """Qubit system, qubit meter rotated from ``|0>`` to ``|1>`` in unit time.

    ``H_SM = sz (x) |0><0| + sx (x) |1><1| + 0.5 sy (x) sx``, so the effective
    Hamiltonian moves from ``sz`` to ``sx`` through a ``sy`` admixture. The
    system starts in the Gibbs state of ``sz``.
    """
    p0 = np.diag([1.0, 0.0])
    p1 = np.diag([0.0, 1.0])
    h_sm = kron(SIGMA_Z, p0) + kron(SIGMA_X, p1) + 0.5 * kron(SIGMA_Y, SIGMA_X)
    joint = JointHamiltonian(2, 2, h_sm)
    mp = MeterProtocol.rotation(math.pi / 2, duration=1.0, steps=steps)
    return gibbs_state(SIGMA_Z, beta), joint, mp
