"""Randomized verification suites.

Each suite draws independent probes from ``default_rng([seed, index])`` so a
probe's inputs depend only on its index, not on how the work was chunked
across processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .driving import DrivingProtocol, delta_F, tpm_estimator, work_report
from .errors import InequalityViolation
from .inequalities import (
    concavity_probe,
    dilate,
    lgt_gap,
    lifted_work_identity_check,
    log_ratio_sum,
    peierls_bogoliubov_gap,
    stinespring,
)
from .openthermo import (
    DampingSchedule,
    apply_channel,
    dephasing_channel,
    energy_conserving_unitary,
    mixture_reset_channel,
    open_work_report,
    partial_swap,
    thermal_attach_channel,
)
from .operators import (
    dagger,
    eig_hermitian,
    kron,
    max_norm,
    partial_trace,
    random_hermitian,
)
from .states import (
    decompose_via_povm,
    energy_decomposition,
    gibbs_state,
    haar_unitary,
    purify,
    random_povm,
)

DEFAULT_RTOL = 1e-9


@dataclass
class SuiteResult:
    name: str
    probes: int = 0
    violations: int = 0
    worst: float = math.inf  # smallest normalized margin seen; negative beyond -tol is a violation
    failures: list = field(default_factory=list)

    def merge(self, other: "SuiteResult") -> "SuiteResult":
        return SuiteResult(self.name, self.probes + other.probes, self.violations + other.violations,
                           min(self.worst, other.worst), (self.failures + other.failures)[:10])

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.probes > 0

    def to_dict(self) -> dict:
        return {"suite": self.name, "probes": self.probes, "violations": self.violations,
                "worst_margin": self.worst, "failures": list(self.failures)}


def _dim(rng, dim):
    return int(dim) if dim else int(rng.integers(2, 5))


def random_closed_scenario(rng: np.random.Generator, dim=None, max_outcomes: int = 6):
    """Random Hamiltonians, inverse temperature, Haar unitary and POVM decomposition."""
    d = _dim(rng, dim)
    h0 = random_hermitian(d, rng)
    ht = random_hermitian(d, rng)
    beta = float(rng.uniform(0.1, 5.0))
    u = haar_unitary(d, rng)
    m = int(rng.integers(1, max_outcomes + 1))
    D = decompose_via_povm(purify(gibbs_state(h0, beta)), random_povm(d, m, rng))
    return h0, ht, beta, u, D


def _closed_probe(k, seed, dim, rtol):
    rng = np.random.default_rng([seed, k])
    h0, ht, beta, u, D = random_closed_scenario(rng, dim)
    rep = work_report(D, u, h0, ht, beta, {"seed": seed, "probe": k}, check=False)
    return rep, (h0, ht, beta, u, D)


def _record(res: SuiteResult, margin: float, ok: bool, info):
    res.probes += 1
    res.worst = min(res.worst, margin)
    if not ok:
        res.violations += 1
        if len(res.failures) < 10:
            res.failures.append(info)


def suite_main_inequality(seed, indices, dim=None, rtol=DEFAULT_RTOL) -> SuiteResult:
    """Estimator never exceeds ``exp(-beta Delta F)`` (relative slack ``rtol``)."""
    res = SuiteResult("main_inequality")
    for k in indices:
        rep, _ = _closed_probe(k, seed, dim, rtol)
        # relative margin of exp(-beta dF) - estimator, evaluated in the log domain
        margin = -math.expm1(rep.log_estimator + rep.beta * rep.delta_F)
        _record(res, margin, margin >= -rtol, {"probe": k})
    return res


def suite_bound_chain(seed, indices, dim=None, rtol=DEFAULT_RTOL) -> SuiteResult:
    """``W_avg >= Delta F~ >= Delta F`` with tolerance ``rtol * max(1, |W_avg|)``."""
    res = SuiteResult("bound_chain")
    for k in indices:
        rep, _ = _closed_probe(k, seed, dim, rtol)
        margin = min(rep.gap_jensen, rep.gap_quantum) / rep.scale
        _record(res, margin, margin >= -rtol, {"probe": k})
    return res


def suite_tpm_identity(seed, indices, dim=None, rtol=1e-10) -> SuiteResult:
    """Two-point-measurement estimator equals ``exp(-beta Delta F)`` to relative ``rtol``."""
    res = SuiteResult("tpm_identity")
    for k in indices:
        _, (h0, ht, beta, u, _) = _closed_probe(k, seed, dim, rtol)
        target = math.exp(-beta * delta_F(h0, ht, beta))
        rel = abs(tpm_estimator(h0, ht, u, beta) - target) / target
        _record(res, -rel, rel <= rtol, {"probe": k, "relative_error": rel})
    return res


def suite_log_ratio(seed, indices, dim=None, rtol=1e-10) -> SuiteResult:
    """Log-ratio form of the inequality agrees with the work report's estimator."""
    res = SuiteResult("log_ratio_cross_check")
    for k in indices:
        rep, (h0, ht, beta, u, D) = _closed_probe(k, seed, dim, rtol)
        lhs = log_ratio_sum(D, u, h0, ht, beta)
        ratio = math.exp(rep.log_estimator + beta * rep.delta_F)
        err = abs(lhs - ratio) / max(1.0, ratio)
        _record(res, -err, err <= rtol and lhs <= 1 + DEFAULT_RTOL, {"probe": k, "error": err})
    return res


def saturating_scenario(rng: np.random.Generator, dim=None):
    """Eigenbasis decomposition with ``U^dag H_T U`` diagonal in the eigenbasis of ``H_0``."""
    d = _dim(rng, dim)
    h0 = random_hermitian(d, rng)
    beta = float(rng.uniform(0.1, 5.0))
    _, v0 = eig_hermitian(h0)
    diag = rng.normal(size=d) * 2.0
    u = haar_unitary(d, rng)
    # U^dag H_T U = V0 diag V0^dag  =>  H_T = U V0 diag V0^dag U^dag
    ht = u @ (v0 * diag) @ dagger(v0) @ dagger(u)
    ht = 0.5 * (ht + dagger(ht))
    return h0, ht, beta, u, energy_decomposition(h0, beta)


def suite_saturation(seed, indices, dim=None, rtol=1e-10) -> SuiteResult:
    res = SuiteResult("saturation")
    for k in indices:
        rng = np.random.default_rng([seed, k])
        h0, ht, beta, u, D = saturating_scenario(rng, dim)
        rep = work_report(D, u, h0, ht, beta, check=False)
        err = abs(rep.delta_F_tilde - rep.delta_F) / rep.scale
        _record(res, -err, err <= rtol, {"probe": k, "error": err})
    return res


def random_gibbs_preserving_channel(h, beta, rng: np.random.Generator):
    """One of four Gibbs-preserving families, chosen at random."""
    d = h.shape[0]
    kind = int(rng.integers(0, 4))
    if kind == 0:
        return mixture_reset_channel(h, beta, float(rng.uniform(0, 1)))
    if kind == 1:
        return thermal_attach_channel(h, beta, partial_swap(d, float(rng.uniform(0, math.pi))))
    if kind == 2:
        h_tot = kron(h, np.eye(d)) + kron(np.eye(d), h)
        return thermal_attach_channel(h, beta, energy_conserving_unitary(h_tot, rng))
    _, vecs = eig_hermitian(h)
    return dephasing_channel(vecs, float(rng.uniform(0, 1)))


def random_open_scenario(rng: np.random.Generator, dim=None, max_events: int = 3, steps: int = 16):
    d = _dim(rng, dim)
    h_a, h_b = random_hermitian(d, rng), random_hermitian(d, rng)
    beta = float(rng.uniform(0.1, 5.0))
    protocol = DrivingProtocol.linear(h_a, h_b, duration=1.0)
    n_events = int(rng.integers(1, max_events + 1))
    times = np.sort(rng.uniform(0.05, 0.95, size=n_events))
    channels = [random_gibbs_preserving_channel(protocol.hamiltonian(t), beta, rng) for t in times]
    schedule = DampingSchedule.from_protocol(protocol, times, channels)
    m = int(rng.integers(1, 7))
    D = decompose_via_povm(purify(gibbs_state(h_a, beta)), random_povm(d, m, rng))
    return protocol, schedule, beta, D, steps


def suite_open_inequality(seed, indices, dim=None, rtol=DEFAULT_RTOL) -> SuiteResult:
    res = SuiteResult("open_inequality")
    for k in indices:
        rng = np.random.default_rng([seed, k])
        protocol, schedule, beta, D, steps = random_open_scenario(rng, dim)
        rep = open_work_report(D, schedule, protocol, beta, steps=steps, check=False)
        margin = -math.expm1(rep.log_estimator + rep.beta * rep.delta_F)
        chain = min(rep.gap_jensen, rep.gap_quantum) / rep.scale
        _record(res, min(margin, chain), margin >= -rtol and chain >= -rtol, {"probe": k})
    return res


def random_positive(d, rng: np.random.Generator):
    g = rng.normal(size=(d, 2 * d)) + 1j * rng.normal(size=(d, 2 * d))
    a = g @ dagger(g) / (2 * d)
    return 0.5 * (a + dagger(a))


def suite_peierls_bogoliubov(seed, indices, dim=None, rtol=DEFAULT_RTOL) -> SuiteResult:
    res = SuiteResult("peierls_bogoliubov")
    for k in indices:
        rng = np.random.default_rng([seed, k])
        d = _dim(rng, dim)
        p = peierls_bogoliubov_gap(random_hermitian(d, rng), random_hermitian(d, rng))
        _record(res, p.gap / p.scale, p.holds(rtol), {"probe": k})
    return res


def suite_lieb_concavity(seed, indices, dim=None, rtol=DEFAULT_RTOL) -> SuiteResult:
    res = SuiteResult("lieb_concavity")
    for k in indices:
        rng = np.random.default_rng([seed, k])
        d = _dim(rng, dim)
        p = concavity_probe(random_positive(d, rng), random_positive(d, rng), float(rng.uniform()),
                            random_hermitian(d, rng))
        _record(res, p.gap / p.scale, p.holds(rtol), {"probe": k})
    return res


def suite_lgt(seed, indices, dim=None, rtol=DEFAULT_RTOL) -> SuiteResult:
    res = SuiteResult("lieb_golden_thompson")
    for k in indices:
        rng = np.random.default_rng([seed, k])
        d = _dim(rng, dim)
        p = lgt_gap(random_positive(d, rng), random_positive(d, rng), random_positive(d, rng))
        _record(res, p.gap / p.scale, p.holds(rtol), {"probe": k})
    return res


def random_density(d, rng: np.random.Generator):
    a = random_positive(d, rng)
    return a / np.trace(a).real


def suite_stinespring(seed, indices, dim=None, rtol=1e-9) -> SuiteResult:
    """Dilation of a random Gibbs-preserving channel reproduces it on a random state."""
    res = SuiteResult("stinespring_roundtrip")
    for k in indices:
        rng = np.random.default_rng([seed, k])
        d = _dim(rng, dim)
        h = random_hermitian(d, rng)
        beta = float(rng.uniform(0.1, 5.0))
        channel = random_gibbs_preserving_channel(h, beta, rng)
        u, eps = stinespring(channel)
        rho = random_density(d, rng)
        err = max_norm(partial_trace(dilate(u, eps, rho), "system", (d, eps.shape[0])) - apply_channel(channel, rho))
        _record(res, -err, err <= rtol, {"probe": k, "error": err})
    return res


def suite_lifted_identities(seed, indices, dim=None, rtol=1e-8) -> SuiteResult:
    res = SuiteResult("lifted_identities")
    for k in indices:
        rng = np.random.default_rng([seed, k])
        d = _dim(rng, dim)
        h_a, h_b, h_c = (random_hermitian(d, rng) for _ in range(3))
        beta = float(rng.uniform(0.1, 2.0))
        channel = random_gibbs_preserving_channel(h_b, beta, rng)
        r = lifted_work_identity_check(random_density(d, rng), channel, h_a, h_b, h_c, beta)
        _record(res, -r.max(), r.max() <= rtol, {"probe": k, "residual": r.max()})
    return res


SUITES = {
    "main_inequality": suite_main_inequality,
    "bound_chain": suite_bound_chain,
    "tpm_identity": suite_tpm_identity,
    "log_ratio_cross_check": suite_log_ratio,
    "saturation": suite_saturation,
    "open_inequality": suite_open_inequality,
    "peierls_bogoliubov": suite_peierls_bogoliubov,
    "lieb_concavity": suite_lieb_concavity,
    "lieb_golden_thompson": suite_lgt,
    "stinespring_roundtrip": suite_stinespring,
    "lifted_identities": suite_lifted_identities,
}


def _run_chunk(args):
    name, seed, indices, dim, rtol = args
    fn = SUITES[name]
    return fn(seed, indices, dim) if rtol is None else fn(seed, indices, dim, rtol)


def run_suite(name: str, probes: int, seed: int = 0, dim=None, rtol=None, jobs: int = 1) -> SuiteResult:
    """Run ``probes`` probes of a named suite, optionally across ``jobs`` processes."""
    indices = list(range(probes))
    if jobs <= 1 or probes < 2 * jobs:
        return _run_chunk((name, seed, indices, dim, rtol))
    chunks = [indices[i::jobs] for i in range(jobs)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_run_chunk, [(name, seed, c, dim, rtol) for c in chunks]))
    out = SuiteResult(name)
    for p in parts:
        out = out.merge(p)
    return out


def run_all(probes: int, seed: int = 0, dim=None, rtol=None, jobs: int = 1, names=None) -> list[SuiteResult]:
    names = list(names or SUITES)
    results = []
    for name in names:
        # the saturation suite is a constructed family; 100 probes cover it
        n = min(probes, 100) if name == "saturation" else probes
        results.append(run_suite(name, n, seed, dim, rtol, jobs))
    return results


def raise_on_violation(results) -> None:
    bad = [r for r in results if r.violations]
    if bad:
        raise InequalityViolation(", ".join(f"{r.name}: {r.violations}" for r in bad))
