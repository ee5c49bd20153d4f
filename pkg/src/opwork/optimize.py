"""Search over the experimenter's controls for the smallest operational bound.

The controls are the driving unitary (reached by varying the protocol) and
the environment POVM. Both are parametrized through Hermitian generators and
searched with Nelder-Mead from several starting points. Every evaluated
point is checked against the true free energy difference, so the search
doubles as a randomized test of the bound.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .driving import INEQUALITY_RTOL, delta_F, work_report
from .errors import InequalityViolation, ValidationError
from .operators import hermitian, unitary_exp
from .states import POVM, decompose_via_povm, gibbs_state, purify


def hermitian_from_params(theta, d: int) -> np.ndarray:
    """Hermitian ``d x d`` matrix from ``d^2`` reals.

    Layout: the ``d`` diagonal entries, then (re, im) pairs of the strict
    upper triangle in row-major order.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != d * d:
        raise ValidationError(f"expected {d * d} parameters, got {theta.size}", field="theta")
    g = np.diag(theta[:d]).astype(complex)
    iu = np.triu_indices(d, 1)
    pairs = theta[d:].reshape(-1, 2)
    g[iu] = pairs[:, 0] + 1j * pairs[:, 1]
    g[(iu[1], iu[0])] = pairs[:, 0] - 1j * pairs[:, 1]
    return g


def params_from_hermitian(g) -> np.ndarray:
    g = hermitian(g, "G")
    d = g.shape[0]
    iu = np.triu_indices(d, 1)
    upper = g[iu]
    return np.concatenate([g.diagonal().real, np.column_stack([upper.real, upper.imag]).reshape(-1)])


def _dim_from_length(n: int) -> int:
    d = int(round(np.sqrt(n)))
    if d * d != n or d < 1:
        raise ValidationError(f"parameter length {n} is not a perfect square", field="theta")
    return d


def unitary_from_params(theta) -> np.ndarray:
    """``exp(-i G(theta))`` for the generator of :func:`hermitian_from_params`."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    d = _dim_from_length(theta.size)
    return unitary_exp(hermitian_from_params(theta, d))


def povm_from_params(theta, d_e: int, m: int) -> POVM:
    """POVM ``A_i = V^dag (|i><i| (x) 1) V`` from a unitary dilation.

    ``W = unitary_from_params(theta)`` acts on ``C^m (x) C^d_e`` and
    ``V = W (|0> (x) 1)``.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    n = m * d_e
    if theta.size != n * n:
        raise ValidationError(f"expected {n * n} POVM parameters, got {theta.size}", field="theta")
    w = unitary_from_params(theta)
    v = w[:, :d_e].reshape(m, d_e, d_e)
    elements = np.einsum("iab,iac->ibc", v.conj(), v)
    return POVM(elements)


@dataclass(frozen=True)
class OptimizationConfig:
    restarts: int = 8
    max_iters: int = 4000
    initial_scale: float = 1.0
    simplex_step: float = 0.5
    tol: float = 1e-8
    xatol: float = 1e-6
    seed: int = 0
    povm_outcomes: int = 2
    polish_rounds: int = 4
    jobs: int = 1

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1 or self.povm_outcomes < 1 or self.jobs < 1:
            raise ValidationError("counts must be positive", field="optimize")
        if not self.tol > 0:
            raise ValidationError("tol must be positive", field="optimize.tol")


@dataclass
class OptimizationResult:
    delta_F_tilde: float
    unitary_params: np.ndarray
    povm_params: np.ndarray
    delta_F: float
    certificate_gap: float
    trace: list = field(default_factory=list)
    restart_values: list = field(default_factory=list)
    best_restart: int = 0
    evaluations: int = 0
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "delta_F_tilde": self.delta_F_tilde,
            "delta_F": self.delta_F,
            "certificate_gap": self.certificate_gap,
            "unitary_params": [float(x) for x in self.unitary_params],
            "povm_params": [float(x) for x in self.povm_params],
            "trace": [float(x) for x in self.trace],
            "restart_values": [float(x) for x in self.restart_values],
            "best_restart": self.best_restart,
            "evaluations": self.evaluations,
            "converged": self.converged,
        }


class _Objective:
    """``Delta F~`` as a function of the concatenated parameters, with a bound check."""

    def __init__(self, h0, ht, beta, m):
        self.h0 = hermitian(h0, "H0")
        self.ht = hermitian(ht, "HT")
        self.beta = beta
        self.d = self.h0.shape[0]
        self.m = m
        self.psi = purify(gibbs_state(self.h0, beta))
        self.delta_F = delta_F(self.h0, self.ht, beta)
        self.n_u = self.d * self.d
        self.n_povm = (m * self.d) ** 2
        self.best = np.inf
        self.trace = []

    @property
    def size(self) -> int:
        return self.n_u + self.n_povm

    def report(self, x):
        u = unitary_from_params(x[: self.n_u])
        povm = povm_from_params(x[self.n_u:], self.d, self.m)
        return work_report(decompose_via_povm(self.psi, povm), u, self.h0, self.ht, self.beta, check=False)

    def __call__(self, x) -> float:
        rep = self.report(x)
        value = rep.delta_F_tilde
        if value < self.delta_F - INEQUALITY_RTOL * rep.scale:
            raise InequalityViolation(
                f"Delta F~ = {value!r} below Delta F = {self.delta_F!r} at parameters {list(x)}"
            )
        self.best = min(self.best, value)
        self.trace.append(self.best)
        return value


def _nelder_mead(obj: _Objective, x0, cfg: OptimizationConfig):
    x = np.asarray(x0, dtype=float)
    budget = cfg.max_iters
    converged = False
    fx = obj(x)
    step = cfg.simplex_step
    for k in range(cfg.polish_rounds + 1):
        if budget <= 0:
            break
        # polish rounds restart a smaller simplex at the incumbent; the optimum is a manifold,
        # so a round that cannot improve is stopped by its budget rather than by xatol
        maxfev = budget if k == 0 else min(budget, 50 * x.size)
        simplex = np.vstack([x, x + step * np.eye(x.size)])
        res = minimize(obj, x, method="Nelder-Mead",
                       options={"maxfev": maxfev, "xatol": cfg.xatol, "fatol": cfg.tol,
                                "adaptive": True, "initial_simplex": simplex})
        budget -= res.nfev
        improved = fx - res.fun
        if res.fun <= fx:
            x, fx = res.x, res.fun
        if k > 0 and improved <= cfg.tol:
            converged = True
            break
        step = step / 4
    return x, fx, converged


def _run_restart(args):
    h0, ht, beta, cfg, index, x0 = args
    obj = _Objective(h0, ht, beta, cfg.povm_outcomes)
    x, fx, converged = _nelder_mead(obj, x0, cfg)
    return index, x, fx, converged, obj.trace


def minimize_bound(h0, ht, beta: float, config: OptimizationConfig | None = None, initial=None) -> OptimizationResult:
    """Minimize the operational bound over unitaries and environment POVMs.

    Restart 0 starts from ``initial`` (default: all zeros, i.e. identity
    driving and the trivial measurement); the others from Gaussian points
    seeded by ``config.seed``. Raises :class:`InequalityViolation` if any
    evaluation undercuts ``Delta F``.
    """
    cfg = config or OptimizationConfig()
    probe = _Objective(h0, ht, beta, cfg.povm_outcomes)
    n = probe.size
    rng = np.random.default_rng(cfg.seed)
    starts = [np.zeros(n) if initial is None else np.asarray(initial, dtype=float).reshape(n)]
    starts += [cfg.initial_scale * rng.normal(size=n) for _ in range(cfg.restarts - 1)]
    tasks = [(probe.h0, probe.ht, beta, cfg, k, x0) for k, x0 in enumerate(starts)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_restart, tasks))
    else:
        results = [_run_restart(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    best = min(results, key=lambda r: (r[2], r[0]))
    trace = []
    running = np.inf
    for r in results:
        for v in r[4]:
            running = min(running, v)
            trace.append(running)
    value = float(best[2])
    return OptimizationResult(
        delta_F_tilde=value,
        unitary_params=best[1][: probe.n_u],
        povm_params=best[1][probe.n_u:],
        delta_F=probe.delta_F,
        certificate_gap=value - probe.delta_F,
        trace=trace,
        restart_values=[float(r[2]) for r in results],
        best_restart=int(best[0]),
        evaluations=len(trace),
        converged=bool(best[3]),
    )


def saturating_params(h0, m: int | None = None) -> np.ndarray:
    """Parameters of the quasiclassical point for ``U = 1``.

    The POVM dilation permutes ``|0, e> <-> |e, 0>`` so that, applied to the
    canonical purification of a Gibbs state of ``h0``, it measures in the
    Schmidt (energy) basis. Only valid when ``h0`` is diagonal and
    ``m = dim``.
    """
    h0 = hermitian(h0, "H0")
    d = h0.shape[0]
    m = d if m is None else m
    if m != d:
        raise ValidationError("the saturating POVM needs m equal to the system dimension", field="m")
    n = m * d
    perm = np.zeros((n, n))
    for i in range(m):
        for e in range(d):
            # |i, e> -> |e, i>
            perm[e * d + i, i * d + e] = 1.0
    # perm is a symmetric involution: perm = exp(-i pi P_minus), P_minus = (1 - perm)/2
    g = np.pi * (np.eye(n) - perm) / 2.0
    return np.concatenate([np.zeros(d * d), params_from_hermitian(g)])


def report_at(h0, ht, beta: float, result: OptimizationResult, povm_outcomes: int):
    """Work report at the optimizer's best point."""
    obj = _Objective(h0, ht, beta, povm_outcomes)
    return obj.report(np.concatenate([result.unitary_params, result.povm_params]))
