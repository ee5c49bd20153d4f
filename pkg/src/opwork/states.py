"""Gibbs states, purifications, environment POVMs and the decompositions they induce."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RangeError, ValidationError
from .operators import (
    as_matrix,
    dagger,
    eig_hermitian,
    hermitian,
    hermitize,
    max_norm,
)

OVERFLOW_GUARD = 700.0
P_FLOOR = 1e-12


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def density_operator(rho, name: str = "rho", tol: float = 1e-12) -> np.ndarray:
    """Validate a density operator: Hermitian, eigenvalues >= -tol, unit trace."""
    rho = hermitian(rho, name, rtol=max(tol, 1e-12))
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise ValidationError(f"trace {tr!r} is not 1", field=name)
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -tol:
        raise ValidationError(f"negative eigenvalue {lo:.3e}", field=name)
    return rho


def check_unitary(u, name: str = "U", tol: float = 1e-10) -> np.ndarray:
    u = as_matrix(u, name)
    if u.shape[0] != u.shape[1]:
        raise ValidationError(f"expected square matrix, got {u.shape}", field=name)
    err = max_norm(dagger(u) @ u - np.eye(u.shape[0]))
    if err > tol:
        raise ValidationError(f"not unitary: max |U^dag U - I| = {err:.3e}", field=name)
    return u


def _shifted_spectrum(h, beta: float):
    if not np.isfinite(beta) or beta < 0:
        raise ValidationError(f"beta must be finite and >= 0, got {beta!r}", field="beta")
    vals, vecs = eig_hermitian(h)
    spread = float(vals[-1] - vals[0])
    if beta * spread > OVERFLOW_GUARD:
        raise RangeError(
            f"beta * spectral spread = {beta * spread:.1f} exceeds overflow guard {OVERFLOW_GUARD}"
        )
    return vals, vecs


def log_partition_function(h, beta: float) -> float:
    vals, _ = _shifted_spectrum(h, beta)
    lo = vals[0]
    return float(-beta * lo + np.log(np.sum(np.exp(-beta * (vals - lo)))))


def partition_function(h, beta: float) -> float:
    """``Z = tr exp(-beta h)``, evaluated with a ground-energy shift."""
    return float(np.exp(log_partition_function(h, beta)))


def gibbs_state(h, beta: float) -> np.ndarray:
    """Thermal state ``exp(-beta h) / Z`` built in the eigenbasis of ``h``."""
    vals, vecs = _shifted_spectrum(h, beta)
    w = np.exp(-beta * (vals - vals[0]))
    w /= w.sum()
    return hermitize((vecs * w) @ dagger(vecs))


def log_gibbs_state(h, beta: float) -> np.ndarray:
    """``ln rho = -beta h - ln Z``, exact even where ``rho`` is numerically singular."""
    h = hermitian(h, "H")
    return -beta * h - log_partition_function(h, beta) * np.eye(h.shape[0])


def von_neumann_entropy(rho) -> float:
    p = np.linalg.eigvalsh(hermitize(as_matrix(rho)))
    p = p[p > 1e-300]
    return float(-np.sum(p * np.log(p)))


def sqrtm_psd(rho) -> np.ndarray:
    vals, vecs = eig_hermitian(rho)
    return hermitize((vecs * np.sqrt(np.clip(vals, 0.0, None))) @ dagger(vecs))


@dataclass(frozen=True)
class Purification:
    """Pure joint state on system (x) environment, stored as a unit vector.

    Component ``joint_state[s * environment_dim + e]``.
    """

    system_dim: int
    environment_dim: int
    joint_state: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.joint_state, dtype=complex).reshape(-1)
        if v.size != self.system_dim * self.environment_dim:
            raise ValidationError("joint state length does not match dimensions", field="purification")
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise ValidationError("joint state is not normalized", field="purification")
        object.__setattr__(self, "joint_state", v)

    @property
    def amplitudes(self) -> np.ndarray:
        """``joint_state`` as a ``system_dim x environment_dim`` matrix."""
        return self.joint_state.reshape(self.system_dim, self.environment_dim)

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.joint_state, self.joint_state.conj())

    def reduced_state(self) -> np.ndarray:
        x = self.amplitudes
        return hermitize(x @ dagger(x))


def purify(rho) -> Purification:
    """Canonical minimal purification ``sum_j (sqrt(rho)|j>) (x) |j>``.

    In the eigenbasis this is ``sum_k sqrt(l_k) |v_k> (x) |conj(v_k)>``; it is
    independent of how degenerate eigenvectors are chosen.
    """
    rho = density_operator(rho)
    d = rho.shape[0]
    amp = sqrtm_psd(rho)
    vec = amp.reshape(-1)
    vec = vec / np.linalg.norm(vec)
    return Purification(d, d, vec)


@dataclass(frozen=True)
class POVM:
    """Positive operators ``elements[i]`` on the environment summing to identity."""

    elements: np.ndarray

    def __post_init__(self):
        el = np.asarray(self.elements, dtype=complex)
        if el.ndim != 3 or el.shape[1] != el.shape[2] or el.shape[0] < 1:
            raise ValidationError(f"POVM elements must have shape (m, d, d), got {el.shape}", field="povm")
        d = el.shape[1]
        for i, a in enumerate(el):
            a = hermitian(a, f"povm[{i}]", rtol=1e-10, atol=1e-12)
            if np.linalg.eigvalsh(a).min() < -1e-12:
                raise ValidationError("element is not positive semidefinite", field=f"povm[{i}]")
            el[i] = a
        err = max_norm(el.sum(axis=0) - np.eye(d))
        if err > 1e-10:
            raise ValidationError(f"elements do not sum to identity (error {err:.3e})", field="povm")
        el.setflags(write=False)
        object.__setattr__(self, "elements", el)

    @property
    def outcome_count(self) -> int:
        return self.elements.shape[0]

    @property
    def dim(self) -> int:
        return self.elements.shape[1]


@dataclass(frozen=True)
class Decomposition:
    """Ensemble ``{(p_i, rho_i)}`` mixing to ``reference``.

    ``pruned_mass`` records probability removed by outcome pruning before
    renormalization.
    """

    probabilities: np.ndarray
    states: np.ndarray
    reference: np.ndarray
    pruned_mass: float = 0.0
    mixture_tol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float).reshape(-1)
        s = np.asarray(self.states, dtype=complex)
        if s.ndim != 3 or s.shape[0] != p.size:
            raise ValidationError("need one state per probability", field="decomposition")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError(f"probabilities must be >= 0 and sum to 1 (sum {p.sum()!r})",
                                  field="decomposition")
        ref = np.asarray(self.reference, dtype=complex)
        err = max_norm(np.einsum("i,ijk->jk", p, s) - ref)
        if err > self.mixture_tol:
            raise ValidationError(f"mixture differs from reference by {err:.3e}", field="decomposition")
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "reference", ref)

    def __len__(self):
        return self.probabilities.size

    @property
    def dim(self) -> int:
        return self.reference.shape[0]

    def mixture(self) -> np.ndarray:
        return np.einsum("i,ijk->jk", self.probabilities, self.states)

    @property
    def pruned(self) -> bool:
        return self.pruned_mass > 0.0


def trivial_decomposition(rho) -> Decomposition:
    rho = density_operator(rho)
    return Decomposition(np.ones(1), rho[None], rho)


def eigen_decomposition(rho) -> Decomposition:
    """Spectral ensemble of ``rho``; zero-weight eigenvectors are dropped."""
    rho = density_operator(rho)
    vals, vecs = eig_hermitian(rho)
    vals = np.clip(vals, 0.0, None)
    keep = vals >= P_FLOOR
    pruned = float(vals[~keep].sum())
    p = vals[keep] / vals[keep].sum()
    states = np.array([np.outer(v, v.conj()) for v in vecs.T[keep]])
    return Decomposition(p, states, rho, pruned_mass=pruned)


def energy_decomposition(h, beta: float) -> Decomposition:
    """Gibbs ensemble in the eigenbasis of ``h`` with exact Boltzmann weights.

    Unlike :func:`eigen_decomposition` nothing is pruned: a level with
    weight ``1e-20`` can still dominate ``sum_i p_i exp(-beta w_i)``.
    Only weights that underflow to exactly zero are dropped.
    """
    vals, vecs = _shifted_spectrum(h, beta)
    w = np.exp(-beta * (vals - vals[0]))
    p = w / w.sum()
    keep = p > 0
    states = np.array([np.outer(v, v.conj()) for v in vecs.T[keep]])
    return Decomposition(p[keep] / p[keep].sum(), states, gibbs_state(h, beta))


def schmidt_povm(rho) -> POVM:
    """Projective environment measurement in the Schmidt basis of ``purify(rho)``.

    Applied to that purification it reproduces the eigendecomposition of ``rho``.
    """
    _, vecs = eig_hermitian(density_operator(rho))
    conj = vecs.conj()
    return POVM(np.array([np.outer(c, c.conj()) for c in conj.T]))


def decompose_via_povm(psi: Purification, povm: POVM, p_floor: float = P_FLOOR) -> Decomposition:
    """Conditional system states after measuring ``povm`` on the environment.

    ``p_i = <psi|1 (x) A_i|psi>`` and ``rho_i = tr_E[|psi><psi| (1 (x) A_i)] / p_i``.
    Outcomes below ``p_floor`` are dropped and the rest renormalized.
    """
    if povm.dim != psi.environment_dim:
        raise ValidationError(
            f"POVM acts on dimension {povm.dim}, environment has {psi.environment_dim}",
            field="povm",
        )
    x = psi.amplitudes
    # tr_E[|psi><psi| (1 (x) A)] = X A^T X^dag
    unnormalized = np.einsum("se,ife,tf->ist", x, povm.elements, x.conj())
    p = np.einsum("iss->i", unnormalized).real
    keep = p >= p_floor
    if not np.any(keep):
        raise ValidationError("every outcome has negligible probability", field="povm")
    pruned = float(np.clip(p[~keep], 0.0, None).sum())
    p_kept = p[keep]
    states = unnormalized[keep] / p_kept[:, None, None]
    states = 0.5 * (states + np.conj(np.swapaxes(states, 1, 2)))
    return Decomposition(p_kept / p_kept.sum(), states, psi.reduced_state(), pruned_mass=pruned)


def haar_unitary(dim: int, seed=None) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a complex Ginibre matrix."""
    rng = _rng(seed)
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_povm(d_e: int, m: int, seed=None, projective: bool = False) -> POVM:
    """Random ``m``-outcome POVM on ``C^d_e``.

    The general case compresses a Haar isometry ``V: C^d_e -> C^m (x) C^d_e``;
    ``A_i = V^dag (|i><i| (x) 1) V``. With ``projective=True`` (needs
    ``m <= d_e``) a Haar basis is split into ``m`` groups of orthogonal
    projectors; ``m == d_e`` gives rank-1 projectors.
    """
    if m < 1:
        raise ValidationError("need at least one outcome", field="m")
    if m == 1:
        return POVM(np.eye(d_e, dtype=complex)[None])
    rng = _rng(seed)
    if projective:
        if m > d_e:
            raise ValidationError(f"projective POVM needs m <= d_E ({m} > {d_e})", field="m")
        u = haar_unitary(d_e, rng)
        groups = np.array_split(np.arange(d_e), m)
        return POVM(np.array([u[:, g] @ dagger(u[:, g]) for g in groups]))
    w = haar_unitary(m * d_e, rng)
    v = w[:, :d_e].reshape(m, d_e, d_e)
    elements = np.einsum("iab,iac->ibc", v.conj(), v)
    return POVM(elements)
