"""Dense complex-matrix calculus for small Hermitian operators.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``. The
functions here never mutate their inputs.
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Union

import numpy as np

from .errors import DomainError, ValidationError

HERMITICITY_RTOL = 1e-12
POS_DEF_FLOOR = 1e-14
# relative eigenvalue spread below which eigenvectors are treated as one degenerate block
DEGENERACY_RTOL = 1e-12


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D complex array."""
    m = np.array(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {m.shape}", field=name)
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries", field=name)
    return m


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def max_norm(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def hermiticity_error(m: np.ndarray) -> float:
    return max_norm(m - dagger(m))


def is_hermitian(m, rtol: float = HERMITICITY_RTOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return hermiticity_error(m) <= rtol * max(max_norm(m), np.finfo(float).tiny)


def hermitian(m, name: str = "matrix", rtol: float = HERMITICITY_RTOL, atol: float = 0.0) -> np.ndarray:
    """Validate that ``m`` is Hermitian and return its exactly-Hermitian part."""
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}", field=name)
    err = hermiticity_error(m)
    scale = max_norm(m)
    if err > rtol * scale + atol:
        raise ValidationError(
            f"not Hermitian: max |M - M^dag| = {err:.3e} exceeds {rtol:.1e} x {scale:.3e}",
            field=name,
        )
    return 0.5 * (m + dagger(m))


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + dagger(m))


class EigenSystem(NamedTuple):
    """Ascending eigenvalues and the unitary matrix of eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ dagger(v)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    # largest-modulus component (first on ties) made real positive
    k = int(np.argmax(np.abs(v) - 1e-12 * np.arange(v.size)))
    a = v[k]
    return v * (np.abs(a) / a) if a != 0 else v


def _canonical_block(vectors: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis for the span of ``vectors``.

    Gram-Schmidt on the projections of the standard basis vectors, taken in
    index order, so any basis of the same subspace yields the same output.
    """
    dim, k = vectors.shape
    proj = vectors @ dagger(vectors)
    out = []
    for j in range(dim):
        w = proj[:, j].copy()
        for u in out:
            w -= (np.vdot(u, w)) * u
        # second pass for numerical orthogonality
        for u in out:
            w -= (np.vdot(u, w)) * u
        norm = np.linalg.norm(w)
        if norm > 1e-6:
            out.append(w / norm)
        if len(out) == k:
            break
    return np.column_stack(out)


def eig_hermitian(m) -> EigenSystem:
    """Eigendecomposition with a canonical, reproducible eigenvector choice.

    Non-degenerate eigenvectors are phase-fixed; degenerate blocks are
    re-orthogonalized from the standard basis in input order.
    """
    h = hermitian(m)
    vals, vecs = np.linalg.eigh(h)
    scale = max(max_norm(h), 1.0)
    n = vals.size
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and vals[stop] - vals[stop - 1] <= DEGENERACY_RTOL * scale:
            stop += 1
        if stop - start == 1:
            vecs[:, start] = _fix_phase(vecs[:, start])
        else:
            vecs[:, start:stop] = _canonical_block(vecs[:, start:stop])
            # degenerate eigenvalues set to their mean so reconstruction is exact on the block
            vals[start:stop] = vals[start:stop].mean()
        start = stop
    return EigenSystem(vals, vecs)


MatrixFunctionTag = Union[str, Callable[[np.ndarray], np.ndarray]]


def matrix_function(m, f: MatrixFunctionTag, shift: float = 0.0) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigenvalues.

    Parameters
    ----------
    m : array_like
        Hermitian matrix.
    f : {"exp", "log", "inverse-shifted"} or callable
        ``"inverse-shifted"`` computes ``(m + shift * I)^-1``. A callable
        receives the real eigenvalue vector and must return the mapped values.
    shift : float
        Only used by ``"inverse-shifted"``.
    """
    vals, vecs = eig_hermitian(m)
    if f == "exp":
        fv = np.exp(vals)
    elif f == "log":
        _require_positive(vals, "log")
        fv = np.log(vals)
    elif f in ("inverse-shifted", "inverse_shifted", "inverse"):
        shifted = vals + shift
        _require_positive(shifted, "inverse")
        fv = 1.0 / shifted
    elif callable(f):
        fv = np.asarray(f(vals))
    else:
        raise ValidationError(f"unknown matrix function {f!r}")
    return hermitize((vecs * fv) @ dagger(vecs))


def _require_positive(vals: np.ndarray, what: str) -> None:
    lo = float(vals.min())
    if lo <= POS_DEF_FLOOR:
        raise DomainError(
            f"{what} requires a positive definite matrix; smallest eigenvalue is {lo:.3e}",
            eigenvalue=lo,
        )


def expm_h(m) -> np.ndarray:
    return matrix_function(m, "exp")


def logm_h(m) -> np.ndarray:
    return matrix_function(m, "log")


def unitary_exp(h, t: float = 1.0) -> np.ndarray:
    """``exp(-i t h)`` for Hermitian ``h``."""
    vals, vecs = eig_hermitian(h)
    return (vecs * np.exp(-1j * t * vals)) @ dagger(vecs)


def kron(*ops) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, as_matrix(op))
    return out


def partial_trace(m, keep, dims) -> np.ndarray:
    """Reduce an operator on ``C^dS (x) C^dE`` to one factor.

    ``keep`` is ``"system"`` (trace out the second factor) or
    ``"environment"`` (trace out the first).
    """
    m = as_matrix(m)
    d_s, d_e = (int(d) for d in dims)
    if m.shape != (d_s * d_e, d_s * d_e):
        raise ValidationError(
            f"shape {m.shape} does not match dims ({d_s}, {d_e})", field="partial_trace"
        )
    t = m.reshape(d_s, d_e, d_s, d_e)
    if keep in ("system", 0):
        return np.einsum("aibi->ab", t)
    if keep in ("environment", 1):
        return np.einsum("iaib->ab", t)
    raise ValidationError(f"keep must be 'system' or 'environment', got {keep!r}")


def commutator(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch {a.shape} vs {b.shape}", field="commutator")
    return a @ b - b @ a


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """GUE-like sample; handy for scenario generation and tests."""
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (x + dagger(x))


SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
