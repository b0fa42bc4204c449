"""Dense complex tensor kernel: contraction, orthogonal decompositions,
truncated SVD and Krylov propagation of local Schroedinger problems.

Tensors are plain numpy arrays of dtype complex128 in row-major layout.  All
matricizations permute the requested axes to the front explicitly before
reshaping, so there is a single layout convention throughout the package.
All functions are pure: inputs are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "SvdResult",
    "LinearMap",
    "KrylovConvergenceError",
    "contract",
    "svd_split",
    "qr_orthogonalize",
    "krylov_expm_apply",
]

# Singular values closer than this (relative to the largest one) are treated
# as a degenerate cluster that must not be split by truncation.
DEGENERACY_GAP = 1e-12


class KrylovConvergenceError(RuntimeError):
    """Lanczos residual did not reach tolerance within the allowed subspace."""


@dataclass(frozen=True)
class SvdResult:
    """Truncated singular value decomposition of a matricized tensor.

    ``U`` carries the left axes plus a new bond axis, ``vh`` the bond axis
    plus the right axes, and ``truncation_error`` is the discarded squared
    singular weight relative to the total squared weight.
    """

    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray
    truncation_error: float

    @property
    def rank(self) -> int:
        return len(self.s)


@dataclass(frozen=True)
class LinearMap:
    """A Hermitian operator acting on tensors of a fixed shape.

    The callable contract is ``apply(x) -> y`` with ``y.shape == x.shape ==
    dims``.  Hermiticity is assumed by the Lanczos propagator and can be
    spot-checked with :func:`hermiticity_defect`.
    """

    dims: tuple[int, ...]
    apply: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if tuple(x.shape) != self.dims:
            raise ValueError(
                f"linear map expects shape {self.dims}, got {tuple(x.shape)}"
            )
        return self.apply(x)


def hermiticity_defect(h: LinearMap, rng: np.random.Generator) -> float:
    """Return |<x, A y> - conj(<y, A x>)| for one random pair (x, y)."""
    x = rng.standard_normal(h.dims) + 1j * rng.standard_normal(h.dims)
    y = rng.standard_normal(h.dims) + 1j * rng.standard_normal(h.dims)
    lhs = np.vdot(x, h(y))
    rhs = np.vdot(y, h(x))
    return abs(lhs - np.conj(rhs))


def contract(
    a: np.ndarray,
    b: np.ndarray,
    pairs: Sequence[tuple[int, int]],
) -> np.ndarray:
    """Contract tensor ``a`` with ``b`` over the given (axis-of-a, axis-of-b)
    pairs.

    The result carries the unpaired axes of ``a`` followed by the unpaired
    axes of ``b``, each in their original order.  An empty ``pairs`` list
    yields the outer product.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes_a: list[int] = []
    axes_b: list[int] = []
    for ia, ib in pairs:
        if not (-a.ndim <= ia < a.ndim) or not (-b.ndim <= ib < b.ndim):
            raise ValueError(f"contract: axis pair ({ia}, {ib}) out of range")
        ia %= a.ndim
        ib %= b.ndim
        if ia in axes_a or ib in axes_b:
            raise ValueError(f"contract: axis pair ({ia}, {ib}) repeats an axis")
        if a.shape[ia] != b.shape[ib]:
            raise ValueError(
                f"contract: axis pair ({ia}, {ib}) has mismatched extents "
                f"{a.shape[ia]} != {b.shape[ib]}"
            )
        axes_a.append(ia)
        axes_b.append(ib)
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def _split_axes(t: np.ndarray, left_axes: Iterable[int]) -> tuple[list[int], list[int]]:
    left = sorted({ax % t.ndim for ax in left_axes})
    if not left or len(left) == t.ndim:
        raise ValueError("left_axes must be a nonempty proper subset of the axes")
    right = [ax for ax in range(t.ndim) if ax not in left]
    return left, right


def _matricize(t: np.ndarray, left: list[int], right: list[int]) -> np.ndarray:
    nl = int(np.prod([t.shape[ax] for ax in left], initial=1))
    nr = int(np.prod([t.shape[ax] for ax in right], initial=1))
    return np.transpose(t, left + right).reshape(nl, nr)


def _svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but robust
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def _truncation_rank(s: np.ndarray, max_rank: int | None, tol: float) -> int:
    """Pick the kept rank honoring tol, max_rank and degenerate clusters."""
    n = len(s)
    weights = s**2
    total = weights.sum()
    if total == 0.0:
        return 1
    # trailing[k] = squared weight discarded when keeping k values
    trailing = np.concatenate([np.cumsum(weights[::-1])[::-1], [0.0]])
    k = n
    while k > 1 and trailing[k - 1] <= tol * total:
        k -= 1
    cap = n if max_rank is None else max(1, min(max_rank, n))
    k = min(k, cap)
    if k == n:
        return k
    # never cut inside a degenerate cluster: keep it whole if the cap allows,
    # otherwise drop it entirely (unless that would leave nothing)
    gap = DEGENERACY_GAP * s[0]
    if s[k - 1] - s[k] < gap:
        hi = k
        while hi < n and s[hi - 1] - s[hi] < gap:
            hi += 1
        lo = k
        while lo > 1 and s[lo - 1] - s[lo] < gap:
            lo -= 1
        if hi <= cap:
            k = hi
        elif lo >= 1:
            k = lo
    return k


def svd_split(
    t: np.ndarray,
    left_axes: Iterable[int],
    max_rank: int | None = None,
    tol: float = 0.0,
) -> SvdResult:
    """Split ``t`` across the bipartition (left_axes | rest) by truncated SVD.

    Contracting ``u * diag(s) * vh`` over the new bond reconstructs ``t`` up
    to the reported relative truncation error.  The rank never exceeds
    ``max_rank``; within that cap, singular values are discarded while the
    relative discarded squared weight stays at most ``tol``.  Degenerate
    singular values are kept or dropped together.
    """
    t = np.asarray(t, dtype=complex)
    left, right = _split_axes(t, left_axes)
    if max_rank is not None and max_rank < 1:
        raise ValueError("max_rank must be a positive integer")
    if tol < 0.0:
        raise ValueError("tol must be nonnegative")
    m = _matricize(t, left, right)
    u, s, vh = _svd(m)
    k = _truncation_rank(s, max_rank, tol)
    total = float((s**2).sum())
    err = float((s[k:] ** 2).sum() / total) if total > 0.0 else 0.0
    left_dims = [t.shape[ax] for ax in left]
    right_dims = [t.shape[ax] for ax in right]
    return SvdResult(
        u=u[:, :k].reshape(left_dims + [k]),
        s=s[:k].copy(),
        vh=vh[:k].reshape([k] + right_dims),
        truncation_error=err,
    )


def qr_orthogonalize(
    t: np.ndarray,
    left_axes: Iterable[int],
) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR of ``t`` matricized over (left_axes | rest).

    Returns ``(q, r)`` where ``q`` is isometric over the grouped left axes
    (``q^dagger q = 1``) and contracting the last axis of ``q`` with the
    first axis of ``r`` reproduces ``t``.  The gauge is fixed by making the
    diagonal of ``r`` real and nonnegative.
    """
    t = np.asarray(t, dtype=complex)
    left, right = _split_axes(t, left_axes)
    m = _matricize(t, left, right)
    q, r = np.linalg.qr(m, mode="reduced")
    diag = np.diagonal(r).copy()
    phase = np.ones_like(diag)
    nz = np.abs(diag) > 0
    phase[nz] = diag[nz] / np.abs(diag[nz])
    q = q * phase[np.newaxis, :]
    r = r * np.conj(phase)[:, np.newaxis]
    k = q.shape[1]
    left_dims = [t.shape[ax] for ax in left]
    right_dims = [t.shape[ax] for ax in right]
    return q.reshape(left_dims + [k]), r.reshape([k] + right_dims)


def krylov_expm_apply(
    h: LinearMap | Callable[[np.ndarray], np.ndarray],
    v: np.ndarray,
    prefactor: complex,
    krylov_dim: int = 30,
    tol: float = 1e-12,
) -> np.ndarray:
    """Approximate ``exp(prefactor * H) v`` for Hermitian ``H`` by Lanczos.

    The iteration stops early once the residual estimate drops below ``tol``
    relative to ``|v|``, or exactly on breakdown (invariant subspace).  If the
    subspace is exhausted without convergence an error is raised instead of
    restarting: the local problems this kernel serves are small, and a failure
    here indicates a step size or conditioning problem that should surface.

    For purely imaginary ``prefactor`` the output norm equals the input norm
    up to roundoff, since the tridiagonal projection is Hermitian too.
    """
    v = np.asarray(v, dtype=complex)
    if krylov_dim < 1:
        raise ValueError("krylov_dim must be a positive integer")
    beta0 = np.linalg.norm(v)
    if beta0 == 0.0:
        raise ValueError("krylov_expm_apply requires a nonzero starting tensor")

    basis = [v / beta0]
    alphas: list[float] = []
    betas: list[float] = []
    y = None
    for j in range(krylov_dim):
        w = h(basis[j])
        alpha = np.vdot(basis[j], w)
        alphas.append(float(alpha.real))
        w = w - alpha * basis[j]
        if j > 0:
            w = w - betas[-1] * basis[j - 1]
        # full reorthogonalization keeps the basis numerically orthonormal
        for q in basis:
            w = w - np.vdot(q, w) * q
        beta = float(np.linalg.norm(w))

        size = j + 1
        tri = np.zeros((size, size))
        tri[np.arange(size), np.arange(size)] = alphas
        if size > 1:
            off = np.array(betas[: size - 1])
            tri[np.arange(size - 1), np.arange(1, size)] = off
            tri[np.arange(1, size), np.arange(size - 1)] = off
        evals, evecs = np.linalg.eigh(tri)
        y = evecs @ (np.exp(prefactor * evals) * evecs[0])

        scale = max(np.max(np.abs(alphas)), max(betas, default=0.0), 1.0)
        if beta <= 1e-14 * scale:
            break  # exact on the invariant subspace built so far
        if abs(prefactor) * beta * abs(y[-1]) <= tol:
            break
        if j + 1 == krylov_dim:
            raise KrylovConvergenceError(
                f"Lanczos residual {abs(prefactor) * beta * abs(y[-1]):.3e} above "
                f"tol {tol:.3e} after {krylov_dim} iterations; "
                "reduce the time step or raise krylov_dim"
            )
        betas.append(beta)
        basis.append(w / beta)

    out = np.zeros_like(v)
    for coeff, q in zip(y, basis):
        out += coeff * q
    return beta0 * out
