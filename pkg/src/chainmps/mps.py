"""Matrix product states: factories, canonical forms and measurements.

A state over N sites is a list of rank-3 tensors with shape
``(D_left, d, D_right)`` and boundary bond dimension 1.  Site indices in all
user-facing functions are 1-based (site 1 is the leftmost, conventionally the
system site); internal storage is 0-based.  Operations never mutate their
inputs: they return new states sharing unchanged tensors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .localops import is_hermitian
from .tensor_core import qr_orthogonalize

__all__ = [
    "MatrixProductState",
    "Observable",
    "LocalState",
    "product_state",
    "enlarge_bonds",
    "canonicalize",
    "expect_one_site",
    "expect_two_site",
    "reduced_density_matrix",
    "to_dense",
    "overlap",
]

#: A local state is either a Fock/basis label or an explicit unit-norm vector.
LocalState = Union[int, Sequence[complex], np.ndarray]

DENSE_GUARD = 2**20


class MatrixProductState:
    """Chain of rank-3 site tensors with orthogonality-center bookkeeping."""

    __slots__ = ("sites", "_center")

    def __init__(self, sites: Sequence[np.ndarray], center: int | None = None):
        sites = [np.asarray(t, dtype=complex) for t in sites]
        if not sites:
            raise ValueError("an MPS needs at least one site")
        for n, t in enumerate(sites):
            if t.ndim != 3:
                raise ValueError(f"site {n + 1}: tensor must be rank 3, got rank {t.ndim}")
        if sites[0].shape[0] != 1 or sites[-1].shape[2] != 1:
            raise ValueError("boundary bond dimensions must be 1")
        for n in range(len(sites) - 1):
            if sites[n].shape[2] != sites[n + 1].shape[0]:
                raise ValueError(
                    f"bond mismatch between sites {n + 1} and {n + 2}: "
                    f"{sites[n].shape[2]} != {sites[n + 1].shape[0]}"
                )
        if center is not None and not 0 <= center < len(sites):
            raise ValueError("orthogonality center out of range")
        self.sites = sites
        self._center = center

    @property
    def num_sites(self) -> int:
        return len(self.sites)

    @property
    def local_dims(self) -> tuple[int, ...]:
        return tuple(t.shape[1] for t in self.sites)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        """Interior bond dimensions (N-1 values)."""
        return tuple(t.shape[2] for t in self.sites[:-1])

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    @property
    def ortho_center(self) -> int | None:
        """1-based orthogonality center, or None when unknown."""
        return None if self._center is None else self._center + 1

    def norm(self) -> float:
        if self._center is not None:
            return float(np.linalg.norm(self.sites[self._center]))
        return float(np.sqrt(abs(overlap(self, self))))

    def copy(self) -> "MatrixProductState":
        return MatrixProductState(list(self.sites), self._center)

    def __repr__(self) -> str:
        return (
            f"MatrixProductState(N={self.num_sites}, d={self.local_dims}, "
            f"D={self.bond_dims}, center={self.ortho_center})"
        )


@dataclass(frozen=True)
class Observable:
    """A named one-site or two-site-correlation measurement.

    ``sites`` selects where to measure: a single 1-based index, an inclusive
    ``(low, high)`` range, or None for every site.  Two-site observables
    require a range and are evaluated on all ordered pairs within it.
    """

    name: str
    kind: str  # "one-site" | "two-site"
    operators: tuple[np.ndarray, ...]
    sites: int | tuple[int, int] | None

    @classmethod
    def one_site(cls, name, operator, sites=None) -> "Observable":
        op = np.asarray(operator, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ValueError(f"observable {name!r}: operator must be square")
        return cls(name, "one-site", (op,), _check_selector(sites))

    @classmethod
    def two_site(cls, name, operator1, operator2, sites) -> "Observable":
        op1 = np.asarray(operator1, dtype=complex)
        op2 = np.asarray(operator2, dtype=complex)
        for op in (op1, op2):
            if op.ndim != 2 or op.shape[0] != op.shape[1]:
                raise ValueError(f"observable {name!r}: operators must be square")
        sel = _check_selector(sites)
        if not isinstance(sel, tuple):
            raise ValueError(f"observable {name!r}: two-site kind needs a site range")
        return cls(name, "two-site", (op1, op2), sel)


def _check_selector(sites):
    if sites is None or isinstance(sites, int):
        return sites
    lo, hi = sites
    if lo < 1 or hi < lo:
        raise ValueError(f"invalid site range ({lo}, {hi})")
    return (int(lo), int(hi))


def _selected_indices(psi: MatrixProductState, sites) -> list[int]:
    """Resolve a 1-based selector to 0-based site indices."""
    n = psi.num_sites
    if sites is None:
        return list(range(n))
    if isinstance(sites, int):
        if not 1 <= sites <= n:
            raise ValueError(f"site {sites} outside 1..{n}")
        return [sites - 1]
    lo, hi = sites
    if lo < 1 or hi > n:
        raise ValueError(f"site range ({lo}, {hi}) outside 1..{n}")
    return list(range(lo - 1, hi))


def _validate_ops(psi: MatrixProductState, obs: Observable, indices: list[int]):
    for k in indices:
        d = psi.local_dims[k]
        for op in obs.operators:
            if op.shape != (d, d):
                raise ValueError(
                    f"observable {obs.name!r}: operator shape {op.shape} does not "
                    f"match local dimension {d} at site {k + 1}"
                )


def validate_observable(psi: MatrixProductState, obs: Observable) -> None:
    """Raise early if an observable cannot be measured on this state."""
    if obs.kind not in ("one-site", "two-site"):
        raise ValueError(f"unknown observable kind {obs.kind!r}")
    if obs.kind == "two-site" and len(obs.operators) != 2:
        raise ValueError(f"observable {obs.name!r}: two operators required")
    _validate_ops(psi, obs, _selected_indices(psi, obs.sites))


# ------------------------------------------------------------------ factories


def _local_vector(state: LocalState, d: int, where: int) -> np.ndarray:
    if isinstance(state, (int, np.integer)):
        if not 0 <= state < d:
            raise ValueError(f"site {where}: basis label {state} outside 0..{d - 1}")
        vec = np.zeros(d, dtype=complex)
        vec[state] = 1.0
        return vec
    vec = np.asarray(state, dtype=complex)
    if vec.shape != (d,):
        raise ValueError(f"site {where}: state vector length {vec.shape} does not match d={d}")
    if abs(np.linalg.norm(vec) - 1.0) > 1e-12:
        raise ValueError(f"site {where}: local state vector must have unit norm")
    return vec


def product_state(
    local_dims: Sequence[int],
    states: Sequence[LocalState],
) -> MatrixProductState:
    """Bond-dimension-1 product state |s_1> x |s_2> x ... x |s_N>."""
    if len(local_dims) != len(states):
        raise ValueError(
            f"{len(local_dims)} local dimensions but {len(states)} local states"
        )
    sites = []
    for n, (d, s) in enumerate(zip(local_dims, states), start=1):
        if d < 1:
            raise ValueError(f"site {n}: local dimension must be positive")
        sites.append(_local_vector(s, d, n).reshape(1, d, 1))
    return MatrixProductState(sites, center=0)


def enlarge_bonds(psi: MatrixProductState, target_d: int) -> MatrixProductState:
    """Zero-pad every interior bond up to min(target_d, full-rank bound).

    The represented vector is unchanged; padding entries are exact zeros.
    Shrinking is refused: truncation is the job of an SVD split.
    """
    if target_d < 1:
        raise ValueError("target bond dimension must be positive")
    if target_d < psi.max_bond:
        raise ValueError(
            f"target bond dimension {target_d} is below an existing bond "
            f"({psi.max_bond}); bonds can only be enlarged"
        )
    dims = psi.local_dims
    n = psi.num_sites
    # full-rank bound per interior bond, saturated at target_d
    left_cap, caps = 1, []
    for i in range(n - 1):
        left_cap = min(left_cap * dims[i], target_d)
        caps.append(left_cap)
    right_cap = 1
    for i in range(n - 2, -1, -1):
        right_cap = min(right_cap * dims[i + 1], target_d)
        caps[i] = min(caps[i], right_cap)
    bonds = [1] + caps + [1]
    sites = []
    for i, t in enumerate(psi.sites):
        new = np.zeros((bonds[i], dims[i], bonds[i + 1]), dtype=complex)
        new[: t.shape[0], :, : t.shape[2]] = t
        sites.append(new)
    # zero columns break the isometry conditions, so the center is unknown
    return MatrixProductState(sites, center=None)


# ------------------------------------------------------------- canonical form


def _shift_center_right(sites: list[np.ndarray], n: int) -> None:
    """Left-isometrize site n, absorbing the remainder into site n+1."""
    q, r = qr_orthogonalize(sites[n], [0, 1])
    sites[n] = q
    sites[n + 1] = np.tensordot(r, sites[n + 1], axes=([1], [0]))


def _shift_center_left(sites: list[np.ndarray], n: int) -> None:
    """Right-isometrize site n, absorbing the remainder into site n-1."""
    q, r = qr_orthogonalize(np.transpose(sites[n], (2, 1, 0)), [0, 1])
    sites[n] = np.transpose(q, (2, 1, 0))
    sites[n - 1] = np.tensordot(sites[n - 1], np.transpose(r, (1, 0)), axes=([2], [0]))


def canonicalize(psi: MatrixProductState, center: int) -> MatrixProductState:
    """Return a copy of ``psi`` in mixed-canonical form around ``center``.

    Sites left of the (1-based) center become left-isometric, sites right of
    it right-isometric; the represented vector is unchanged.
    """
    n = psi.num_sites
    if not 1 <= center <= n:
        raise ValueError(f"center {center} outside 1..{n}")
    c = center - 1
    sites = list(psi.sites)
    if psi._center is None:
        for i in range(0, c):
            _shift_center_right(sites, i)
        for i in range(n - 1, c, -1):
            _shift_center_left(sites, i)
    elif psi._center < c:
        for i in range(psi._center, c):
            _shift_center_right(sites, i)
    elif psi._center > c:
        for i in range(psi._center, c, -1):
            _shift_center_left(sites, i)
    return MatrixProductState(sites, center=c)


# --------------------------------------------------------------- measurements


def overlap(bra: MatrixProductState, ket: MatrixProductState) -> complex:
    """<bra|ket> for two states on identical local dimensions."""
    if bra.local_dims != ket.local_dims:
        raise ValueError("overlap requires identical local dimensions")
    env = np.ones((1, 1), dtype=complex)  # (ket bond, bra bond)
    for a, b in zip(ket.sites, bra.sites):
        env = np.einsum("aA,aib,AiB->bB", env, a, b.conj(), optimize=True)
    return complex(env[0, 0])


def _right_transfers(psi: MatrixProductState) -> list[np.ndarray]:
    """r[n] = transfer matrix of sites n..N-1; r[N] is the boundary."""
    n = psi.num_sites
    out = [np.ones((1, 1), dtype=complex)] * (n + 1)
    for i in range(n - 1, -1, -1):
        a = psi.sites[i]
        out[i] = np.einsum("aib,AiB,bB->aA", a, a.conj(), out[i + 1], optimize=True)
    return out


def _step_transfer(env: np.ndarray, a: np.ndarray) -> np.ndarray:
    return np.einsum("aA,aib,AiB->bB", env, a, a.conj(), optimize=True)


def _step_with_op(env: np.ndarray, a: np.ndarray, op: np.ndarray) -> np.ndarray:
    return np.einsum("aA,aib,oi,AoB->bB", env, a, op, a.conj(), optimize=True)


def expect_one_site(psi: MatrixProductState, obs: Observable) -> np.ndarray:
    """Expectation of a one-site operator at each selected site.

    Returns a real array for Hermitian operators (the residual imaginary
    part, below 1e-10 by construction, is discarded), complex otherwise.
    Values are raw ``<psi|O|psi>`` without renormalization.
    """
    if obs.kind != "one-site":
        raise ValueError(f"observable {obs.name!r} is not one-site")
    selected = _selected_indices(psi, obs.sites)
    _validate_ops(psi, obs, selected)
    op = obs.operators[0]
    right = _right_transfers(psi)
    left = np.ones((1, 1), dtype=complex)
    values = np.empty(len(selected), dtype=complex)
    pos = 0
    for i in range(psi.num_sites):
        if pos < len(selected) and selected[pos] == i:
            closed = _step_with_op(left, psi.sites[i], op)
            values[pos] = np.einsum("bB,bB->", closed, right[i + 1], optimize=True)
            pos += 1
            if pos == len(selected):
                break
        left = _step_transfer(left, psi.sites[i])
    if is_hermitian(op):
        return values.real.copy()
    return values


def expect_two_site(psi: MatrixProductState, obs: Observable) -> np.ndarray:
    """Matrix of <op1_i op2_j> over all ordered pairs in the site range.

    Entry (i, j) applies op1 at site i and op2 at site j; on the diagonal the
    product op1 @ op2 acts on the single site.
    """
    if obs.kind != "two-site":
        raise ValueError(f"observable {obs.name!r} is not two-site")
    selected = _selected_indices(psi, obs.sites)
    _validate_ops(psi, obs, selected)
    op1, op2 = obs.operators
    right = _right_transfers(psi)
    m = len(selected)
    lo = selected[0]
    result = np.empty((m, m), dtype=complex)

    # left transfer up to each selected site
    lefts = [np.ones((1, 1), dtype=complex)]
    env = lefts[0]
    for i in range(lo):
        env = _step_transfer(env, psi.sites[i])
    lefts = {lo: env}
    for i in range(lo, selected[-1]):
        env = _step_transfer(env, psi.sites[i])
        lefts[i + 1] = env

    def close(env, i, op):
        closed = _step_with_op(env, psi.sites[i], op)
        return complex(np.einsum("bB,bB->", closed, right[i + 1], optimize=True))

    for a, p in enumerate(selected):
        result[a, a] = close(lefts[p], p, op1 @ op2)
        # op1 sits at p, op2 at q > p
        env_fwd = _step_with_op(lefts[p], psi.sites[p], op1)
        # op2 sits at p, op1 at q > p (fills the lower triangle)
        env_bwd = _step_with_op(lefts[p], psi.sites[p], op2)
        for b in range(a + 1, m):
            q = selected[b]
            result[a, b] = close(env_fwd, q, op2)
            result[b, a] = close(env_bwd, q, op1)
            if q < selected[-1]:
                env_fwd = _step_transfer(env_fwd, psi.sites[q])
                env_bwd = _step_transfer(env_bwd, psi.sites[q])
    return result


def reduced_density_matrix(psi: MatrixProductState, site: int) -> np.ndarray:
    """Reduced density matrix of one site (1-based), tracing out the rest.

    The trace equals the squared norm of the state, so it is 1 for a
    normalized state.
    """
    if not 1 <= site <= psi.num_sites:
        raise ValueError(f"site {site} outside 1..{psi.num_sites}")
    centered = canonicalize(psi, site)
    a = centered.sites[site - 1]
    return np.einsum("lir,ljr->ij", a, a.conj(), optimize=True)


def to_dense(psi: MatrixProductState) -> np.ndarray:
    """Full coefficient tensor with one axis per site (test oracle only)."""
    total = 1
    for d in psi.local_dims:
        total *= d
        if total > DENSE_GUARD:
            raise ValueError(
                f"total dimension exceeds the dense guard ({DENSE_GUARD}); refusing"
            )
    vec = psi.sites[0][0]  # (d0, D1)
    for t in psi.sites[1:]:
        vec = np.tensordot(vec, t, axes=([vec.ndim - 1], [0]))
    return vec[..., 0]
