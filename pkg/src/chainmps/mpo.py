"""Matrix product operators: the block-recurrence assembler and the built-in
model catalog.

An MPO site tensor has shape ``(w_left, w_right, d_out, d_in)``; the dense
operator element is recovered by chaining the virtual bonds and kron-ing the
physical pairs, with site 1 as the most significant factor.

Every Hamiltonian here is assembled from per-site operator blocks (A, B, C, D)
arranged in the standard upper-triangular pattern

    W_k = [[1,  C_k, D_k],
           [0,  A_k, B_k],
           [0,  0,   1 ]]

where D is the on-site term, C couples the site to its right neighbours, B to
its left ones, and A carries interactions through the site.  The first site
keeps only the top row of its square tensor and the last site only the final
column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from . import localops as ops
from .mps import MatrixProductState

__all__ = [
    "MatrixProductOperator",
    "BlockSpec",
    "XYZParams",
    "HubbardParams",
    "PureDephasingParams",
    "SpinBosonParams",
    "TightBindingParams",
    "ProtonTransferParams",
    "mpo_from_blocks",
    "xyz_mpo",
    "hubbard_mpo",
    "puredephasing_mpo",
    "spinboson_mpo",
    "tightbinding_mpo",
    "protontransfer_mpo",
    "identity_mpo",
    "mpo_to_dense",
    "mpo_expectation",
]

DENSE_GUARD = 4096


class MatrixProductOperator:
    """Chain of rank-4 operator tensors with boundary bond dimension 1."""

    __slots__ = ("sites",)

    def __init__(self, sites: Sequence[np.ndarray]):
        sites = [np.asarray(t, dtype=complex) for t in sites]
        if not sites:
            raise ValueError("an MPO needs at least one site")
        for n, t in enumerate(sites):
            if t.ndim != 4 or t.shape[2] != t.shape[3]:
                raise ValueError(
                    f"site {n + 1}: MPO tensor must have shape (wl, wr, d, d), got {t.shape}"
                )
        if sites[0].shape[0] != 1 or sites[-1].shape[1] != 1:
            raise ValueError("boundary MPO bond dimensions must be 1")
        for n in range(len(sites) - 1):
            if sites[n].shape[1] != sites[n + 1].shape[0]:
                raise ValueError(
                    f"MPO bond mismatch between sites {n + 1} and {n + 2}: "
                    f"{sites[n].shape[1]} != {sites[n + 1].shape[0]}"
                )
        self.sites = sites

    @property
    def num_sites(self) -> int:
        return len(self.sites)

    @property
    def local_dims(self) -> tuple[int, ...]:
        return tuple(t.shape[2] for t in self.sites)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        """Interior bond dimensions (N-1 values)."""
        return tuple(t.shape[1] for t in self.sites[:-1])

    def __repr__(self) -> str:
        return f"MatrixProductOperator(N={self.num_sites}, d={self.local_dims}, w={self.bond_dims})"


@dataclass(frozen=True)
class BlockSpec:
    """Operator blocks of one site of the upper-triangular MPO pattern.

    ``b`` has one entry per coupling channel entering from the left bond,
    ``c`` one per channel leaving on the right bond; ``a`` (optional, defaults
    to zeros) passes channels through and ``d`` is the on-site operator.
    """

    dim: int
    b: tuple[np.ndarray, ...] = ()
    c: tuple[np.ndarray, ...] = ()
    d: np.ndarray | None = None
    a: tuple[tuple[np.ndarray, ...], ...] | None = None

    @property
    def rows(self) -> int:
        return len(self.b)

    @property
    def cols(self) -> int:
        return len(self.c)


def _square_tensor(spec: BlockSpec, where: int) -> np.ndarray:
    d = spec.dim
    rows, cols = spec.rows, spec.cols

    def checked(op, what):
        op = np.asarray(op, dtype=complex)
        if op.shape != (d, d):
            raise ValueError(
                f"site {where}: {what} block has shape {op.shape}, expected ({d}, {d})"
            )
        return op

    w = np.zeros((rows + 2, cols + 2, d, d), dtype=complex)
    w[0, 0] = ops.identity(d)
    w[rows + 1, cols + 1] = ops.identity(d)
    for j, op in enumerate(spec.c):
        w[0, 1 + j] = checked(op, f"C[{j}]")
    if spec.d is not None:
        w[0, cols + 1] = checked(spec.d, "D")
    for i, op in enumerate(spec.b):
        w[1 + i, cols + 1] = checked(op, f"B[{i}]")
    if spec.a is not None:
        if len(spec.a) != rows or any(len(row) != cols for row in spec.a):
            raise ValueError(
                f"site {where}: A block must be {rows}x{cols} to match B and C"
            )
        for i, row in enumerate(spec.a):
            for j, op in enumerate(row):
                w[1 + i, 1 + j] = checked(op, f"A[{i}][{j}]")
    return w


def mpo_from_blocks(blocks: Sequence[BlockSpec]) -> MatrixProductOperator:
    """Assemble an MPO from per-site operator blocks.

    The number of right channels of each site must match the number of left
    channels of the next one; the first site contributes only its top row and
    the last site only its final column.
    """
    n = len(blocks)
    if n < 2:
        raise ValueError("mpo_from_blocks needs at least two sites")
    for k in range(n - 1):
        if blocks[k].cols != blocks[k + 1].rows:
            raise ValueError(
                f"channel mismatch on the bond between sites {k + 1} and {k + 2}: "
                f"{blocks[k].cols} right channels vs {blocks[k + 1].rows} left channels"
            )
    sites = []
    for k, spec in enumerate(blocks):
        w = _square_tensor(spec, k + 1)
        if k == 0:
            w = w[:1]
        if k == n - 1:
            w = w[:, -1:]
        sites.append(w)
    return MatrixProductOperator(sites)


# ------------------------------------------------------------- parameters


def _require_finite(obj) -> None:
    for f in fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, (int, float)) and not math.isfinite(value):
            raise ValueError(f"{type(obj).__name__}.{f.name} must be finite")


@dataclass(frozen=True)
class XYZParams:
    jx: float = 0.0
    jy: float = 0.0
    jz: float = 0.0
    hx: float = 0.0
    hz: float = 0.0

    def __post_init__(self):
        _require_finite(self)


@dataclass(frozen=True)
class HubbardParams:
    t: float
    u: float
    eps_d: float = 0.0

    def __post_init__(self):
        _require_finite(self)


@dataclass(frozen=True)
class PureDephasingParams:
    delta_e: float

    def __post_init__(self):
        _require_finite(self)


@dataclass(frozen=True)
class SpinBosonParams:
    omega0: float
    delta: float

    def __post_init__(self):
        _require_finite(self)


@dataclass(frozen=True)
class TightBindingParams:
    eps_d: float = 0.0

    def __post_init__(self):
        _require_finite(self)


@dataclass(frozen=True)
class ProtonTransferParams:
    omega0_e: float
    omega0_k: float
    delta: float
    omega_rc: float
    g_e: float
    g_k: float
    lambda_reorg: float

    def __post_init__(self):
        _require_finite(self)


def _check_chain(chain, n: int, label: str) -> None:
    if len(chain.eps) != n or len(chain.t) != n - 1:
        raise ValueError(
            f"{label}: expected {n} on-site energies and {n - 1} hoppings, "
            f"got {len(chain.eps)} and {len(chain.t)}"
        )


# ----------------------------------------------------------------- catalog


def xyz_mpo(n: int, params: XYZParams) -> MatrixProductOperator:
    """Nearest-neighbour XYZ spin chain with transverse/longitudinal fields."""
    if n < 2:
        raise ValueError("xyz_mpo needs n >= 2")
    b = (ops.sx, ops.sy, ops.sz)
    c = (params.jx * ops.sx, params.jy * ops.sy, params.jz * ops.sz)
    d = params.hx * ops.sx + params.hz * ops.sz
    first = BlockSpec(dim=2, c=c, d=d)
    bulk = BlockSpec(dim=2, b=b, c=c, d=d)
    last = BlockSpec(dim=2, b=b, d=d)
    return mpo_from_blocks([first] + [bulk] * (n - 2) + [last])


def hubbard_mpo(n: int, params: HubbardParams) -> MatrixProductOperator:
    """Fermi-Hubbard chain on d=4 sites hosting an (up, down) mode pair.

    Jordan-Wigner order runs (site1 up, site1 down, site2 up, ...), so the
    hopping operators that cross a site boundary pick up that site's parity.
    """
    if n < 2:
        raise ValueError("hubbard_mpo needs n >= 2")
    a2 = ops.destroy(2)
    eye2 = ops.identity(2)
    z = ops.f_parity
    cu = np.kron(a2, eye2)
    cd = np.kron(z, a2)
    parity = np.kron(z, z)
    t, u = params.t, params.u
    b = (cu, cd, cu.conj().T, cd.conj().T)
    c = (
        -t * (cu.conj().T @ parity),
        -t * (cd.conj().T @ parity),
        t * (cu @ parity),
        t * (cd @ parity),
    )
    n2 = ops.number(2)
    d = u * np.kron(n2, n2)
    if params.eps_d:
        d = d + params.eps_d * (np.kron(n2, eye2) + np.kron(eye2, n2))
    first = BlockSpec(dim=4, c=c, d=d)
    bulk = BlockSpec(dim=4, b=b, c=c, d=d)
    last = BlockSpec(dim=4, b=b, d=d)
    return mpo_from_blocks([first] + [bulk] * (n - 2) + [last])


def _boson_chain_blocks(d: int, chain, n: int) -> list[BlockSpec]:
    """Blocks for chain sites 0..n-1: on-site energies, hoppings and a
    single-channel (b + b^dag) coupling entering from the left."""
    bop = ops.destroy(d)
    bdag = bop.conj().T
    x = bop + bdag
    num = ops.number(d)
    blocks = []
    for j in range(n):
        left = (x,) if j == 0 else (bdag, bop)
        if j < n - 1:
            tj = chain.t[j]
            c = (tj * bop, tj * bdag)
        else:
            c = ()
        blocks.append(BlockSpec(dim=d, b=left, c=c, d=chain.eps[j] * num))
    return blocks


def puredephasing_mpo(delta_e: float, d: int, n: int, chain) -> MatrixProductOperator:
    """Two-level system dephasing through sigma_z/2 against a boson chain.

    The system block commutes with sigma_z, so populations are conserved and
    only coherences decay.
    """
    if d < 2:
        raise ValueError("puredephasing_mpo needs boson dimension d >= 2")
    _check_chain(chain, n, "puredephasing_mpo")
    system = BlockSpec(dim=2, c=(chain.c0 * ops.sz / 2,), d=(delta_e / 2) * ops.sz)
    return mpo_from_blocks([system] + _boson_chain_blocks(d, chain, n))


def spinboson_mpo(
    omega0: float, delta: float, d: int, n: int, chain
) -> MatrixProductOperator:
    """Spin-boson model: (omega0/2) sigma_z + delta sigma_x system split,
    sigma_x coupling into the boson chain."""
    if d < 2:
        raise ValueError("spinboson_mpo needs boson dimension d >= 2")
    _check_chain(chain, n, "spinboson_mpo")
    system = BlockSpec(
        dim=2,
        c=(chain.c0 * ops.sx,),
        d=(omega0 / 2) * ops.sz + delta * ops.sx,
    )
    return mpo_from_blocks([system] + _boson_chain_blocks(d, chain, n))


def tightbinding_mpo(
    n: int, eps_d: float, chain_empty, chain_filled
) -> MatrixProductOperator:
    """Resonant-level impurity between a filled and an empty fermionic lead.

    Geometry on the MPS line: filled lead reversed (mode n-1 leftmost),
    impurity in the middle, empty lead ascending.  All hops are nearest
    neighbour, for which the Jordan-Wigner strings cancel pairwise, so the
    hopping blocks are plain ladder operators.
    """
    if n < 1:
        raise ValueError("tightbinding_mpo needs n >= 1 modes per lead")
    _check_chain(chain_empty, n, "tightbinding_mpo (empty lead)")
    _check_chain(chain_filled, n, "tightbinding_mpo (filled lead)")
    f, fdag, num = ops.f_destroy, ops.f_create, ops.f_number

    onsite = []  # per MPS site
    hops = []  # per MPS bond
    for j in range(n):  # filled lead reversed
        onsite.append(chain_filled.eps[n - 1 - j])
        if j < n - 1:
            hops.append(chain_filled.t[n - 2 - j])
    hops.append(chain_filled.c0)
    onsite.append(eps_d)
    hops.append(chain_empty.c0)
    for j in range(n):
        onsite.append(chain_empty.eps[j])
        if j < n - 1:
            hops.append(chain_empty.t[j])

    blocks = []
    total = 2 * n + 1
    for k in range(total):
        b = (f, fdag) if k > 0 else ()
        c = (hops[k] * fdag, hops[k] * f) if k < total - 1 else ()
        blocks.append(BlockSpec(dim=2, b=b, c=c, d=onsite[k] * num))
    return mpo_from_blocks(blocks)


def protontransfer_mpo(
    params: ProtonTransferParams, d_rc: int, d: int, n: int, chain, chain_rc
) -> MatrixProductOperator:
    """Two electronic states displacing a reaction-coordinate mode that is
    itself damped by a boson chain.

    The reorganization counter-term lambda_reorg (d + d^dag)^2 is a local
    operator of the reaction coordinate and lives on its site tensor.
    ``chain_rc`` describes the reaction-coordinate mode; its first on-site
    energy must agree with ``params.omega_rc``.
    """
    if d_rc < 2:
        raise ValueError("protontransfer_mpo needs reaction-coordinate dimension >= 2")
    if d < 2:
        raise ValueError("protontransfer_mpo needs boson dimension d >= 2")
    _check_chain(chain, n, "protontransfer_mpo")
    if chain_rc is not None and len(chain_rc.eps) >= 1:
        if abs(chain_rc.eps[0] - params.omega_rc) > 1e-10:
            raise ValueError(
                "protontransfer_mpo: chain_rc on-site energy "
                f"{chain_rc.eps[0]} disagrees with omega_rc={params.omega_rc}"
            )
    p_e = np.diag([1.0, 0.0]).astype(complex)
    p_k = np.diag([0.0, 1.0]).astype(complex)
    system = BlockSpec(
        dim=2,
        c=(params.g_e * p_e + params.g_k * p_k,),
        d=params.omega0_e * p_e + params.omega0_k * p_k + params.delta * ops.sx,
    )
    x_rc = ops.displacement(d_rc)
    rc = BlockSpec(
        dim=d_rc,
        b=(x_rc,),
        c=(-chain.c0 * x_rc,),
        d=params.omega_rc * (ops.number(d_rc) + 0.5 * ops.identity(d_rc))
        + params.lambda_reorg * (x_rc @ x_rc),
    )
    return mpo_from_blocks([system, rc] + _boson_chain_blocks(d, chain, n))


def identity_mpo(local_dims: Sequence[int]) -> MatrixProductOperator:
    return MatrixProductOperator(
        [ops.identity(d).reshape(1, 1, d, d) for d in local_dims]
    )


# ------------------------------------------------------------ contractions


def mpo_to_dense(mpo: MatrixProductOperator) -> np.ndarray:
    """Full matrix of the MPO (test oracle; guarded against blowup)."""
    total = 1
    for d in mpo.local_dims:
        total *= d
        if total > DENSE_GUARD:
            raise ValueError(
                f"total dimension exceeds the dense guard ({DENSE_GUARD}); refusing"
            )
    running = np.ones((1, 1, 1), dtype=complex)  # (w, rows, cols)
    for w in mpo.sites:
        running = np.einsum("wPQ,wvoi->vPoQi", running, w, optimize=True)
        v, p, o, q, i = running.shape
        running = running.reshape(v, p * o, q * i)
    return running[0]


def mpo_expectation(psi: MatrixProductState, mpo: MatrixProductOperator) -> complex:
    """<psi|H|psi> by a single left-to-right environment sweep."""
    if psi.local_dims != mpo.local_dims:
        raise ValueError(
            f"state dims {psi.local_dims} do not match MPO dims {mpo.local_dims}"
        )
    env = np.ones((1, 1, 1), dtype=complex)  # (ket bond, mpo bond, bra bond)
    for a, w in zip(psi.sites, mpo.sites):
        env = np.einsum("awA,aib,wvoi,AoB->bvB", env, a, w, a.conj(), optimize=True)
    return complex(env[0, 0, 0])
