from typing import NamedTuple

import numpy as np
import pytest

from chainmps.localops import number, sx, sz
from chainmps.mpo import (
    BlockSpec,
    HubbardParams,
    MatrixProductOperator,
    ProtonTransferParams,
    XYZParams,
    hubbard_mpo,
    identity_mpo,
    mpo_expectation,
    mpo_from_blocks,
    mpo_to_dense,
    protontransfer_mpo,
    puredephasing_mpo,
    spinboson_mpo,
    tightbinding_mpo,
    xyz_mpo,
)
from chainmps.mps import canonicalize, enlarge_bonds, product_state
from oracles import (
    I2,
    SX,
    SZ,
    dense_hubbard,
    dense_proton_transfer,
    dense_pure_dephasing,
    dense_spin_boson,
    dense_xyz,
    op_at,
    quadratic_fermion_hamiltonian,
    resonant_level_single_particle,
)


class Chain(NamedTuple):
    eps: np.ndarray
    t: np.ndarray
    c0: float


CHAIN2 = Chain(np.array([0.5, 0.7]), np.array([0.3]), 0.4)
CHAIN3 = Chain(np.array([0.5, 0.7, 0.6]), np.array([0.3, 0.25]), 0.4)


def commutator_norm(a, b):
    return np.abs(a @ b - b @ a).max()


# ------------------------------------------------------------ block assembler


def test_blocks_onsite_only():
    h = 0.37
    spec = BlockSpec(dim=2, d=h * sz)
    mpo = mpo_from_blocks([spec, spec, spec])
    dims = [2, 2, 2]
    ref = h * (
        op_at(dims, {0: SZ}) + op_at(dims, {1: SZ}) + op_at(dims, {2: SZ})
    )
    assert np.allclose(mpo_to_dense(mpo), ref, atol=1e-14)


def test_blocks_single_nearest_neighbour_term():
    jx = 0.8
    first = BlockSpec(dim=2, c=(jx * sx,))
    last = BlockSpec(dim=2, b=(sx,))
    mpo = mpo_from_blocks([first, last])
    assert np.allclose(mpo_to_dense(mpo), jx * np.kron(SX, SX), atol=1e-14)


def test_blocks_xyz_matches_dense_sum(rng):
    p = XYZParams(*rng.standard_normal(5))
    mpo = xyz_mpo(4, p)
    ref = dense_xyz(4, p.jx, p.jy, p.jz, p.hx, p.hz)
    assert np.abs(mpo_to_dense(mpo) - ref).max() < 1e-13


def test_blocks_shape_chain_break_names_bond():
    ok = BlockSpec(dim=2, c=(sx,))
    bad = BlockSpec(dim=2, b=(sx, sz))
    with pytest.raises(ValueError, match="sites 1 and 2"):
        mpo_from_blocks([ok, bad])


# --------------------------------------------------------------------- xyz


def test_xyz_two_site_single_coupling():
    mpo = xyz_mpo(2, XYZParams(jx=1.0))
    assert np.allclose(mpo_to_dense(mpo), np.kron(SX, SX), atol=1e-14)


def test_xyz_bond_dimension_exactly_five():
    mpo = xyz_mpo(6, XYZParams(jx=0.3, jy=0.2, jz=0.1, hx=0.05, hz=0.07))
    assert mpo.bond_dims == (5, 5, 5, 5, 5)


def test_xyz_xxz_symmetry(rng):
    p = XYZParams(jx=0.4, jy=0.4, jz=0.9, hz=0.3)
    h = mpo_to_dense(xyz_mpo(4, p))
    total_sz = sum(op_at([2] * 4, {i: SZ}) for i in range(4))
    assert commutator_norm(h, total_sz) < 1e-12


# ----------------------------------------------------------------- hubbard


def test_hubbard_interaction_only():
    mpo = hubbard_mpo(2, HubbardParams(t=0.0, u=1.3))
    n2 = number(2)
    n_updown = np.kron(n2, n2)
    eye4 = np.eye(4)
    ref = 1.3 * (np.kron(n_updown, eye4) + np.kron(eye4, n_updown))
    assert np.allclose(mpo_to_dense(mpo), ref, atol=1e-13)


def test_hubbard_single_particle_band_minimum():
    t = 0.7
    h = mpo_to_dense(hubbard_mpo(2, HubbardParams(t=t, u=0.0)))
    # restrict to the one-particle sector of the 4 modes
    single = [i for i in range(16) if bin(i).count("1") == 1]
    evals = np.linalg.eigvalsh(h[np.ix_(single, single)])
    assert evals.min() == pytest.approx(-t, abs=1e-12)


def test_hubbard_matches_jw_oracle(rng):
    t, u = 0.83, 1.21
    mpo = hubbard_mpo(3, HubbardParams(t=t, u=u))
    assert np.abs(mpo_to_dense(mpo) - dense_hubbard(3, t, u)).max() < 1e-13


def test_hubbard_with_onsite_energy_matches_oracle():
    mpo = hubbard_mpo(2, HubbardParams(t=0.5, u=0.9, eps_d=-0.3))
    ref = dense_hubbard(2, 0.5, 0.9, eps_d=-0.3)
    assert np.abs(mpo_to_dense(mpo) - ref).max() < 1e-13


def test_hubbard_bond_dimension_exactly_six():
    assert hubbard_mpo(5, HubbardParams(t=1.0, u=2.0)).bond_dims == (6, 6, 6, 6)


# ---------------------------------------------------------- pure dephasing


def test_puredephasing_decoupled_block_diagonal():
    chain = Chain(np.array([0.9]), np.array([]), 0.0)
    h = mpo_to_dense(puredephasing_mpo(0.3, 3, 1, chain))
    ref = np.kron(0.15 * SZ, np.eye(3)) + np.kron(I2, 0.9 * np.diag([0, 1, 2.0]))
    assert np.allclose(h, ref, atol=1e-14)


def test_puredephasing_commutes_with_system_sz():
    h = mpo_to_dense(puredephasing_mpo(0.3, 3, 2, CHAIN2))
    sys_sz = op_at([2, 3, 3], {0: SZ})
    assert commutator_norm(h, sys_sz) < 1e-13
    assert np.abs(h - h.conj().T).max() < 1e-13


def test_puredephasing_matches_dense_oracle():
    h = mpo_to_dense(puredephasing_mpo(0.3, 3, 3, CHAIN3))
    ref = dense_pure_dephasing(0.3, 3, CHAIN3.eps, CHAIN3.t, CHAIN3.c0)
    assert np.abs(h - ref).max() < 1e-13


def test_puredephasing_vacuum_superposition_energy_zero():
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    psi = product_state([2, 3, 3], [plus, 0, 0])
    mpo = puredephasing_mpo(0.3, 3, 2, CHAIN2)
    val = mpo_expectation(psi, mpo)
    assert abs(val) < 1e-13


def test_puredephasing_chain_length_mismatch():
    with pytest.raises(ValueError, match="hoppings"):
        puredephasing_mpo(0.3, 3, 3, CHAIN2)


# -------------------------------------------------------------- spin-boson


def test_spinboson_delta_zero_is_dephasing_with_x_coupling():
    # same Hamiltonian as pure dephasing up to the coupling operator
    h = mpo_to_dense(spinboson_mpo(0.4, 0.0, 3, 2, CHAIN2))
    dims = [2, 3, 3]
    x3 = np.diag(np.sqrt([1, 2.0]), 1) + np.diag(np.sqrt([1, 2.0]), -1)
    dephase = mpo_to_dense(puredephasing_mpo(0.4, 3, 2, CHAIN2))
    ref = dephase + CHAIN2.c0 * op_at(dims, {0: SX - SZ / 2, 1: x3})
    assert np.allclose(h, ref, atol=1e-13)


def test_spinboson_matches_dense_oracle():
    h = mpo_to_dense(spinboson_mpo(0.9, 0.35, 3, 3, CHAIN3))
    ref = dense_spin_boson(0.9, 0.35, 3, CHAIN3.eps, CHAIN3.t, CHAIN3.c0)
    assert np.abs(h - ref).max() < 1e-13
    assert np.abs(h - h.conj().T).max() < 1e-13


def test_spinboson_bare_chain_single_particle_sector():
    chain = CHAIN3
    h = mpo_to_dense(spinboson_mpo(0.0, 0.0, 2, 3, Chain(chain.eps, chain.t, 0.0)))
    # single-boson states (system in up): indices with one chain excitation
    dims = [2, 2, 2, 2]
    basis = []
    for k in range(3):
        idx = 0
        for pos, d in enumerate(dims):
            idx *= d
            if pos == k + 1:
                idx += 1
        basis.append(idx)
    h_sub = h[np.ix_(basis, basis)]
    tri = np.diag(chain.eps) + np.diag(chain.t, 1) + np.diag(chain.t, -1)
    assert np.allclose(np.linalg.eigvalsh(h_sub), np.linalg.eigvalsh(tri), atol=1e-12)


# ------------------------------------------------------------ tight binding


def test_tightbinding_matches_quadratic_oracle():
    empty = Chain(np.array([0.4, 0.6]), np.array([0.2]), 0.35)
    filled = Chain(np.array([-0.5, -0.3]), np.array([0.25]), 0.45)
    mpo = tightbinding_mpo(2, -0.15, empty, filled)
    h_single = resonant_level_single_particle(-0.15, empty, filled)
    ref = quadratic_fermion_hamiltonian(h_single)
    assert np.abs(mpo_to_dense(mpo) - ref).max() < 1e-13


def test_tightbinding_conserves_particle_number():
    empty = Chain(np.array([0.4, 0.6]), np.array([0.2]), 0.35)
    filled = Chain(np.array([-0.5, -0.3]), np.array([0.25]), 0.45)
    h = mpo_to_dense(tightbinding_mpo(2, 0.1, empty, filled))
    dims = [2] * 5
    n_tot = sum(op_at(dims, {i: number(2)}) for i in range(5))
    assert commutator_norm(h, n_tot) < 1e-13


def test_tightbinding_decoupled_impurity():
    empty = Chain(np.array([0.4]), np.array([]), 0.0)
    filled = Chain(np.array([-0.5]), np.array([]), 0.0)
    h = mpo_to_dense(tightbinding_mpo(1, 0.77, empty, filled))
    n_imp = op_at([2, 2, 2], {1: number(2)})
    assert commutator_norm(h, n_imp) < 1e-14
    ref = (
        -0.5 * op_at([2, 2, 2], {0: number(2)})
        + 0.77 * n_imp
        + 0.4 * op_at([2, 2, 2], {2: number(2)})
    )
    assert np.allclose(h, ref, atol=1e-14)


def test_tightbinding_length_mismatch():
    empty = Chain(np.array([0.4, 0.6]), np.array([0.2]), 0.35)
    filled = Chain(np.array([-0.5]), np.array([]), 0.45)
    with pytest.raises(ValueError, match="filled"):
        tightbinding_mpo(2, 0.0, empty, filled)


# ---------------------------------------------------------- proton transfer


PT = ProtonTransferParams(
    omega0_e=0.1,
    omega0_k=-0.05,
    delta=0.07,
    omega_rc=0.65,
    g_e=0.2,
    g_k=-0.2,
    lambda_reorg=0.12,
)


def rc_chain(omega_rc):
    return Chain(np.array([omega_rc]), np.array([]), 0.0)


def test_protontransfer_matches_dense_oracle():
    mpo = protontransfer_mpo(PT, 3, 3, 2, CHAIN2, rc_chain(PT.omega_rc))
    ref = dense_proton_transfer(PT, 3, 3, CHAIN2.eps, CHAIN2.t, CHAIN2.c0)
    assert np.abs(mpo_to_dense(mpo) - ref).max() < 1e-13


def test_protontransfer_hermitian():
    chain1 = Chain(np.array([0.5]), np.array([]), 0.4)
    h = mpo_to_dense(protontransfer_mpo(PT, 3, 3, 1, chain1, rc_chain(PT.omega_rc)))
    assert np.abs(h - h.conj().T).max() < 1e-13


def test_protontransfer_symmetric_coupling_conserves_population():
    p = ProtonTransferParams(0.1, 0.3, 0.0, 0.65, 0.2, 0.2, 0.12)
    h = mpo_to_dense(protontransfer_mpo(p, 3, 2, 2, CHAIN2, rc_chain(0.65)))
    pe = op_at([2, 3, 2, 2], {0: np.diag([1.0, 0.0])})
    assert commutator_norm(h, pe) < 1e-13


def test_protontransfer_rc_frequency_mismatch():
    with pytest.raises(ValueError, match="omega_rc"):
        protontransfer_mpo(PT, 3, 3, 2, CHAIN2, rc_chain(PT.omega_rc + 0.1))


# ----------------------------------------------------------- dense layer


def test_identity_mpo_dense():
    mpo = identity_mpo([2, 3, 2])
    assert np.allclose(mpo_to_dense(mpo), np.eye(12), atol=1e-15)


def test_single_site_mpo_dense():
    block = np.arange(9, dtype=complex).reshape(3, 3)
    mpo = MatrixProductOperator([block.reshape(1, 1, 3, 3)])
    assert np.allclose(mpo_to_dense(mpo), block)


def test_mpo_to_dense_guard():
    mpo = identity_mpo([4] * 7)
    with pytest.raises(ValueError, match="guard"):
        mpo_to_dense(mpo)


def test_mpo_expectation_against_dense(rng):
    mpo = xyz_mpo(4, XYZParams(jx=0.3, jy=0.1, jz=0.5, hx=0.2))
    h = mpo_to_dense(mpo)
    from chainmps.mps import MatrixProductState, to_dense
    from oracles import mps_from_dense

    vec = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    vec /= np.linalg.norm(vec)
    psi = MatrixProductState(mps_from_dense(vec, [2] * 4))
    val = mpo_expectation(psi, mpo)
    assert val == pytest.approx(np.vdot(vec, h @ vec), abs=1e-12)


def test_mpo_expectation_gauge_and_padding_invariance():
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    psi = product_state([2, 3, 3], [plus, 0, 0])
    mpo = spinboson_mpo(0.9, 0.35, 3, 2, CHAIN2)
    ref = mpo_expectation(psi, mpo)
    assert abs(ref.imag) < 1e-10
    for variant in (canonicalize(psi, 3), enlarge_bonds(psi, 4), canonicalize(enlarge_bonds(psi, 3), 2)):
        assert mpo_expectation(variant, mpo) == pytest.approx(ref, abs=1e-10)


def test_mpo_expectation_linearity():
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    psi = product_state([2, 2], [plus, plus])
    a = xyz_mpo(2, XYZParams(jx=0.4))
    b = xyz_mpo(2, XYZParams(jz=0.6, hx=0.1))
    ha, hb = mpo_to_dense(a), mpo_to_dense(b)
    vec = np.kron(plus, plus)
    assert mpo_expectation(psi, a) + mpo_expectation(psi, b) == pytest.approx(
        np.vdot(vec, (ha + hb) @ vec), abs=1e-12
    )


def test_catalog_hermiticity():
    models = [
        xyz_mpo(4, XYZParams(0.3, 0.2, 0.1, 0.4, 0.5)),
        hubbard_mpo(3, HubbardParams(t=0.8, u=1.2, eps_d=0.1)),
        puredephasing_mpo(0.3, 3, 2, CHAIN2),
        spinboson_mpo(0.9, 0.35, 3, 2, CHAIN2),
        tightbinding_mpo(
            2,
            -0.1,
            Chain(np.array([0.4, 0.6]), np.array([0.2]), 0.35),
            Chain(np.array([-0.5, -0.3]), np.array([0.25]), 0.45),
        ),
        protontransfer_mpo(PT, 3, 2, 2, CHAIN2, rc_chain(PT.omega_rc)),
    ]
    for mpo in models:
        h = mpo_to_dense(mpo)
        assert np.abs(h - h.conj().T).max() < 1e-12


def test_chain_mpo_bond_dims_independent_of_length():
    chain5 = Chain(0.5 * np.ones(5), 0.25 * np.ones(4), 0.4)
    chain9 = Chain(0.5 * np.ones(9), 0.25 * np.ones(8), 0.4)
    w5 = max(puredephasing_mpo(0.3, 3, 5, chain5).bond_dims)
    w9 = max(puredephasing_mpo(0.3, 3, 9, chain9).bond_dims)
    assert w5 == w9 == 4
