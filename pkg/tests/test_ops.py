import itertools

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from hhed import ops
from hhed.errors import DimensionTooLarge, NotHermitian, SectorMismatch
from hhed.hilbert import SectorKey, build_sector_basis, full_fock_basis
from hhed.model import build_model
from hhed.presets import preset_model, ring, star

UP, DN = ops.UP, ops.DN


def _basis(n, twoM=0, cutoff=0, n_el=None):
    return build_sector_basis(n, SectorKey(n if n_el is None else n_el, twoM, cutoff))


def _vec(basis, cfg, phonons=None):
    v = np.zeros(basis.dimension)
    p = phonons if phonons is not None else (0,) * basis.n_sites
    v[basis.index(cfg, p)] = 1.0
    return v


def test_single_up_electron_annihilated():
    src = build_sector_basis(1, SectorKey(1, 1, 0))
    dst = build_sector_basis(1, SectorKey(0, 0, 0))
    c = ops.annihilator(0, UP, src, dst)
    out = c @ _vec(src, (1, 0))
    assert np.array_equal(out, _vec(dst, (0, 0)))


def test_sign_from_preceding_mode():
    src = build_sector_basis(2, SectorKey(2, 2, 0))
    dst = build_sector_basis(2, SectorKey(1, 1, 0))
    out = ops.annihilator(1, UP, src, dst) @ _vec(src, (0b11, 0))
    assert np.array_equal(out, -_vec(dst, (0b01, 0)))


def _full_fock_ladders(n):
    fb = full_fock_basis(n)
    cs = {(x, s): ops.annihilator(x, s, fb, fb).toarray() for x in range(n) for s in (UP, DN)}
    return fb, cs


@pytest.mark.parametrize("n", [1, 2, 3])
def test_canonical_anticommutation(n):
    fb, cs = _full_fock_ladders(n)
    eye = np.eye(fb.dimension)
    for (a, ca), (b, cb) in itertools.product(cs.items(), repeat=2):
        anti = ca @ cb.T + cb.T @ ca
        expected = eye if a == b else 0 * eye
        assert np.max(np.abs(anti - expected)) <= 1e-13
        assert np.max(np.abs(ca @ cb + cb @ ca)) <= 1e-13


def test_annihilator_from_bitstrings():
    # independent oracle: Jordan-Wigner sign from explicit occupation lists
    n = 2
    fb, cs = _full_fock_ladders(n)
    for (x, s), c in cs.items():
        mode = x + s * n
        for j, cfg in enumerate(fb.fermion_states):
            occ = [(cfg.up >> i) & 1 for i in range(n)] + [(cfg.dn >> i) & 1 for i in range(n)]
            col = c[:, j]
            if not occ[mode]:
                assert not np.any(col)
                continue
            sign = (-1) ** sum(occ[:mode])
            new = list(occ)
            new[mode] = 0
            up = sum(b << i for i, b in enumerate(new[:n]))
            dn = sum(b << i for i, b in enumerate(new[n:]))
            target = fb.fermion_index((up, dn))
            assert col[target] == sign and np.count_nonzero(col) == 1


def test_ladder_outside_target_rejected():
    src = _basis(2)
    with pytest.raises(SectorMismatch):
        ops.annihilator(0, UP, src, src)


def test_phonon_ladder():
    basis = _basis(2, cutoff=3)
    b = ops.phonon_annihilator(0, basis)
    out = b @ _vec(basis, (0b01, 0b10), (1, 0))
    assert np.allclose(out, _vec(basis, (0b01, 0b10), (0, 0)))
    out = b @ _vec(basis, (0b01, 0b10), (3, 0))
    assert np.allclose(out, np.sqrt(3) * _vec(basis, (0b01, 0b10), (2, 0)))


@pytest.mark.parametrize("n,cutoff", [(1, 1), (2, 2), (3, 3)])
def test_truncated_commutator(n, cutoff):
    basis = build_sector_basis(n, SectorKey(n, n % 2, cutoff))
    top = np.tile(np.array(basis.phonon_totals()) == cutoff, basis.n_fermion)
    for x in range(n):
        b = ops.phonon_annihilator(x, basis).toarray()
        comm = b @ b.T - b.T @ b
        diag = np.diag(comm)
        assert np.max(np.abs(comm - np.diag(diag))) <= 1e-13
        assert np.max(np.abs(diag[~top] - 1.0)) <= 1e-13
        # boundary: [b, b^dagger] = 1 - (n_x + 1) on the top grade
        nx = np.tile([p[x] for p in basis.phonon_states], basis.n_fermion)
        assert np.allclose(diag[top], -nx[top])
    for x, y in itertools.combinations(range(n), 2):
        bx = ops.phonon_annihilator(x, basis).toarray()
        by = ops.phonon_annihilator(y, basis).toarray()
        assert np.max(np.abs(bx @ by - by @ bx)) <= 1e-13


def test_vacuum_expectation_of_b_bdag():
    basis = _basis(2, cutoff=1)
    b = ops.phonon_annihilator(1, basis)
    v = _vec(basis, (0b01, 0b10))
    assert v @ (b @ (b.T @ v)) == pytest.approx(1.0)


def _dimer(U0=4.0, g0=0.0, omega=1.0):
    return preset_model("dimer", U0=U0, g0=g0, omega=omega)


def test_dimer_closed_form():
    h = ops.assemble_hh_hamiltonian(_dimer(), _basis(2)).toarray()
    e = np.linalg.eigvalsh(h)
    assert e[0] == pytest.approx(2 - 2 * np.sqrt(2), abs=1e-12)
    assert np.allclose(e, [2 - 2 * np.sqrt(2), 0, 4, 2 + 2 * np.sqrt(2)])


def test_decoupled_phonons_are_graded():
    model = _dimer()
    basis = _basis(2, cutoff=3)
    h = ops.assemble_hh_hamiltonian(model, basis).toarray()
    hub = np.linalg.eigvalsh(ops.assemble_hubbard(model, _basis(2)).toarray())
    expected = np.sort([e + model.omega * sum(p) for e in hub for p in basis.phonon_states])
    assert np.allclose(np.linalg.eigvalsh(h), expected)


def test_coulomb_rewrite_is_constant_shift():
    U0, V = 5.0, 1.5
    t = np.array([[0, -1.0], [-1.0, 0]])
    model = build_model([0, 1], None, t, [[U0, V], [V, U0]], np.zeros((2, 2)), 1.0)
    basis = _basis(2)
    h = ops.assemble_hubbard(model, basis).toarray()
    n_up = [ops.number_operator(basis, x, UP).toarray() for x in range(2)]
    n_dn = [ops.number_operator(basis, x, DN).toarray() for x in range(2)]
    nx = [n_up[x] + n_dn[x] for x in range(2)]
    kin = ops.assemble_hubbard(model.with_couplings(U=np.zeros((2, 2))), basis).toarray()
    rewritten = kin + U0 * sum(n_up[x] @ n_dn[x] for x in range(2)) + V * nx[0] @ nx[1]
    diff = h - rewritten
    assert np.allclose(diff, diff[0, 0] * np.eye(len(diff)))


def test_hubbard_matches_hh_without_phonons():
    model = star(4, U0=4.0)
    basis = _basis(4)
    a = ops.assemble_hubbard(model, basis)
    b = ops.assemble_hh_hamiltonian(model, basis)
    assert ops.max_abs(a - b) == 0.0


def test_free_dimer_energy():
    h = ops.assemble_hubbard(_dimer(U0=0.0), _basis(2)).toarray()
    # 2 electrons fill the bonding orbital
    assert np.linalg.eigvalsh(h)[0] == pytest.approx(-2.0, abs=1e-12)


def _ground_spin(h, s2):
    w, v = np.linalg.eigh(h)
    g = v[:, np.abs(w - w[0]) < 1e-8]
    return ops.spin_from_s2(float(np.mean(np.linalg.eigvalsh(g.T @ s2 @ g))))


def test_star_hubbard_spin_one():
    model = star(4, U0=4.0)
    basis = _basis(4)
    h = ops.assemble_hubbard(model, basis).toarray()
    assert _ground_spin(h, ops.total_spin_squared(basis).toarray()) == pytest.approx(1.0)


def test_heisenberg_dimer():
    h = ops.assemble_heisenberg(np.array([[0, 2.0], [2.0, 0]])).toarray()
    e = np.linalg.eigvalsh(h)
    assert e[0] == pytest.approx(-4.0)
    assert e[1] - e[0] == pytest.approx(4.0)
    assert ops.max_abs(ops.assemble_heisenberg(np.zeros((3, 3)))) == 0.0


def test_heisenberg_star_spin():
    model = star(4)
    h = ops.assemble_heisenberg(2 * model.t ** 2).toarray()
    assert _ground_spin(h, ops.heisenberg_total_spin(4).toarray()) == pytest.approx(1.0)


def test_heisenberg_rejects_bad_couplings():
    with pytest.raises(NotHermitian):
        ops.assemble_heisenberg(np.array([[0, 1.0], [0.5, 0]]))
    with pytest.raises(ValueError):
        ops.assemble_heisenberg(-np.ones((2, 2)))


def test_total_spin_values():
    pol = _basis(4, twoM=4)
    assert ops.total_spin_squared(pol).toarray()[0, 0] == pytest.approx(6.0)
    h = ops.assemble_hubbard(_dimer(), _basis(2)).toarray()
    w, v = np.linalg.eigh(h)
    s2 = ops.total_spin_squared(_basis(2)).toarray()
    assert v[:, 0] @ s2 @ v[:, 0] == pytest.approx(0.0, abs=1e-12)


def test_total_spin_multiplicities():
    # counting oracle: number of spin-S multiplets of 4 sites with 4 electrons
    s2 = ops.total_spin_squared(_basis(4)).toarray()
    e = np.round(np.linalg.eigvalsh(s2), 8)
    counts = {v: int(np.sum(e == v)) for v in np.unique(e)}
    # sector dimension with M = m is d(m); multiplets with spin S number d(S) - d(S+1)
    d = {m: len(_basis(4, twoM=2 * m).fermion_states) for m in range(0, 3)}
    d[3] = 0
    assert counts == {0.0: d[0] - d[1], 2.0: d[1] - d[2], 6.0: d[2] - d[3]}
    assert counts == {0.0: 20, 2.0: 15, 6.0: 1}


def test_spin_operator_bundle():
    basis = _basis(2, cutoff=1)
    opsd = ops.spin_operators(basis)
    assert ops.max_abs(opsd["S3"]) == 0.0
    assert opsd["Splus"].shape == (_basis(2, 2, 1).dimension, basis.dimension)
    top = _basis(2, twoM=2, cutoff=1)
    assert ops.spin_operators(top)["Splus"] is None


def test_full_fock_spin_is_consistent():
    # 2 sites, all fillings: 5 singlets, 4 doublets and 1 triplet
    s2 = ops.total_spin_squared(full_fock_basis(2)).toarray()
    e = np.round(np.linalg.eigvalsh(s2), 10)
    assert {v: int(np.sum(e == v)) for v in np.unique(e)} == {0.0: 5, 0.75: 8, 2.0: 3}


def test_staggered_raiser():
    basis = _basis(2, twoM=0)
    up = _basis(2, twoM=2)
    neel = _vec(basis, (0b01, 0b10))  # up on 0, down on 1
    uni = ops.staggered_spin_raiser(basis, "uniform")
    stg = ops.staggered_spin_raiser(basis, "staggered", [1, -1])
    assert np.allclose(uni @ neel, _vec(up, (0b11, 0)) * np.sign((uni @ neel)[0]) / np.sqrt(2))
    assert np.allclose(stg @ neel, -(uni @ neel))
    # with B empty the staggered and uniform operators coincide
    b3 = build_sector_basis(3, SectorKey(3, 1, 0))
    assert ops.max_abs(ops.staggered_spin_raiser(b3, "staggered", [1, 1, 1])
                       - ops.staggered_spin_raiser(b3, "uniform")) == 0.0
    pol = _basis(2, twoM=2)
    assert ops.staggered_spin_raiser(pol, "uniform") is None
    low = ops.staggered_spin_raiser(basis, "uniform")
    assert low.T.shape == (basis.dimension, up.dimension)


def test_charge_operator():
    basis = _basis(4, cutoff=1)
    q0 = ops.charge_operator([0.0], basis, np.arange(4.0))
    assert q0.nnz == 0
    single = build_sector_basis(1, SectorKey(2, 0, 0))
    assert ops.site_charge(0, single).toarray()[0, 0] == 1.0


def test_charge_fluctuation_against_dense():
    model = ring(4, U0=0.0)
    basis = _basis(4)
    h = ops.assemble_hubbard(model, basis).toarray()
    w, v = np.linalg.eigh(h)
    psi = v[:, 0]
    k = np.pi / 2
    qk = ops.charge_operator([k], basis, model.positions).toarray()
    qmk = ops.charge_operator([-k], basis, model.positions).toarray()
    # oracle: sum over sites of the density correlator
    nx = [ops.site_charge(x, basis).toarray() for x in range(4)]
    xs = model.positions.ravel()
    ref = sum(np.exp(-1j * k * (xs[a] - xs[b])) * (psi @ nx[a] @ nx[b] @ psi)
              for a in range(4) for b in range(4)) / 4
    assert np.vdot(psi, qk @ qmk @ psi) == pytest.approx(ref, abs=1e-12)


def test_lang_firsov_trivial_without_coupling():
    model = _dimer()
    basis = _basis(2, cutoff=2)
    assert ops.max_abs(ops.lang_firsov_generator(model, basis)) == 0.0
    u = ops.lang_firsov_unitary(model, basis)
    assert ops.max_abs(u - sp.identity(basis.dimension)) == 0.0


def test_lang_firsov_unitary_matches_expm():
    model = _dimer(g0=0.4, omega=1.5)
    basis = _basis(2, cutoff=3)
    L = ops.lang_firsov_generator(model, basis, theta=2.0).toarray()
    assert np.allclose(L, -L.T)
    u = ops.lang_firsov_unitary(model, basis, theta=2.0).toarray()
    assert np.allclose(u, scipy.linalg.expm(L), atol=1e-13)
    assert np.allclose(u @ u.T, np.eye(len(u)), atol=1e-12)


def test_similarity_keeps_spectrum():
    model = _dimer(g0=0.5, omega=2.0)
    basis = _basis(2, cutoff=4)
    h = ops.assemble_hh_hamiltonian(model, basis).toarray()
    u = ops.lang_firsov_unitary(model, basis).toarray()
    assert np.allclose(np.linalg.eigvalsh(u @ h @ u.T), np.linalg.eigvalsh(h), atol=1e-11)


def test_lang_firsov_dimension_cap():
    basis = _basis(4, cutoff=4)
    with pytest.raises(DimensionTooLarge):
        ops.lang_firsov_unitary(ring(4, g0=1.0), basis, max_dim=100)


def test_polaron_shift():
    # one electron on one site: E0 -> -g^2/omega as the cutoff grows
    g, omega = 0.8, 1.0
    model = build_model(["x"], None, [[0.0]], [[0.0]], [[g]], omega)
    basis = build_sector_basis(1, SectorKey(1, 1, 25))
    h = ops.assemble_hh_hamiltonian(model, basis).toarray()
    assert np.linalg.eigvalsh(h)[0] == pytest.approx(-g ** 2 / omega, abs=1e-10)


def test_displaced_frame_same_spectrum_at_large_cutoff():
    model = _dimer(g0=0.5, omega=2.0)
    basis = _basis(2, cutoff=14)
    bare = np.linalg.eigvalsh(ops.assemble_hh_hamiltonian(model, basis).toarray())[:3]
    disp = np.linalg.eigvalsh(ops.assemble_hh_hamiltonian(model, basis, "displaced").toarray())[:3]
    assert np.allclose(bare, disp, atol=1e-9)


def test_unknown_frame():
    with pytest.raises(ValueError):
        ops.assemble_hh_hamiltonian(_dimer(g0=0.1), _basis(2, cutoff=1), "sideways")


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(["dimer", "ring4", "star4", "chain4"]), st.integers(0, 2),
       st.floats(0.0, 1.0), st.sampled_from(["bare", "displaced"]), st.data())
def test_symmetries_commute(name, cutoff, g0, frame, data):
    model = preset_model(name, U0=3.0, g0=g0, omega=1.3)
    n = model.n_sites
    twoM = data.draw(st.sampled_from(list(range(0, n + 1, 2))))
    basis = _basis(n, twoM, cutoff)
    h = ops.assemble_hh_hamiltonian(model, basis, frame)
    scale = ops.max_abs(h)
    for op in (ops.spin_operators(basis)["S3"], ops.total_spin_squared(basis),
               ops.number_operator(basis)):
        assert ops.commutator_norm(h, op) <= 1e-12 * scale
    assert ops.hermiticity_defect(h) <= 1e-13 * scale
    coo = h.tocoo()
    assert len(set(zip(coo.row, coo.col))) == coo.nnz


def test_check_hermitian_rejects():
    with pytest.raises(NotHermitian):
        ops.check_hermitian(sp.csr_matrix(np.array([[0, 1.0], [0, 0]])))
