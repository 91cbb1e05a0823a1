"""Sparse matrix assembly for fermion, phonon and spin operators.

All operators are ``scipy.sparse`` CSR matrices acting on a
:class:`~hhed.hilbert.SectorBasis` (rows index the target basis).  Fermion
signs follow the global mode order of :mod:`hhed.hilbert`: applying a ladder
operator to mode ``m`` picks up ``(-1)**(occupied modes before m)``.
Operators are built on the fermion factor and lifted with ``kron`` onto the
phonon factor, which is the minor index.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import DimensionTooLarge, EmptySector, NotHermitian, SectorMismatch
from .hilbert import FermionConfig, SectorBasis
from .model import ModelSpec

UP, DN = 0, 1
HERMITIAN_RTOL = 1e-13
MAX_DENSE_EXP = 4000


def _popcount(w: int) -> int:
    return bin(w).count("1")


def _mode(n_sites: int, x: int, spin: int) -> int:
    return x + spin * n_sites


def apply_ladder(word: int, mode: int, create: bool):
    """Apply c or c^dagger on ``mode`` to a full occupation word.

    Returns ``(sign, new_word)`` or ``None`` if the result vanishes.
    """
    bit = 1 << mode
    if bool(word & bit) == create:
        return None
    sign = -1 if _popcount(word & (bit - 1)) % 2 else 1
    return sign, word ^ bit


def _split(word: int, n_sites: int) -> FermionConfig:
    mask = (1 << n_sites) - 1
    return FermionConfig(word & mask, word >> n_sites)


def _fermion_matrix(src: SectorBasis, dst: SectorBasis, action) -> sp.csr_matrix:
    """Assemble a fermion-factor matrix.  ``action(word)`` yields
    ``(amplitude, new_word)`` pairs; targets missing from ``dst`` raise."""
    n = src.n_sites
    rows, cols, vals = [], [], []
    for j, cfg in enumerate(src.fermion_states):
        for amp, w in action(cfg.word(n)):
            new = _split(w, n)
            if not dst.contains(new):
                raise SectorMismatch(f"operator maps {cfg} to {new}, outside the target basis")
            rows.append(dst.fermion_index(new))
            cols.append(j)
            vals.append(amp)
    return sp.csr_matrix((vals, (rows, cols)), shape=(dst.n_fermion, src.n_fermion), dtype=float)


def _fermion_diag(basis: SectorBasis, fn) -> sp.csr_matrix:
    n = basis.n_sites
    d = np.array([fn(cfg, n) for cfg in basis.fermion_states], dtype=float)
    return sp.diags(d, format="csr")


def lift(fermion_part, basis: SectorBasis) -> sp.csr_matrix:
    """Tensor a fermion-factor operator with the phonon identity."""
    return sp.kron(fermion_part, sp.identity(basis.n_phonon, format="csr"), format="csr")


def occupations(cfg: FermionConfig, n_sites: int) -> np.ndarray:
    """Per-site electron number n_x."""
    return np.array([((cfg.up >> x) & 1) + ((cfg.dn >> x) & 1) for x in range(n_sites)])


def _check_same_cutoff(a: SectorBasis, b: SectorBasis) -> None:
    if a.n_ph_max != b.n_ph_max or a.n_sites != b.n_sites:
        raise SectorMismatch("bases differ in site count or phonon cutoff")


# -- fermions ----------------------------------------------------------------


def annihilator(x: int, spin: int, from_basis: SectorBasis, to_basis: SectorBasis | None = None):
    """c_{x spin} from ``from_basis`` into ``to_basis``.

    ``to_basis`` defaults to the sector with one fewer electron of that spin
    (or the same basis for the full Fock space).
    """
    if to_basis is None:
        to_basis = _ladder_target(from_basis, spin, -1)
    _check_same_cutoff(from_basis, to_basis)
    m = _mode(from_basis.n_sites, x, spin)

    def action(w):
        r = apply_ladder(w, m, create=False)
        return [] if r is None else [r]

    return lift(_fermion_matrix(from_basis, to_basis, action), from_basis)


def creator(x: int, spin: int, from_basis: SectorBasis, to_basis: SectorBasis | None = None):
    if to_basis is None:
        to_basis = _ladder_target(from_basis, spin, +1)
    return annihilator(x, spin, to_basis, from_basis).T.tocsr()


def _ladder_target(basis: SectorBasis, spin: int, dn: int) -> SectorBasis:
    dtwoM = dn if spin == UP else -dn
    return basis.neighbor(dtwoM=dtwoM, dn_el=dn)


def number_operator(basis: SectorBasis, x: int | None = None, spin: int | None = None):
    """n_{x spin}, n_x, or N_el when ``x`` is None."""
    sites = range(basis.n_sites) if x is None else [x]
    spins = (UP, DN) if spin is None else (spin,)

    def fn(cfg, n):
        words = {UP: cfg.up, DN: cfg.dn}
        return sum((words[s] >> y) & 1 for y in sites for s in spins)

    return lift(_fermion_diag(basis, fn), basis)


def _hopping_fermion(model: ModelSpec, basis: SectorBasis) -> sp.csr_matrix:
    n = basis.n_sites
    bonds = [(x, y, model.t[x, y]) for x in range(n) for y in range(n) if model.t[x, y] != 0]

    def action(w):
        out = []
        for x, y, txy in bonds:
            for s in (UP, DN):
                r = apply_ladder(w, _mode(n, y, s), create=False)
                if r is None:
                    continue
                r2 = apply_ladder(r[1], _mode(n, x, s), create=True)
                if r2 is None:
                    continue
                out.append((txy * r[0] * r2[0], r2[1]))
        return out

    return _fermion_matrix(basis, basis, action)


def _coulomb_fermion(model: ModelSpec, basis: SectorBasis, U=None) -> sp.csr_matrix:
    U = model.U if U is None else U

    def fn(cfg, n):
        q = occupations(cfg, n) - 1.0
        return 0.5 * q @ U @ q

    return _fermion_diag(basis, fn)


def hubbard_fermion_part(model: ModelSpec, basis: SectorBasis, U=None) -> sp.csr_matrix:
    h = _hopping_fermion(model, basis) + _coulomb_fermion(model, basis, U)
    h.sum_duplicates()
    return h.tocsr()


# -- phonons -----------------------------------------------------------------


def _phonon_lowering(basis: SectorBasis, x: int) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for j, p in enumerate(basis.phonon_states):
        if p[x] == 0:
            continue
        q = p[:x] + (p[x] - 1,) + p[x + 1:]
        rows.append(basis.phonon_index(q))
        cols.append(j)
        vals.append(np.sqrt(p[x]))
    n = basis.n_phonon
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=float)


def phonon_annihilator(x: int, basis: SectorBasis) -> sp.csr_matrix:
    """b_x on the truncated space; its transpose is the truncated b_x^dagger."""
    return sp.kron(sp.identity(basis.n_fermion, format="csr"), _phonon_lowering(basis, x),
                   format="csr")


def phonon_number(basis: SectorBasis) -> sp.csr_matrix:
    d = np.array(basis.phonon_totals(), dtype=float)
    return sp.kron(sp.identity(basis.n_fermion, format="csr"), sp.diags(d), format="csr")


# -- Hamiltonians ------------------------------------------------------------


def _filling(basis: SectorBasis) -> float:
    if basis.key is None:
        raise SectorMismatch("the displaced frame needs a fixed electron number")
    return basis.key.n_el / basis.n_sites


def _coupling_density(basis: SectorBasis, frame: str):
    """Electron density the phonons couple to: n_x (bare) or n_x - nu
    (displaced, nu = filling)."""
    if frame == "bare":
        return lambda cfg, n: occupations(cfg, n)
    if frame == "displaced":
        nu = _filling(basis)
        return lambda cfg, n: occupations(cfg, n) - nu
    raise ValueError(f"unknown frame {frame!r}")


def assemble_hh_hamiltonian(model: ModelSpec, basis: SectorBasis, frame: str = "bare") -> sp.csr_matrix:
    """Holstein-Hubbard Hamiltonian restricted to ``basis``.

    ``frame="displaced"`` conjugates by the electron-independent coherent
    shift b_y -> b_y - c_y, c_y = nu sum_x g_xy / omega.  The spectrum is
    unchanged for an untruncated phonon space, but the phonons then couple
    only to density fluctuations and the cutoff converges much faster.
    """
    if basis.n_sites != model.n_sites:
        raise SectorMismatch("basis and model have different site counts")
    density = _coupling_density(basis, frame)
    h = lift(hubbard_fermion_part(model, basis), basis)
    h = h + model.omega * phonon_number(basis)
    if frame == "displaced":
        c = _filling(basis) * model.g.sum(axis=0) / model.omega
        shift = _fermion_diag(
            basis, lambda cfg, n: model.omega * (c @ c) - 2.0 * c @ (model.g.T @ occupations(cfg, n)))
        h = h + lift(shift, basis)
    for y in range(model.n_sites):
        gy = model.g[:, y]
        if not np.any(gy):
            continue
        lam = _fermion_diag(basis, lambda cfg, n: gy @ density(cfg, n))
        b = _phonon_lowering(basis, y)
        h = h + sp.kron(lam, b + b.T, format="csr")
    h = h.tocsr()
    h.sum_duplicates()
    h.sort_indices()
    check_hermitian(h)
    return h


def assemble_hubbard(model: ModelSpec, basis: SectorBasis, U=None) -> sp.csr_matrix:
    """Extended Hubbard Hamiltonian on the fermion factor of ``basis``.

    ``U`` overrides the model's Coulomb matrix (used for the large-U scans).
    """
    if basis.n_sites != model.n_sites:
        raise SectorMismatch("basis and model have different site counts")
    h = hubbard_fermion_part(model, basis, U)
    h.sort_indices()
    check_hermitian(h)
    return h


def _spin_basis_sz(n_sites: int, state: int, x: int) -> float:
    return 0.5 if (state >> x) & 1 else -0.5


def assemble_heisenberg(J, n_sites: int | None = None) -> sp.csr_matrix:
    """sum over ordered pairs (x, y) of J_xy (S_x . S_y - 1/4) on the
    2**n spin space.  Bit x of a basis index set means spin up on site x."""
    J = np.asarray(J, dtype=float)
    n = J.shape[0] if n_sites is None else n_sites
    if not np.array_equal(J, J.T):
        raise NotHermitian("J must be symmetric")
    if np.any(J < 0):
        raise ValueError("J must be nonnegative")
    dim = 1 << n
    rows, cols, vals = [], [], []
    for s in range(dim):
        diag = 0.0
        for x in range(n):
            for y in range(n):
                jxy = J[x, y]
                if jxy == 0:
                    continue
                if x == y:
                    diag += jxy * 0.5  # S_x . S_x = 3/4
                    continue
                zx, zy = _spin_basis_sz(n, s, x), _spin_basis_sz(n, s, y)
                diag += jxy * (zx * zy - 0.25)
                if zx != zy:
                    rows.append(s ^ (1 << x) ^ (1 << y))
                    cols.append(s)
                    vals.append(0.5 * jxy)
        rows.append(s)
        cols.append(s)
        vals.append(diag)
    h = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    h.sum_duplicates()
    h.eliminate_zeros()
    return h


def heisenberg_total_spin(n_sites: int) -> sp.csr_matrix:
    """S_tot^2 on the 2**n spin space."""
    ones = np.ones((n_sites, n_sites))
    # sum_{x,y} S_x.S_y = sum_{x,y}(S_x.S_y - 1/4) + n^2/4, diagonal terms give 3n/4
    h = assemble_heisenberg(ones, n_sites)
    return (h + (n_sites ** 2 / 4) * sp.identity(1 << n_sites)).tocsr()


# -- spin --------------------------------------------------------------------


def _spin_raise_fermion(src: SectorBasis, dst: SectorBasis, weights) -> sp.csr_matrix:
    n = src.n_sites

    def action(w):
        out = []
        for x in range(n):
            if weights[x] == 0:
                continue
            r = apply_ladder(w, _mode(n, x, DN), create=False)
            if r is None:
                continue
            r2 = apply_ladder(r[1], _mode(n, x, UP), create=True)
            if r2 is None:
                continue
            out.append((weights[x] * r[0] * r2[0], r2[1]))
        return out

    return _fermion_matrix(src, dst, action)


def _raise_target(basis: SectorBasis) -> SectorBasis | None:
    try:
        return basis.neighbor(dtwoM=2)
    except EmptySector:
        return None


def spin_raiser(basis: SectorBasis, weights=None, to_basis: SectorBasis | None = None):
    """sum_x w_x S^+_x mapping ``basis`` to its M+1 neighbour.

    Returns ``None`` when the M+1 sector is empty.
    """
    if to_basis is None:
        to_basis = _raise_target(basis)
        if to_basis is None:
            return None
    _check_same_cutoff(basis, to_basis)
    w = np.ones(basis.n_sites) if weights is None else np.asarray(weights, dtype=float)
    return lift(_spin_raise_fermion(basis, to_basis, w), basis)


def site_spin_raiser(x: int, basis: SectorBasis, to_basis: SectorBasis | None = None):
    w = np.zeros(basis.n_sites)
    w[x] = 1.0
    return spin_raiser(basis, w, to_basis)


def staggered_spin_raiser(basis: SectorBasis, which: str = "uniform", gamma=None):
    """|sites|^{-1/2} sum_x w_x S^+_x with w = 1 (uniform) or the sublattice
    sign (staggered, ``gamma`` required)."""
    n = basis.n_sites
    if which == "uniform":
        w = np.ones(n)
    elif which == "staggered":
        if gamma is None:
            raise ValueError("staggered raiser needs the sublattice signs")
        w = np.asarray(gamma, dtype=float)
    else:
        raise ValueError(f"unknown raiser {which!r}")
    op = spin_raiser(basis, w / np.sqrt(n))
    return op


def _total_spin_fermion(basis: SectorBasis) -> sp.csr_matrix:
    n = basis.n_sites
    sz = _fermion_diag(basis, lambda cfg, n: 0.5 * (_popcount(cfg.up) - _popcount(cfg.dn)))
    ones = np.ones(n)
    s2 = sz @ sz
    if basis.key is None:
        sp_ = _spin_raise_fermion(basis, basis, ones)
        s2 = s2 + 0.5 * (sp_ @ sp_.T + sp_.T @ sp_)
    else:
        upper = _raise_target(basis)
        if upper is not None:
            sp_ = _spin_raise_fermion(basis, upper, ones)
            s2 = s2 + 0.5 * (sp_.T @ sp_)  # S^- S^+
        try:
            lower = basis.neighbor(dtwoM=-2)
        except EmptySector:
            lower = None
        if lower is not None:
            sp_ = _spin_raise_fermion(lower, basis, ones)
            s2 = s2 + 0.5 * (sp_ @ sp_.T)  # S^+ S^-
    s2 = s2.tocsr()
    s2.sum_duplicates()
    return s2


def spin_operators(basis: SectorBasis) -> dict:
    """S3 (diagonal), S+ into the M+1 neighbour (None if empty) and
    S_tot^2 = (S3)^2 + (S+S- + S-S+)/2 on ``basis``."""
    sz = lift(_fermion_diag(basis, lambda cfg, n: 0.5 * (_popcount(cfg.up) - _popcount(cfg.dn))),
              basis)
    return {
        "S3": sz,
        "Splus": spin_raiser(basis),
        "Stot2": lift(_total_spin_fermion(basis), basis),
    }


def total_spin_squared(basis: SectorBasis) -> sp.csr_matrix:
    return lift(_total_spin_fermion(basis), basis)


def spin_from_s2(s2: float) -> float:
    """Solve S(S+1) = s2 for S >= 0."""
    return 0.5 * (-1.0 + np.sqrt(1.0 + 4.0 * max(s2, 0.0)))


# -- charge ------------------------------------------------------------------


def site_charge(x: int, basis: SectorBasis) -> sp.csr_matrix:
    """q_x = n_x - 1."""
    return lift(_fermion_diag(basis, lambda cfg, n: occupations(cfg, n)[x] - 1.0), basis)


def charge_operator(k, basis: SectorBasis, positions) -> sp.csr_matrix:
    """q_k = |sites|^{-1/2} sum_x exp(-i k.x) q_x (complex diagonal)."""
    pos = np.asarray(positions, dtype=float)
    if pos.ndim == 1:
        pos = pos[:, None]
    k = np.atleast_1d(np.asarray(k, dtype=float))
    phase = np.exp(-1j * pos @ k) / np.sqrt(basis.n_sites)
    d = np.array([phase @ (occupations(cfg, basis.n_sites) - 1.0)
                  for cfg in basis.fermion_states])
    # half filling: q_0 must vanish identically, keep exact zeros exact
    d[np.abs(d) < 1e-15] = 0.0
    return lift(sp.diags(d, format="csr"), basis)


# -- Lang-Firsov ---------------------------------------------------------------


def lang_firsov_generator(model: ModelSpec, basis: SectorBasis, theta: float = 1.0,
                          frame: str = "bare"):
    """L = (theta omega)^{-1} sum_{x,y} g_xy n_x (b_y^dagger - b_y), anti-Hermitian.

    In the displaced frame n_x is replaced by n_x - nu; the uniform part of
    the transformation is then already carried by the frame itself.
    """
    density = _coupling_density(basis, frame)
    scale = 1.0 / (theta * model.omega)
    out = sp.csr_matrix((basis.dimension, basis.dimension))
    for y in range(model.n_sites):
        gy = model.g[:, y]
        if not np.any(gy):
            continue
        lam = _fermion_diag(basis, lambda cfg, n: gy @ density(cfg, n))
        b = _phonon_lowering(basis, y)
        out = out + scale * sp.kron(lam, b.T - b, format="csr")
    return out.tocsr()


def lang_firsov_unitary(model: ModelSpec, basis: SectorBasis, theta: float = 1.0,
                        frame: str = "bare", max_dim: int = MAX_DENSE_EXP) -> sp.csr_matrix:
    """exp(L), computed blockwise: L is block diagonal in the fermion index
    and each block depends only on the site occupations."""
    if basis.dimension > max_dim:
        raise DimensionTooLarge(
            f"dense exponential limited to dimension {max_dim}, basis has {basis.dimension}")
    density = _coupling_density(basis, frame)
    scale = 1.0 / (theta * model.omega)
    lowering = [_phonon_lowering(basis, y).toarray() for y in range(model.n_sites)]

    @lru_cache(maxsize=None)
    def block(dens: tuple):
        lam = model.g.T @ np.array(dens, dtype=float)
        a = sum(scale * lam[y] * (lowering[y].T - lowering[y]) for y in range(model.n_sites))
        return scipy.linalg.expm(a)

    blocks = [block(tuple(density(cfg, basis.n_sites))) for cfg in basis.fermion_states]
    return sp.block_diag(blocks, format="csr")


# -- checks ------------------------------------------------------------------


def max_abs(a) -> float:
    a = a.tocoo() if sp.issparse(a) else np.asarray(a)
    data = a.data if sp.issparse(a) else a
    return float(np.max(np.abs(data), initial=0.0))


def hermiticity_defect(a) -> float:
    return max_abs(a - a.conj().T)


def check_hermitian(a, rtol: float = HERMITIAN_RTOL) -> None:
    defect = hermiticity_defect(a)
    if defect > rtol * max_abs(a):
        raise NotHermitian(f"Hermiticity defect {defect:.3e}")


def commutator_norm(a, b) -> float:
    return max_abs(a @ b - b @ a)
