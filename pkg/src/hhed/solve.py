"""Low-lying spectra, deflated resolvents and parameter sweeps."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import NoConvergence, NotHermitian
from .hilbert import SectorBasis, SectorKey, build_sector_basis
from .model import ModelSpec
from . import ops

DENSE_MAX_DIM = 2000
TAU_DEG = 1e-8
TAU_RES = 1e-10
TAU_SOLVE = 1e-9
TAU_SWEEP_ENERGY = 1e-6
TAU_SWEEP_CORRELATION = 1e-4
ENERGY_OBSERVABLES = frozenset({"E0", "E1", "gap"})
GUARD_SEED = 20240611


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    ground_vectors: np.ndarray  # columns span the ground space
    degeneracy: int
    solver: str
    residuals: np.ndarray
    iterations: int = 0

    @property
    def E0(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def gap(self) -> float:
        """Raw E1 - E0 (zero up to noise when the ground state is degenerate)."""
        if len(self.eigenvalues) < 2:
            return float("inf")
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    @property
    def excitation_gap(self) -> float:
        """Distance from E0 to the first level outside the ground cluster."""
        if len(self.eigenvalues) <= self.degeneracy:
            return float("inf")
        return float(self.eigenvalues[self.degeneracy] - self.eigenvalues[0])

    @property
    def ground_vector(self) -> np.ndarray:
        return self.ground_vectors[:, 0]


def _fix_sign(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    phase = v[i] / abs(v[i]) if v[i] != 0 else 1.0
    return v / phase


def _degeneracy(eigs: np.ndarray, tau: float) -> int:
    return int(np.sum(eigs - eigs[0] <= tau))


def dense_spectrum(h, n_eigenvalues: int = 2, tau_deg: float = TAU_DEG) -> SpectrumResult:
    a = h.toarray() if sp.issparse(h) else np.asarray(h)
    w, v = np.linalg.eigh(a)
    deg = _degeneracy(w, tau_deg)
    keep = max(n_eigenvalues, deg + 1)
    vecs = np.column_stack([_fix_sign(v[:, i]) for i in range(deg)])
    res = np.array([np.linalg.norm(a @ vecs[:, i] - w[0] * vecs[:, i]) for i in range(deg)])
    return SpectrumResult(w[:keep].copy(), vecs, deg, "dense", res)


def _orthogonalize(v: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    # two passes of classical Gram-Schmidt
    if not basis:
        return v
    q = np.column_stack(basis)
    for _ in range(2):
        v = v - q @ (q.conj().T @ v)
    return v


def lanczos_lowest(matvec: Callable, v0: np.ndarray, locked: list[np.ndarray], tol: float,
                   max_iter: int) -> tuple[float, np.ndarray, int]:
    """Lowest eigenpair of the operator restricted to the orthogonal
    complement of ``locked``, by Lanczos with full reorthogonalization.

    Converged when the Ritz residual ``beta_m |s_m|`` and the explicit
    residual are both below ``tol``.
    """
    v = _orthogonalize(np.asarray(v0, dtype=float if np.isrealobj(v0) else complex), locked)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise NoConvergence("start vector lies in the locked subspace")
    q = [v / nv]
    alphas: list[float] = []
    betas: list[float] = []
    total = 0
    while total < max_iter:
        w = matvec(q[-1])
        total += 1
        alpha = float(np.real(np.vdot(q[-1], w)))
        alphas.append(alpha)
        w = w - alpha * q[-1] - (betas[-1] * q[-2] if betas else 0)
        w = _orthogonalize(w, locked + q)
        beta = float(np.linalg.norm(w))
        m = len(alphas)
        if m == 1:
            evals, evecs = np.array(alphas), np.ones((1, 1))
        else:
            evals, evecs = scipy.linalg.eigh_tridiagonal(np.array(alphas), np.array(betas))
        s = evecs[:, 0]
        ritz_res = beta * abs(s[-1])
        breakdown = beta <= tol * 1e-3
        if ritz_res <= tol or breakdown:
            x = np.column_stack(q) @ s
            x = _orthogonalize(x, locked)
            x /= np.linalg.norm(x)
            theta = float(np.real(np.vdot(x, matvec(x))))
            res = np.linalg.norm(matvec(x) - theta * x)
            if res <= tol:
                return theta, x, total
            if breakdown:
                # invariant subspace exhausted without meeting tolerance: restart from Ritz vector
                q, alphas, betas = [x], [], []
                continue
        if beta == 0:
            break
        betas.append(beta)
        q.append(w / beta)
    raise NoConvergence(f"Lanczos did not converge in {max_iter} iterations")


def lanczos_spectrum(h, n_eigenvalues: int = 2, tau_deg: float = TAU_DEG,
                     tol: float | None = None, seed: int = GUARD_SEED) -> SpectrumResult:
    """Lowest eigenpairs by repeated locked Lanczos runs.

    Each run starts from the all-ones vector projected off the locked
    vectors.  A final run from a seeded random vector guards against a
    start vector that misses part of the low spectrum.
    """
    dim = h.shape[0]
    scale = ops.max_abs(h)
    tol = TAU_RES * max(scale, 1e-300) if tol is None else tol
    matvec = h.dot
    max_iter = 10 * dim
    rng = np.random.default_rng(seed)
    vals: list[float] = []
    vecs: list[np.ndarray] = []
    total = 0

    def run(v0):
        nonlocal total
        theta, x, it = lanczos_lowest(matvec, v0, vecs, tol, max_iter)
        total += it
        return theta, x

    def insert(theta, x):
        idx = int(np.searchsorted(vals, theta))
        vals.insert(idx, theta)
        vecs.insert(idx, x)

    def need_more():
        if len(vals) >= dim:
            return False
        if len(vals) < n_eigenvalues:
            return True
        return vals[-1] - vals[0] <= tau_deg  # ground cluster not yet closed

    def fill():
        ones = np.ones(dim)
        while need_more():
            start = _orthogonalize(ones, vecs)
            if np.linalg.norm(start) < 1e-8:
                start = rng.standard_normal(dim)
            insert(*run(start))

    def wanted():
        return min(max(n_eigenvalues, _degeneracy(np.array(vals), tau_deg) + 1), len(vals))

    fill()
    while len(vals) < dim:
        # guard: nothing in the unlocked complement may sit below the kept levels
        theta, x = run(rng.standard_normal(dim))
        if theta < vals[wanted() - 1] - tau_deg:
            insert(theta, x)
            fill()
        else:
            break
    k = wanted()
    del vals[k:], vecs[k:]

    eigs = np.array(vals)
    deg = _degeneracy(eigs, tau_deg)
    ground = np.column_stack(vecs[:deg])
    if deg > 1:
        # rotate to the eigenbasis of the ground block for a canonical frame
        ground, _ = np.linalg.qr(ground)
    ground = np.column_stack([_fix_sign(ground[:, i]) for i in range(deg)])
    res = np.array([np.linalg.norm(h @ ground[:, i] - eigs[0] * ground[:, i]) for i in range(deg)])
    return SpectrumResult(eigs, ground, deg, "lanczos", res, total)


def ground_spectrum(h, n_eigenvalues: int = 2, max_dense: int = DENSE_MAX_DIM,
                    tau_deg: float = TAU_DEG, solver: str | None = None) -> SpectrumResult:
    """Dense diagonalization up to ``max_dense`` rows, Lanczos above."""
    if h.shape[0] != h.shape[1]:
        raise NotHermitian("operator is not square")
    scale = ops.max_abs(h)
    if ops.hermiticity_defect(h) > ops.HERMITIAN_RTOL * scale:
        raise NotHermitian("operator is not Hermitian")
    if solver is None:
        solver = "dense" if h.shape[0] <= max_dense else "lanczos"
    if solver == "dense":
        return dense_spectrum(h, n_eigenvalues, tau_deg)
    if solver == "lanczos":
        return lanczos_spectrum(sp.csr_matrix(h), n_eigenvalues, tau_deg)
    raise ValueError(f"unknown solver {solver!r}")


def deflated_resolvent_apply(h, E0: float, ground, v, tol: float = TAU_SOLVE,
                             max_iter: int | None = None) -> np.ndarray:
    """Solve (H - E0) x = (1 - P0) v with P0 x = 0.

    Conjugate gradients on (1-P0)(H-E0)(1-P0), which is positive definite on
    the deflated subspace; the projection is reapplied to every iterate.
    """
    g = np.asarray(ground)
    if g.ndim == 1:
        g = g[:, None]
    v = np.asarray(v)
    dtype = np.result_type(v.dtype, g.dtype, getattr(h, "dtype", float))

    def project(u):
        for _ in range(2):
            u = u - g @ (g.conj().T @ u)
        return u

    def apply(u):
        return project(h @ u - E0 * u)

    vnorm = np.linalg.norm(v)
    b = project(v.astype(dtype))
    x = np.zeros_like(b)
    if vnorm == 0 or np.linalg.norm(b) == 0:
        return x
    target = tol * vnorm
    max_iter = 10 * len(v) if max_iter is None else max_iter
    r = b.copy()
    p = r.copy()
    rr = np.real(np.vdot(r, r))
    for it in range(max_iter):
        ap = apply(p)
        pap = np.real(np.vdot(p, ap))
        if pap <= 0:
            raise NoConvergence("deflated operator is not positive on the search direction")
        alpha = rr / pap
        x = project(x + alpha * p)
        r = r - alpha * ap
        if it % 20 == 19:
            r = b - apply(x)  # refresh against drift
        rr_new = np.real(np.vdot(r, r))
        if np.sqrt(rr_new) <= target:
            true = np.linalg.norm(h @ x - E0 * x - b)
            if true <= target:
                return x
            r = b - apply(x)
            rr_new = np.real(np.vdot(r, r))
        p = project(r + (rr_new / rr) * p)
        rr = rr_new
    raise NoConvergence(f"deflated CG did not reach {tol:.1e} in {max_iter} iterations")


# -- sweeps -------------------------------------------------------------------


@dataclass
class SweepResult:
    parameter: str
    grid: list
    values: dict = field(default_factory=dict)
    converged: bool = False
    tolerances: dict = field(default_factory=dict)
    trends: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [{self.parameter: p, **{k: v[i] for k, v in self.values.items()}}
                for i, p in enumerate(self.grid)]

    def last(self, name: str):
        return self.values[name][-1]


def _check_grid(grid: Sequence) -> list:
    grid = list(grid)
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("sweep grid must be nonempty and strictly increasing")
    return grid


def _tolerance(name: str) -> float:
    return TAU_SWEEP_ENERGY if name in ENERGY_OBSERVABLES else TAU_SWEEP_CORRELATION


def _converged(values: Mapping[str, list], tolerances: Mapping[str, float]) -> bool:
    for name, vals in values.items():
        if len(vals) < 2:
            return False
        a, b = vals[-2], vals[-1]
        if np.isinf(a) and np.isinf(b):
            continue
        if not abs(b - a) <= tolerances[name]:
            return False
    return True


def _monotone(vals: Sequence[float]) -> str:
    d = np.diff(vals)
    if np.all(d > 0):
        return "increasing"
    if np.all(d < 0):
        return "decreasing"
    if np.all(d >= 0):
        return "nondecreasing"
    if np.all(d <= 0):
        return "nonincreasing"
    return "mixed"


@dataclass
class SolveContext:
    """What an observable callback sees at one sweep point."""

    model: ModelSpec
    basis: SectorBasis
    hamiltonian: object
    spectrum: SpectrumResult


def _builtin_observable(name: str) -> Callable[[SolveContext], float]:
    if name == "E0":
        return lambda c: c.spectrum.E0
    if name == "E1":
        return lambda c: float(c.spectrum.eigenvalues[1])
    if name == "gap":
        return lambda c: c.spectrum.gap
    if name == "S2":
        return lambda c: expectation(ops.total_spin_squared(c.basis), c.spectrum.ground_vector)
    raise KeyError(f"unknown observable {name!r}")


def expectation(op, v: np.ndarray) -> float:
    return float(np.real(np.vdot(v, op @ v)))


def solve_sector(model: ModelSpec, key: SectorKey, n_eigenvalues: int = 2,
                 max_dense: int = DENSE_MAX_DIM, frame: str = "bare") -> SolveContext:
    basis = build_sector_basis(model.n_sites, key)
    h = ops.assemble_hh_hamiltonian(model, basis, frame)
    return SolveContext(model, basis, h, ground_spectrum(h, n_eigenvalues, max_dense))


def cutoff_sweep(model: ModelSpec, n_el: int, twoM: int, observables, grid: Sequence[int],
                 max_dense: int = DENSE_MAX_DIM, frame: str = "bare") -> SweepResult:
    """Recompute observables for each phonon cutoff in ``grid``.

    ``observables`` maps names to callbacks on :class:`SolveContext`; plain
    names E0, E1, gap and S2 are built in.
    """
    grid = _check_grid(grid)
    if not isinstance(observables, Mapping):
        observables = {name: _builtin_observable(name) for name in observables}
    values = {name: [] for name in observables}
    for n_ph in grid:
        ctx = solve_sector(model, SectorKey(n_el, twoM, n_ph), max_dense=max_dense, frame=frame)
        for name, fn in observables.items():
            values[name].append(float(fn(ctx)))
    tols = {name: _tolerance(name) for name in values}
    return SweepResult("n_ph_max", grid, values, _converged(values, tols), tols,
                       {k: _monotone(v) for k, v in values.items() if len(v) > 1})


def lang_firsov_frame_overlap(model_theta: ModelSpec, basis: SectorBasis, theta_ground,
                              reference: np.ndarray, theta: float = 1.0,
                              frame: str = "bare") -> float:
    """Norm of the projection of ``reference`` onto exp(L) (ground space).

    ``model_theta`` already carries the scaled phonon energy, so the
    generator uses theta = 1 on it unless told otherwise.
    """
    u = ops.lang_firsov_unitary(model_theta, basis, theta, frame)
    g = np.asarray(theta_ground)
    if g.ndim == 1:
        g = g[:, None]
    lf = u @ g
    return float(np.linalg.norm(lf.conj().T @ reference))


def hubbard_ground(model: ModelSpec, n_el: int, twoM: int, max_dense: int = DENSE_MAX_DIM):
    basis = build_sector_basis(model.n_sites, SectorKey(n_el, twoM, 0))
    h = ops.assemble_hubbard(model, basis)
    return basis, ground_spectrum(h, 2, max_dense)


def embed_vacuum(vec: np.ndarray, basis: SectorBasis) -> np.ndarray:
    """psi (x) Omega in a basis with phonons; phonon index 0 is the vacuum."""
    out = np.zeros(basis.dimension, dtype=vec.dtype)
    out[:: basis.n_phonon] = vec
    return out


def theta_sweep(model: ModelSpec, n_el: int, twoM: int, thetas: Sequence[float], n_ph_max: int,
                max_dense: int = DENSE_MAX_DIM, frame: str = "bare") -> SweepResult:
    """Scale omega by theta and track the spectrum, spin and the overlap of
    the Lang-Firsov-frame ground state with the Hubbard ground state times
    the phonon vacuum."""
    thetas = _check_grid(thetas)
    if thetas[0] < 1:
        raise ValueError("theta grid must start at >= 1")
    hb, hspec = hubbard_ground(model, n_el, twoM, max_dense)
    reference = None
    values = {"E0": [], "E1": [], "gap": [], "S2": [], "overlap": [], "E0_hubbard": []}
    for theta in thetas:
        m = model.with_omega(theta * model.omega)
        ctx = solve_sector(m, SectorKey(n_el, twoM, n_ph_max), max_dense=max_dense, frame=frame)
        if reference is None:
            reference = embed_vacuum(hspec.ground_vector, ctx.basis)
        values["E0"].append(ctx.spectrum.E0)
        values["E1"].append(float(ctx.spectrum.eigenvalues[1]))
        values["gap"].append(ctx.spectrum.gap)
        values["S2"].append(expectation(ops.total_spin_squared(ctx.basis), ctx.spectrum.ground_vector))
        values["overlap"].append(lang_firsov_frame_overlap(
            m, ctx.basis, ctx.spectrum.ground_vectors, reference, frame=frame))
        values["E0_hubbard"].append(hspec.E0)
    tols = {name: _tolerance(name) for name in values}
    return SweepResult("theta", thetas, values, _converged(values, tols), tols,
                       {k: _monotone(v) for k, v in values.items() if k != "E0_hubbard"})
