"""Lattice and coupling specifications for the Holstein-Hubbard model.

Couplings are dense ``|sites| x |sites|`` real matrices.  Nothing here touches
the many-body Hilbert space; see :mod:`hhed.hilbert` and :mod:`hhed.ops`.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import (
    AsymmetricMatrix,
    DisconnectedLattice,
    NonPositiveOmega,
    NonRealResult,
    OddCycle,
    SameSublatticeHopping,
)

TAU_DEF = 1e-10
TAU_SUM = 1e-12
TAU_FFT = 1e-10


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelSpec:
    """Validated Holstein-Hubbard model on a finite bipartite lattice.

    ``sublattice[i]`` is ``"A"`` or ``"B"`` for ``sites[i]``.  ``positions``
    and ``k_points`` (the reciprocal mesh) are optional and only needed for
    momentum-resolved observables.
    """

    sites: tuple
    sublattice: tuple
    t: np.ndarray
    U: np.ndarray
    g: np.ndarray
    omega: float
    positions: np.ndarray | None = field(default=None, compare=False)
    k_points: np.ndarray | None = field(default=None, compare=False)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def gamma(self) -> np.ndarray:
        """+1 on sublattice A, -1 on B."""
        return np.array([1.0 if s == "A" else -1.0 for s in self.sublattice])

    @property
    def n_a(self) -> int:
        return sum(1 for s in self.sublattice if s == "A")

    @property
    def n_b(self) -> int:
        return self.n_sites - self.n_a

    @property
    def ground_spin(self) -> float:
        """Spin value ``||B| - |A|| / 2`` expected for the ground state."""
        return abs(self.n_b - self.n_a) / 2

    def with_omega(self, omega: float) -> "ModelSpec":
        return build_model(self.sites, self.sublattice, self.t, self.U, self.g,
                           omega, positions=self.positions, k_points=self.k_points)

    def with_couplings(self, *, t=None, U=None, g=None) -> "ModelSpec":
        return build_model(
            self.sites, self.sublattice,
            self.t if t is None else t,
            self.U if U is None else U,
            self.g if g is None else g,
            self.omega, positions=self.positions, k_points=self.k_points,
        )

    def permuted(self, perm: Sequence[int]) -> "ModelSpec":
        """Relabel sites: new site ``i`` is old site ``perm[i]``."""
        p = np.asarray(perm)
        pos = None if self.positions is None else self.positions[p]
        return build_model(
            [self.sites[i] for i in p],
            [self.sublattice[i] for i in p],
            self.t[np.ix_(p, p)], self.U[np.ix_(p, p)], self.g[np.ix_(p, p)],
            self.omega, positions=pos, k_points=self.k_points,
        )


def _check_symmetric(name: str, m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise AsymmetricMatrix(f"{name} must be square, got shape {m.shape}")
    if not np.array_equal(m, m.T):
        raise AsymmetricMatrix(f"{name} is not symmetric")


def bond_graph(t: np.ndarray) -> nx.Graph:
    t = np.asarray(t)
    graph = nx.Graph()
    graph.add_nodes_from(range(t.shape[0]))
    graph.add_edges_from(zip(*np.nonzero(np.triu(t))))
    # self-hopping is a bond too (it breaks bipartiteness)
    graph.add_edges_from((i, i) for i in range(t.shape[0]) if t[i, i] != 0)
    return graph


def check_bipartition(t, proposed=None, require_connected: bool = True) -> tuple:
    """Return the sublattice label ("A"/"B") of each site.

    With ``proposed`` given (sequence or site-index mapping of labels) the
    labels are validated against the bonds of ``t``.  Otherwise the bond
    graph is two-colored; in every connected component the lowest-index site
    gets "A".
    """
    t = np.asarray(t, dtype=float)
    _check_symmetric("t", t)
    n = t.shape[0]
    graph = bond_graph(t)

    if require_connected and n > 0 and not nx.is_connected(graph):
        raise DisconnectedLattice("bond graph is not connected")

    if proposed is not None:
        if isinstance(proposed, Mapping):
            labels = tuple(proposed[i] for i in range(n))
        else:
            labels = tuple(proposed)
        if len(labels) != n or any(lab not in ("A", "B") for lab in labels):
            raise SameSublatticeHopping("sublattice labels must be 'A' or 'B' for every site")
        for x, y in graph.edges:
            if labels[x] == labels[y]:
                raise SameSublatticeHopping(
                    f"hopping t[{x},{y}] = {t[x, y]} joins two sites of sublattice {labels[x]}")
        return labels

    if any(t[i, i] != 0 for i in range(n)):
        i = next(i for i in range(n) if t[i, i] != 0)
        raise SameSublatticeHopping(f"on-site hopping t[{i},{i}] = {t[i, i]}")
    labels = [None] * n
    for comp in nx.connected_components(graph):
        start = min(comp)
        labels[start] = "A"
        for u, v in nx.bfs_edges(graph, start):
            labels[v] = "B" if labels[u] == "A" else "A"
    for x, y in graph.edges:
        if labels[x] == labels[y]:
            raise OddCycle(f"bond graph contains an odd cycle through sites {x} and {y}")
    return tuple(labels)


def build_model(sites, sublattice, t, U, g, omega, positions=None, k_points=None) -> ModelSpec:
    """Validate inputs and return a :class:`ModelSpec`.

    ``sublattice`` may be ``None``, in which case it is computed from ``t``.
    Asymmetric input is rejected, never symmetrized.
    """
    t, U, g = (np.array(m, dtype=float) for m in (t, U, g))
    n = len(sites)
    for name, m in (("t", t), ("U", U), ("g", g)):
        _check_symmetric(name, m)
        if m.shape != (n, n):
            raise AsymmetricMatrix(f"{name} has shape {m.shape}, expected {(n, n)}")
    if not omega > 0:
        raise NonPositiveOmega(f"omega must be positive, got {omega}")

    if sublattice is not None and isinstance(sublattice, Mapping):
        index = {s: i for i, s in enumerate(sites)}
        sublattice = {index[s]: lab for s, lab in sublattice.items()}
    labels = check_bipartition(t, sublattice)

    if positions is not None:
        positions = _frozen(positions)
        if positions.ndim == 1:
            positions = _frozen(positions[:, None])
        if positions.shape[0] != n:
            raise ValueError(f"positions has {positions.shape[0]} rows, expected {n}")
    if k_points is not None:
        k_points = _frozen(k_points)
        if k_points.ndim == 1:
            k_points = _frozen(k_points[:, None])
    return ModelSpec(tuple(sites), labels, _frozen(t), _frozen(U), _frozen(g),
                     float(omega), positions, k_points)


def check_phonon_sum_rule(g, tol: float = TAU_SUM) -> dict:
    g = np.asarray(g, dtype=float)
    sums = g.sum(axis=0)
    holds = bool(sums.size == 0 or np.ptp(sums) <= tol)
    return {"holds": holds, "column_sums": sums}


def effective_interaction(model: ModelSpec) -> np.ndarray:
    """U_eff = U - (2/omega) g g^T."""
    m = model.g @ model.g.T
    m = 0.5 * (m + m.T)
    return model.U - (2.0 / model.omega) * m


class DefinitenessClass(enum.Enum):
    POSITIVE_DEFINITE = "PD"
    POSITIVE_SEMIDEFINITE = "PSD"
    INDEFINITE = "indefinite"


@dataclass(frozen=True)
class Definiteness:
    classification: DefinitenessClass
    min_eigenvalue: float

    @property
    def positive_definite(self) -> bool:
        return self.classification is DefinitenessClass.POSITIVE_DEFINITE

    @property
    def positive_semidefinite(self) -> bool:
        return self.classification is not DefinitenessClass.INDEFINITE


def definiteness(matrix, tol: float = TAU_DEF) -> Definiteness:
    m = np.asarray(matrix, dtype=float)
    _check_symmetric("matrix", m)
    eig = np.linalg.eigvalsh(m)
    lam = float(eig[0])
    scale = max(float(np.max(np.abs(eig))), 1.0)
    band = tol * scale
    if lam > band:
        cls = DefinitenessClass.POSITIVE_DEFINITE
    elif lam < -band:
        cls = DefinitenessClass.INDEFINITE
    else:
        cls = DefinitenessClass.POSITIVE_SEMIDEFINITE
    return Definiteness(cls, lam)


# -- translation-invariant couplings ---------------------------------------


@dataclass(frozen=True)
class FourierCouplingSpec:
    """Couplings specified by their lattice Fourier transforms.

    The lattice is ``{sum_j n_j a_j : n_j = -L+1..L}`` with periodic
    boundaries; the reciprocal mesh is ``{sum_j l_j b_j / (2L)}`` with the
    same index range, ``a_i . b_j = 2 pi delta_ij``.  ``G`` and ``U`` hold
    samples on the mesh with shape ``(2L,) * d`` indexed by ``l_j + L - 1``.
    """

    d: int
    L: int
    G: np.ndarray
    U: np.ndarray
    primitive_vectors: np.ndarray

    @classmethod
    def from_functions(cls, d: int, L: int, G: Callable | float, U: Callable | float,
                       primitive_vectors=None) -> "FourierCouplingSpec":
        a = np.eye(d) if primitive_vectors is None else np.asarray(primitive_vectors, float)
        ks = reciprocal_mesh(d, L, a)
        shape = (2 * L,) * d

        def sample(f):
            if callable(f):
                return np.array([f(k) for k in ks], dtype=float).reshape(shape)
            return np.full(shape, float(f))

        return cls.create(d, L, sample(G), sample(U), a)

    @classmethod
    def create(cls, d, L, G, U, primitive_vectors=None) -> "FourierCouplingSpec":
        if d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
        if L < 1:
            raise ValueError(f"linear size must be >= 1, got {L}")
        a = np.eye(d) if primitive_vectors is None else np.asarray(primitive_vectors, float)
        if a.shape != (d, d):
            raise ValueError(f"primitive vectors must have shape {(d, d)}")
        shape = (2 * L,) * d
        G = np.broadcast_to(np.asarray(G, dtype=float), shape).copy()
        U = np.broadcast_to(np.asarray(U, dtype=float), shape).copy()
        for name, f in (("G", G), ("U", U)):
            if not np.allclose(f, _reflect(f), atol=TAU_FFT, rtol=0):
                raise NonRealResult(f"{name}(k) is not even on the mesh")
        return cls(d, L, _frozen(G), _frozen(U), _frozen(a))

    @property
    def n_sites(self) -> int:
        return (2 * self.L) ** self.d


def _reflect(f: np.ndarray) -> np.ndarray:
    """Sample array of f(-k).  Index i stores l = i - L + 1, so -l maps to
    index (2L - 2 - i) mod 2L along each axis."""
    n = f.shape[0]
    idx = (n - 2 - np.arange(n)) % n
    out = f
    for axis in range(f.ndim):
        out = np.take(out, idx, axis=axis)
    return out


def lattice_indices(d: int, L: int) -> np.ndarray:
    """Integer coordinates n_j in -L+1..L, lexicographic order."""
    r = range(-L + 1, L + 1)
    return np.array(list(itertools.product(r, repeat=d)), dtype=int)


def reciprocal_mesh(d: int, L: int, primitive_vectors=None) -> np.ndarray:
    a = np.eye(d) if primitive_vectors is None else np.asarray(primitive_vectors, float)
    b = 2 * np.pi * np.linalg.inv(a).T
    ells = lattice_indices(d, L)
    return ells @ b / (2 * L)


def _inverse_transform(samples: np.ndarray, ks: np.ndarray, xs: np.ndarray) -> np.ndarray:
    diff = xs[:, None, :] - xs[None, :, :]
    phase = np.exp(1j * np.einsum("kd,xyd->kxy", ks, diff))
    m = np.einsum("k,kxy->xy", samples.ravel().astype(complex), phase) / len(ks)
    if np.max(np.abs(m.imag), initial=0.0) > TAU_FFT:
        raise NonRealResult(
            f"imaginary residue {np.max(np.abs(m.imag)):.3e} exceeds {TAU_FFT}")
    m = m.real
    m[np.abs(m) <= 1e-14 * max(1.0, np.abs(m).max())] = 0.0  # round-off from the phases
    return 0.5 * (m + m.T)


def nearest_neighbor_hopping(d: int, L: int, t0: float) -> np.ndarray:
    """Periodic nearest-neighbour hopping along each primitive direction."""
    ns = lattice_indices(d, L)
    index = {tuple(n): i for i, n in enumerate(ns)}
    size = 2 * L
    t = np.zeros((len(ns), len(ns)))
    for i, n in enumerate(ns):
        for j in range(d):
            m = n.copy()
            m[j] = (m[j] + L) % size - L + 1  # n_j + 1, wrapped into -L+1..L
            k = index[tuple(m)]
            if k != i:
                t[i, k] = t[k, i] = t0
    return t


@dataclass(frozen=True)
class FourierModel:
    g: np.ndarray
    U: np.ndarray
    positions: np.ndarray
    k_points: np.ndarray
    spec: FourierCouplingSpec

    def u_eff(self, omega: float) -> np.ndarray:
        """U_eff(k) = U(k) - (2/omega) G(k)^2 on the mesh, flattened."""
        return (self.spec.U - (2.0 / omega) * self.spec.G ** 2).ravel()


def fourier_model(spec: FourierCouplingSpec) -> FourierModel:
    ks = reciprocal_mesh(spec.d, spec.L, spec.primitive_vectors)
    xs = lattice_indices(spec.d, spec.L) @ spec.primitive_vectors
    g = _inverse_transform(spec.G, ks, xs)
    U = _inverse_transform(spec.U, ks, xs)
    return FourierModel(_frozen(g), _frozen(U), _frozen(xs), _frozen(ks), spec)


def forward_transform(matrix: np.ndarray, positions: np.ndarray, k_points: np.ndarray) -> np.ndarray:
    """f(k) = sum_y M_xy exp(-i k.(x - y)), averaged over x.

    Raises :class:`NonRealResult` if the matrix is not translation invariant
    (the per-row values disagree) or the result is not real.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 1:
        positions = positions[:, None]
    diff = positions[:, None, :] - positions[None, :, :]
    phase = np.exp(-1j * np.einsum("kd,xyd->kxy", k_points, diff))
    rows = np.einsum("xy,kxy->kx", matrix, phase)
    vals = rows.mean(axis=1)
    if np.max(np.abs(rows - vals[:, None]), initial=0.0) > TAU_FFT * max(1.0, np.abs(matrix).max()):
        raise NonRealResult("matrix is not translation invariant on this lattice")
    if np.max(np.abs(vals.imag), initial=0.0) > TAU_FFT:
        raise NonRealResult("transform has a non-negligible imaginary part")
    return vals.real
