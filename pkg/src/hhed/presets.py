"""Named lattice geometries with on-site couplings U0 and g0."""

from __future__ import annotations

import re

import numpy as np

from .model import ModelSpec, build_model, lattice_indices, nearest_neighbor_hopping, reciprocal_mesh

PRESET_PATTERN = re.compile(r"^(chain|ring|star)(\d+)$|^(dimer|lieb-cell)$")


def _onsite(n, t, U0, g0, omega, sites, positions=None, k_points=None) -> ModelSpec:
    return build_model(sites, None, t, U0 * np.eye(n), g0 * np.eye(n), omega,
                       positions=positions, k_points=k_points)


def chain(n: int, t0=-1.0, U0=4.0, g0=0.0, omega=1.0) -> ModelSpec:
    t = np.zeros((n, n))
    for i in range(n - 1):
        t[i, i + 1] = t[i + 1, i] = t0
    return _onsite(n, t, U0, g0, omega, list(range(n)), positions=np.arange(n, dtype=float))


def ring(n: int, t0=-1.0, U0=4.0, g0=0.0, omega=1.0) -> ModelSpec:
    """Periodic ring of ``n = 2L`` sites at positions -L+1..L with its
    reciprocal mesh."""
    if n % 2 or n < 2:
        raise ValueError(f"ring needs an even number of sites >= 2, got {n}")
    L = n // 2
    t = nearest_neighbor_hopping(1, L, t0)
    xs = lattice_indices(1, L).astype(float)
    return _onsite(n, t, U0, g0, omega, [int(x) for x in xs[:, 0]],
                   positions=xs, k_points=reciprocal_mesh(1, L))


def star(n: int, t0=-1.0, U0=4.0, g0=0.0, omega=1.0) -> ModelSpec:
    """``n - 1`` leaves (listed first) bonded to one centre site."""
    if n < 2:
        raise ValueError("star needs at least 2 sites")
    t = np.zeros((n, n))
    t[: n - 1, n - 1] = t[n - 1, : n - 1] = t0
    sites = [f"a{i + 1}" for i in range(n - 1)] + ["b"]
    return _onsite(n, t, U0, g0, omega, sites)


def lieb_cell(t0=-1.0, U0=4.0, g0=0.0, omega=1.0) -> ModelSpec:
    """Two Lieb-lattice unit cells in an open ribbon: corner sites d1, d2
    and edge sites r1, u1, r2, u2 (|A| = 2, |B| = 4)."""
    sites = ["d1", "r1", "u1", "d2", "r2", "u2"]
    bonds = [("d1", "r1"), ("r1", "d2"), ("d1", "u1"), ("d2", "u2"), ("d2", "r2")]
    idx = {s: i for i, s in enumerate(sites)}
    t = np.zeros((6, 6))
    for a, b in bonds:
        t[idx[a], idx[b]] = t[idx[b], idx[a]] = t0
    return _onsite(6, t, U0, g0, omega, sites)


def preset_model(name: str, t0=-1.0, U0=4.0, g0=0.0, omega=1.0) -> ModelSpec:
    m = PRESET_PATTERN.match(name)
    if not m:
        raise KeyError(f"unknown preset {name!r}; expected chainN, ringN, starN, dimer or lieb-cell")
    kw = dict(t0=t0, U0=U0, g0=g0, omega=omega)
    if m.group(3) == "dimer":
        return chain(2, **kw)
    if m.group(3) == "lieb-cell":
        return lieb_cell(**kw)
    builder = {"chain": chain, "ring": ring, "star": star}[m.group(1)]
    return builder(int(m.group(2)), **kw)
