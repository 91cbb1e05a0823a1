"""Many-body bases: fermion occupation words times truncated phonon Fock states.

Fermion modes are ordered globally as (site 0, up), ..., (site n-1, up),
(site 0, down), ..., (site n-1, down).  A configuration stores the up and
down occupations as separate ``n``-bit integers; bit ``x`` is site ``x``.
Phonon states are truncated by the total phonon number.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import NamedTuple

from .errors import EmptySector


class FermionConfig(NamedTuple):
    up: int
    dn: int

    def word(self, n_sites: int) -> int:
        """Occupation of all 2n modes in the global mode order."""
        return self.up | (self.dn << n_sites)


PhononConfig = tuple  # occupation number per site


@dataclass(frozen=True)
class SectorKey:
    n_el: int
    twoM: int
    n_ph_max: int = 0

    def populations(self, n_sites: int) -> tuple[int, int]:
        if (self.n_el + self.twoM) % 2:
            raise EmptySector(f"n_el={self.n_el} and 2M={self.twoM} have different parity")
        n_up = (self.n_el + self.twoM) // 2
        n_dn = (self.n_el - self.twoM) // 2
        if not (0 <= n_up <= n_sites and 0 <= n_dn <= n_sites):
            raise EmptySector(
                f"sector n_el={self.n_el}, M={self.twoM / 2} is empty on {n_sites} sites")
        return n_up, n_dn

    @property
    def M(self) -> float:
        return self.twoM / 2

    def shifted(self, dtwoM: int = 0, dn_el: int = 0) -> "SectorKey":
        return SectorKey(self.n_el + dn_el, self.twoM + dtwoM, self.n_ph_max)


def _words(n_sites: int, count: int) -> list[int]:
    words = [sum(1 << i for i in c) for c in itertools.combinations(range(n_sites), count)]
    return sorted(words)


def enumerate_fermion_sector(n_sites: int, n_el: int, twoM: int) -> list[FermionConfig]:
    n_up, n_dn = SectorKey(n_el, twoM).populations(n_sites)
    ups, dns = _words(n_sites, n_up), _words(n_sites, n_dn)
    return [FermionConfig(u, d) for u in ups for d in dns]


def enumerate_full_fock(n_sites: int) -> list[FermionConfig]:
    r = range(1 << n_sites)
    return [FermionConfig(u, d) for u in r for d in r]


def _compositions(total: int, parts: int):
    """Vectors of ``parts`` nonnegative ints summing to ``total``, descending
    lexicographic order (so (1, 0) precedes (0, 1))."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_phonon_states(n_sites: int, n_ph_max: int) -> list[PhononConfig]:
    if n_ph_max < 0:
        raise ValueError("phonon cutoff must be nonnegative")
    return [c for n in range(n_ph_max + 1) for c in _compositions(n, n_sites)]


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Product basis, fermion index major and phonon index minor.

    ``key`` is ``None`` for the unrestricted fermion Fock space.
    """

    n_sites: int
    key: SectorKey | None
    fermion_states: tuple
    phonon_states: tuple
    n_ph_max: int
    _f_index: dict = field(repr=False)
    _p_index: dict = field(repr=False)

    @property
    def n_fermion(self) -> int:
        return len(self.fermion_states)

    @property
    def n_phonon(self) -> int:
        return len(self.phonon_states)

    @property
    def dimension(self) -> int:
        return self.n_fermion * self.n_phonon

    def fermion_index(self, config) -> int:
        return self._f_index[FermionConfig(*config)]

    def phonon_index(self, config) -> int:
        return self._p_index[tuple(config)]

    def index(self, fermion, phonon) -> int:
        return self.fermion_index(fermion) * self.n_phonon + self.phonon_index(phonon)

    def state_of(self, i: int) -> tuple[FermionConfig, PhononConfig]:
        f, p = divmod(i, self.n_phonon)
        return self.fermion_states[f], self.phonon_states[p]

    def contains(self, config) -> bool:
        return FermionConfig(*config) in self._f_index

    def phonon_totals(self) -> list[int]:
        return [sum(p) for p in self.phonon_states]

    def neighbor(self, dtwoM: int = 0, dn_el: int = 0) -> "SectorBasis":
        """Basis of the sector shifted by ``dtwoM`` and ``dn_el``; the full
        Fock basis is its own neighbour."""
        if self.key is None:
            return self
        return build_sector_basis(self.n_sites, self.key.shifted(dtwoM, dn_el))


def _make(n_sites, key, fstates, n_ph_max) -> SectorBasis:
    pstates = enumerate_phonon_states(n_sites, n_ph_max)
    return SectorBasis(
        n_sites, key, tuple(fstates), tuple(pstates), n_ph_max,
        {f: i for i, f in enumerate(fstates)},
        {p: i for i, p in enumerate(pstates)},
    )


def build_sector_basis(n_sites: int, key: SectorKey) -> SectorBasis:
    return _make(n_sites, key, enumerate_fermion_sector(n_sites, key.n_el, key.twoM), key.n_ph_max)


def full_fock_basis(n_sites: int, n_ph_max: int = 0) -> SectorBasis:
    return _make(n_sites, None, enumerate_full_fock(n_sites), n_ph_max)


def half_filling_key(n_sites: int, M: float = 0, n_ph_max: int = 0) -> SectorKey:
    return SectorKey(n_sites, int(round(2 * M)), n_ph_max)


def phonon_space_size(n_sites: int, n_ph_max: int) -> int:
    return comb(n_ph_max + n_sites, n_sites)
