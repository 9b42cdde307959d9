"""Fixed-total-number bosonic Fock space.

A :class:`FockBasis` enumerates every occupation vector of ``n_modes``
modes holding ``total_atoms`` atoms in lexicographically *descending*
order, e.g. for two modes and two atoms::

    (2, 0), (1, 1), (0, 2)

Indices are computed in closed form (combinatorial number system), so
``index_of`` is vectorised and needs no lookup table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import AnnihilatedStateError

_INDEX_MAX = np.iinfo(np.intp).max


def sector_dimension(n_modes: int, total_atoms: int) -> int:
    """Number of occupation vectors, C(total + n - 1, n - 1)."""
    return math.comb(total_atoms + n_modes - 1, n_modes - 1)


def log_factorial(k: int) -> float:
    """ln(k!) without forming k!."""
    if k < 0:
        raise ValueError(f"log_factorial needs k >= 0, got {k}")
    return math.lgamma(k + 1)


def _enumerate(n_modes: int, total: int) -> np.ndarray:
    # table[t] is the sector (m, t) for the current count m of trailing modes.
    # Sector (m + 1, t) in descending order is table[0], table[1], ..., table[t]
    # stacked, with leading entries t, t - 1, ..., 0.
    table = [np.array([[t]], dtype=np.int64) for t in range(total + 1)]
    for level in range(n_modes - 1):
        lengths = np.array([len(x) for x in table])
        stacked = np.concatenate(table)
        ends = np.cumsum(lengths)
        last = level == n_modes - 2
        table = [
            np.column_stack([np.repeat(np.arange(t, -1, -1), lengths[: t + 1]), stacked[: ends[t]]])
            if not last or t == total else table[t]
            for t in range(total + 1)
        ]
    return table[total]


@dataclass(frozen=True, eq=False)
class FockBasis:
    """All occupation vectors of one (n_modes, total_atoms) sector."""

    n_modes: int
    total_atoms: int
    occupations: np.ndarray = field(repr=False)
    _binom: dict = field(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.occupations)

    def __len__(self) -> int:
        return self.dimension

    def __eq__(self, other):
        if not isinstance(other, FockBasis):
            return NotImplemented
        return (self.n_modes, self.total_atoms) == (other.n_modes, other.total_atoms)

    def __hash__(self):
        return hash((self.n_modes, self.total_atoms))

    def vector_at(self, i: int) -> tuple[int, ...]:
        return tuple(int(k) for k in self.occupations[i])

    def index_of(self, occ) -> int | np.ndarray:
        """Index of one occupation vector, or of each row of a 2D array.

        Rows are assumed to lie in this sector; use :meth:`contains` first
        if that is not guaranteed.
        """
        occ = np.asarray(occ, dtype=np.int64)
        single = occ.ndim == 1
        occ = np.atleast_2d(occ)
        n = self.n_modes
        remaining = np.full(len(occ), self.total_atoms, dtype=np.int64)
        idx = np.zeros(len(occ), dtype=np.int64)
        for i in range(n - 1):
            # vectors sharing the prefix but with a larger entry at position i
            # number C(R_i - n_i + n - i - 2, n - i - 1) (hockey-stick identity)
            b = n - i - 1
            idx += self._binom[b][remaining - occ[:, i] + b - 1]
            remaining -= occ[:, i]
        return int(idx[0]) if single else idx

    def contains(self, occ) -> bool:
        occ = np.asarray(occ)
        return occ.shape == (self.n_modes,) and bool(np.all(occ >= 0)) and int(occ.sum()) == self.total_atoms


@lru_cache(maxsize=64)
def basis_build(n_modes: int, total_atoms: int) -> FockBasis:
    """Build (and cache) the sector basis for ``n_modes`` and ``total_atoms``."""
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1, got {n_modes}")
    if total_atoms < 0:
        raise ValueError(f"total_atoms must be >= 0, got {total_atoms}")
    dim = sector_dimension(n_modes, total_atoms)
    if dim > _INDEX_MAX:
        raise OverflowError(f"sector dimension {dim} exceeds the index range")
    binom = {}
    for b in range(1, n_modes):
        # the largest argument reached is total + b - 1
        binom[b] = np.array([math.comb(a, b) for a in range(total_atoms + b)], dtype=np.int64)
    return FockBasis(n_modes, total_atoms, _enumerate(n_modes, total_atoms), binom)


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Complex amplitudes over a :class:`FockBasis`."""

    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.dimension,):
            raise ValueError(
                f"expected {self.basis.dimension} amplitudes, got shape {amps.shape}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_modes(self) -> int:
        return self.basis.n_modes

    @property
    def total_atoms(self) -> int:
        return self.basis.total_atoms

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def amplitude(self, occ) -> complex:
        return complex(self.amplitudes[self.basis.index_of(occ)])

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __add__(self, other: QuantumState) -> QuantumState:
        if other.basis != self.basis:
            raise ValueError("cannot add states from different sectors")
        return QuantumState(self.basis, self.amplitudes + other.amplitudes)

    def __sub__(self, other: QuantumState) -> QuantumState:
        if other.basis != self.basis:
            raise ValueError("cannot subtract states from different sectors")
        return QuantumState(self.basis, self.amplitudes - other.amplitudes)

    def __mul__(self, c) -> QuantumState:
        return QuantumState(self.basis, c * self.amplitudes)

    __rmul__ = __mul__


def fock_state(occ) -> QuantumState:
    """The single basis state ``|occ>``."""
    occ = tuple(int(k) for k in occ)
    basis = basis_build(len(occ), sum(occ))
    amps = np.zeros(basis.dimension, dtype=complex)
    amps[basis.index_of(occ)] = 1.0
    return QuantumState(basis, amps)


def vacuum(n_modes: int) -> QuantumState:
    return fock_state((0,) * n_modes)


@lru_cache(maxsize=64)
def lowering_map(n_modes: int, total_atoms: int, mode: int):
    """(source rows, target indices, sqrt(k)) for a_mode on this sector."""
    src = basis_build(n_modes, total_atoms)
    dst = basis_build(n_modes, total_atoms - 1)
    rows = np.flatnonzero(src.occupations[:, mode] > 0)
    occ = src.occupations[rows].copy()
    k = occ[:, mode].astype(float)
    occ[:, mode] -= 1
    return rows, dst.index_of(occ), np.sqrt(k)


@lru_cache(maxsize=64)
def raising_map(n_modes: int, total_atoms: int, mode: int):
    """(target indices, sqrt(k + 1)) for a_mode^dag on this sector."""
    src = basis_build(n_modes, total_atoms)
    dst = basis_build(n_modes, total_atoms + 1)
    occ = src.occupations.copy()
    k = occ[:, mode].astype(float)
    occ[:, mode] += 1
    return dst.index_of(occ), np.sqrt(k + 1.0)


def _check_mode(state: QuantumState, mode: int) -> None:
    if not 0 <= mode < state.n_modes:
        raise IndexError(f"mode {mode} out of range for {state.n_modes} modes")


def apply_annihilation(state: QuantumState, mode: int) -> QuantumState:
    """a_mode |state>, unnormalised, in the sector with one atom fewer."""
    _check_mode(state, mode)
    if state.total_atoms == 0:
        raise ValueError("cannot annihilate an atom in the vacuum sector")
    rows, targets, factors = lowering_map(state.n_modes, state.total_atoms, mode)
    out = np.zeros(sector_dimension(state.n_modes, state.total_atoms - 1), dtype=complex)
    out[targets] = factors * state.amplitudes[rows]
    return QuantumState(basis_build(state.n_modes, state.total_atoms - 1), out)


def apply_creation(state: QuantumState, mode: int) -> QuantumState:
    """a_mode^dag |state>, unnormalised, in the sector with one atom more."""
    _check_mode(state, mode)
    targets, factors = raising_map(state.n_modes, state.total_atoms, mode)
    dst = basis_build(state.n_modes, state.total_atoms + 1)
    out = np.zeros(dst.dimension, dtype=complex)
    out[targets] = factors * state.amplitudes
    return QuantumState(dst, out)


def normalize(state: QuantumState) -> tuple[QuantumState, float]:
    """Return the unit-norm state and the norm it had before."""
    norm = state.norm()
    if norm < 1e-300:
        raise AnnihilatedStateError(f"state norm {norm:.3e} is too small to normalise")
    return QuantumState(state.basis, state.amplitudes / norm), norm
