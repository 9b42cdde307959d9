"""Joint relative-phase distributions of three-mode states.

The relative phase state (with the common phase chi set to 0) is

    |phi_ba, phi_cb> = sum_{p,q,r} exp(i q phi_ba) exp(i r (phi_ba + phi_cb)) |p,q,r>

restricted to the state's own sector.  ``P = |<phi|psi>|^2`` is reported on
an M x M grid over [-pi, pi)^2 and scaled to have grid mean 1, so the
distribution of a single Fock state is identically 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detection import phase_grid
from .errors import NoCatStructureError
from .fock import QuantumState

DEFAULT_M = 256


@dataclass(frozen=True)
class PhaseGrid:
    """P[i, j] at phi_ba = phis[i], phi_cb = phis[j]."""

    values: np.ndarray

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def phis(self) -> np.ndarray:
        return phase_grid(self.M)

    @property
    def cell(self) -> float:
        return 2 * np.pi / self.M


@dataclass(frozen=True)
class CatPeaks:
    phi1: float
    phi2: float
    peak_height: float
    mirror_height: float
    separation: float
    degenerate: bool
    valley_ratio: float = float("nan")


def _require_three_modes(state: QuantumState) -> None:
    if state.n_modes != 3:
        raise ValueError("relative-phase distributions are defined here for three modes")


def _coefficient_table(state: QuantumState) -> np.ndarray:
    """B[s, r] = psi(T - s, s - r, r); s = q + r multiplies phi_ba, r multiplies phi_cb."""
    T = state.total_atoms
    occ = state.basis.occupations
    B = np.zeros((T + 1, T + 1), dtype=complex)
    B[occ[:, 1] + occ[:, 2], occ[:, 2]] = state.amplitudes
    return B


def phase_overlap(state: QuantumState, phi_ba: float, phi_cb: float, chi: float = 0.0) -> complex:
    """<phi_ba, phi_cb|psi> by direct summation over the sector."""
    _require_three_modes(state)
    p, q, r = state.basis.occupations.T
    phase = p * chi + q * (chi + phi_ba) + r * (chi + phi_ba + phi_cb)
    return complex(np.sum(np.exp(-1j * phase) * state.amplitudes))


def phase_distribution(state: QuantumState, M: int = DEFAULT_M) -> PhaseGrid:
    """|<phi_ba, phi_cb|psi>|^2 on an M x M grid, rescaled to mean 1."""
    _require_three_modes(state)
    if M < 16:
        raise ValueError("phase grid needs M >= 16")
    T = state.total_atoms
    phis = phase_grid(M)
    E = np.exp(-1j * np.outer(phis, np.arange(T + 1)))
    overlap = E @ _coefficient_table(state) @ E.T
    P = np.abs(overlap) ** 2
    return PhaseGrid(P / P.mean())


def swap_asymmetry(grid: PhaseGrid) -> float:
    """max |P(x, y) - P(y, x)| over the grid."""
    v = grid.values
    if v.shape[0] != v.shape[1]:
        raise ValueError("swap asymmetry needs a square grid")
    return float(np.max(np.abs(v - v.T)))


def _wrap(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


def _refine(v: np.ndarray, i: int, j: int) -> tuple[float, float]:
    """Sub-cell offsets of a maximum from 1D parabolas through its periodic neighbours."""
    M = v.shape[0]
    out = []
    for lo, mid, hi in (
        (v[(i - 1) % M, j], v[i, j], v[(i + 1) % M, j]),
        (v[i, (j - 1) % M], v[i, j], v[i, (j + 1) % M]),
    ):
        curv = lo - 2 * mid + hi
        out.append(0.5 * (lo - hi) / curv if curv < 0 else 0.0)
    return out[0], out[1]


def find_cat_peaks(grid: PhaseGrid, flat_ratio: float = 1.5) -> CatPeaks:
    """Locate (Phi1, Phi2) at the global maximum and read the mirror at (Phi2, Phi1)."""
    v = grid.values
    if v.max() / v.mean() <= flat_ratio:
        raise NoCatStructureError("no cat structure: phase distribution is flat")
    M = grid.M
    i, j = np.unravel_index(int(np.argmax(v)), v.shape)
    di, dj = _refine(v, i, j)
    phis = grid.phis
    phi1 = float(_wrap(phis[i] + di * grid.cell))
    phi2 = float(_wrap(phis[j] + dj * grid.cell))
    diff = float(abs(_wrap(phi1 - phi2)))
    # value on the swap diagonal halfway between the peaks; near 1 means the
    # two components overlap rather than forming separated lobes
    mid = float(_wrap(phi1 + 0.5 * _wrap(phi2 - phi1)))
    k = int(round((mid + np.pi) / grid.cell)) % M
    return CatPeaks(
        phi1=phi1,
        phi2=phi2,
        peak_height=float(v[i, j]),
        mirror_height=float(v[j, i]),
        separation=float(np.sqrt(2.0) * diff),
        degenerate=diff < 2 * grid.cell,
        valley_ratio=float(v[k, k] / v[i, j]),
    )
