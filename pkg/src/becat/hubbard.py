"""Bose-Hubbard Hamiltonian on a small ring or chain, and its ground state.

    H = -J sum_<i,j> a_i^dag a_j + (U/2) sum_i n_i (n_i - 1)

The hopping sum runs over ordered nearest-neighbour pairs so H is Hermitian.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError
from .fock import FockBasis, QuantumState, basis_build, lowering_map, raising_map
from .modes import QuasiMomentumParams, fock_basis_change, occupation_distribution, quasimomentum_matrix

log = logging.getLogger(__name__)

DENSE_LIMIT = 4000


class Boundary(str, Enum):
    PERIODIC = "periodic"
    OPEN = "open"


@dataclass(frozen=True)
class HamiltonianParams:
    n_sites: int
    total_atoms: int
    J: float = 1.0
    U: float = 0.0
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("need at least two sites")
        if self.total_atoms < 0:
            raise ValueError("total_atoms must be >= 0")
        if self.J < 0 or self.U < 0:
            raise ValueError("J and U must be non-negative (repulsive regime)")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    def bonds(self) -> list[tuple[int, int]]:
        """Unordered nearest-neighbour bonds; a two-site ring has one bond."""
        pairs = [(i, i + 1) for i in range(self.n_sites - 1)]
        if self.boundary is Boundary.PERIODIC and self.n_sites > 2:
            pairs.append((self.n_sites - 1, 0))
        return pairs


@dataclass(frozen=True)
class GroundState:
    energy: float
    state: QuantumState
    residual: float
    gap: float
    near_degenerate: bool


def _hop_matrix(n: int, total: int, i: int, j: int) -> sp.csr_matrix:
    """Sparse matrix of a_i^dag a_j within the sector."""
    rows, mid, f_low = lowering_map(n, total, j)
    up_targets, f_up = raising_map(n, total - 1, i)
    dim = len(basis_build(n, total))
    return sp.csr_matrix((f_low * f_up[mid], (up_targets[mid], rows)), shape=(dim, dim))


def build_hamiltonian(params: HamiltonianParams, basis: FockBasis) -> sp.csr_matrix:
    if basis.n_modes != params.n_sites or basis.total_atoms != params.total_atoms:
        raise ValueError(
            f"basis ({basis.n_modes} modes, {basis.total_atoms} atoms) does not match "
            f"{params.n_sites} sites, {params.total_atoms} atoms"
        )
    n, T = params.n_sites, params.total_atoms
    dim = basis.dimension
    occ = basis.occupations.astype(float)
    H = sp.diags(0.5 * params.U * (occ * (occ - 1)).sum(axis=1), format="csr", dtype=float)
    if T > 0 and params.J != 0:
        for i, j in params.bonds():
            hop = _hop_matrix(n, T, i, j)
            H = H - params.J * (hop + hop.T)
    H = H.tocsr()
    H.sum_duplicates()
    assert H.shape == (dim, dim)
    return H


def hermiticity_defect(H) -> float:
    d = (H - H.conj().T)
    return float(abs(d).max()) if d.nnz else 0.0


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    return vec * (abs(vec[k]) / vec[k])


def ground_state(H, basis: FockBasis, maxiter: int | None = None, tol: float = 1e-8) -> GroundState:
    """Lowest eigenpair of a Hermitian sector Hamiltonian.

    Dense ``eigh`` up to ``DENSE_LIMIT`` states, ARPACK Lanczos above.  The
    returned vector has its largest-magnitude amplitude real and positive.
    """
    dim = H.shape[0]
    if dim == 1:
        e = float(H.toarray()[0, 0].real)
        return GroundState(e, QuantumState(basis, np.ones(1, dtype=complex)), 0.0, np.inf, False)
    if dim <= DENSE_LIMIT:
        vals, vecs = scipy.linalg.eigh(H.toarray(), subset_by_index=[0, 1])
    else:
        try:
            vals, vecs = spla.eigsh(H, k=2, which="SA", tol=1e-12, maxiter=maxiter)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"Lanczos did not converge: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    vec = _fix_phase(vecs[:, 0].astype(complex))
    vec /= np.linalg.norm(vec)
    energy = float(np.vdot(vec, H @ vec).real)
    residual = float(np.linalg.norm(H @ vec - energy * vec))
    if residual > tol:
        raise ConvergenceError(f"ground-state residual {residual:.3e} exceeds {tol:.1e}")
    gap = float(vals[1] - vals[0])
    scale = max(float(abs(H).max()), 1e-300)
    near_degenerate = gap < 1e-10 * scale
    if near_degenerate:
        log.warning("ground state is near-degenerate (gap %.3e)", gap)
    return GroundState(energy, QuantumState(basis, vec), residual, gap, near_degenerate)


def solve(params: HamiltonianParams) -> GroundState:
    basis = basis_build(params.n_sites, params.total_atoms)
    return ground_state(build_hamiltonian(params, basis), basis)


def quasimomentum_profile(state: QuantumState, params: QuasiMomentumParams | None = None) -> np.ndarray:
    """P[N_alpha, N_beta] of a three-site state in the quasi-momentum basis."""
    params = params or QuasiMomentumParams(state.n_modes, 0.0)
    U = quasimomentum_matrix(params)
    return occupation_distribution(fock_basis_change(U, state))
