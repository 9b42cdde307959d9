"""Quasi-momentum modes and exact Fock-space basis changes.

New modes are defined by a unitary ``U`` acting on the site annihilators,
``alpha_k = sum_j U[k, j] a_j``.  Inverting gives the site creators in terms
of the new ones, ``a_j^dag = sum_k U[k, j] alpha_k^dag``.

Two independent routes are provided:

* :func:`product_fock_in_new_basis` expands ``prod_j (a_j^dag)^N`` as a
  polynomial in the new creators (:class:`MonomialPoly`) and converts
  monomials to Fock amplitudes in the log domain.
* :func:`fock_basis_change` handles an arbitrary state by building the
  site-basis expansion of every new-mode Fock state with a ladder
  recursion and taking overlaps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import PrecisionLossError
from .fock import FockBasis, QuantumState, basis_build, raising_map


@dataclass(frozen=True)
class QuasiMomentumParams:
    n_modes: int = 3
    xi: float = 0.0

    def __post_init__(self):
        if self.n_modes < 2:
            raise ValueError("quasi-momentum modes need at least two sites")
        if not math.isfinite(self.xi):
            raise ValueError("xi must be finite")


def quasimomentum_matrix(params: QuasiMomentumParams) -> np.ndarray:
    """Unitary whose row j is the j-th quasi-momentum mode.

    ``U[j, k] = exp(-i k (xi - 2 pi j / n)) / sqrt(n)``; for three sites the
    rows are the alpha, beta and gamma modes (beta steps the phase by
    -2 pi/3 relative to alpha, gamma by +2 pi/3).
    """
    n = params.n_modes
    j = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    return np.exp(-1j * k * (params.xi - 2 * np.pi * j / n)) / math.sqrt(n)


def is_unitary(U: np.ndarray, atol: float = 1e-12) -> bool:
    U = np.asarray(U)
    return U.shape[0] == U.shape[1] and np.allclose(U.conj().T @ U, np.eye(len(U)), atol=atol, rtol=0)


class MonomialPoly:
    """Homogeneous polynomial in ``n_vars`` commuting variables.

    Coefficients are stored densely over the exponent vectors of a fixed
    total degree (the same enumeration as a Fock sector), multiplied by
    ``exp(log_scale)``.  Products are rescaled so that the largest
    coefficient magnitude is 1.
    """

    def __init__(self, n_vars: int, degree: int, coeffs, log_scale: float = 0.0):
        self.basis: FockBasis = basis_build(n_vars, degree)
        self.coeffs = np.asarray(coeffs, dtype=complex)
        if self.coeffs.shape != (self.basis.dimension,):
            raise ValueError("coefficient vector does not match the degree")
        self.log_scale = float(log_scale)

    @classmethod
    def linear(cls, coeffs) -> MonomialPoly:
        coeffs = np.asarray(coeffs, dtype=complex)
        n = len(coeffs)
        basis = basis_build(n, 1)
        # degree-1 exponents are unit vectors; map each variable to its index
        c = np.zeros(n, dtype=complex)
        c[basis.index_of(np.eye(n, dtype=np.int64))] = coeffs
        return cls(n, 1, c)

    @classmethod
    def one(cls, n_vars: int) -> MonomialPoly:
        return cls(n_vars, 0, [1.0])

    @property
    def n_vars(self) -> int:
        return self.basis.n_modes

    @property
    def degree(self) -> int:
        return self.basis.total_atoms

    def terms(self) -> dict[tuple[int, ...], complex]:
        """Nonzero terms with the scale factor folded in."""
        scale = math.exp(self.log_scale)
        return {
            self.basis.vector_at(i): complex(c * scale)
            for i, c in enumerate(self.coeffs)
            if c != 0
        }

    def _rescaled(self) -> MonomialPoly:
        peak = float(np.max(np.abs(self.coeffs))) if len(self.coeffs) else 0.0
        if peak == 0.0:
            return self
        return MonomialPoly(self.n_vars, self.degree, self.coeffs / peak, self.log_scale + math.log(peak))

    def __mul__(self, other: MonomialPoly) -> MonomialPoly:
        if other.n_vars != self.n_vars:
            raise ValueError("polynomials in different numbers of variables")
        big, small = (self, other) if len(self.coeffs) >= len(other.coeffs) else (other, self)
        out_basis = basis_build(self.n_vars, self.degree + other.degree)
        out = np.zeros(out_basis.dimension, dtype=complex)
        for i in np.flatnonzero(small.coeffs):
            shifted = big.basis.occupations + small.basis.occupations[i]
            out[out_basis.index_of(shifted)] += small.coeffs[i] * big.coeffs
        prod = MonomialPoly(self.n_vars, out_basis.total_atoms, out, self.log_scale + other.log_scale)
        return prod._rescaled()

    def power(self, N: int) -> MonomialPoly:
        """``self ** N`` by N successive multiplications."""
        if N < 0:
            raise ValueError("negative power")
        result = MonomialPoly.one(self.n_vars)
        for _ in range(N):
            result = result * self
        return result

    def to_fock_amplitudes(self, log_prefactor: float = 0.0) -> np.ndarray:
        """Amplitudes of ``prefactor * P(alpha^dag)|0>``.

        Monomial ``x^m`` becomes ``sqrt(prod m_k!) |m>``; magnitudes are
        assembled in the log domain to avoid overflow.
        """
        mag = np.abs(self.coeffs)
        nz = mag > 0
        out = np.zeros_like(self.coeffs)
        log_fact = 0.5 * gammaln(self.basis.occupations[nz] + 1.0).sum(axis=1)
        log_mag = np.log(mag[nz]) + log_fact + self.log_scale + log_prefactor
        out[nz] = np.exp(log_mag) * (self.coeffs[nz] / mag[nz])
        return out


def creators_in_new_basis(U: np.ndarray) -> list[MonomialPoly]:
    """Linear forms giving each site creator a_j^dag in the new creators."""
    U = np.asarray(U, dtype=complex)
    return [MonomialPoly.linear(U[:, j]) for j in range(U.shape[1])]


def product_fock_in_new_basis(U: np.ndarray, atoms_per_site: int) -> QuantumState:
    """The site state ``|N, ..., N>`` written in new-mode occupations.

    ``|N..N> = prod_j (a_j^dag)^N / sqrt(N!) |0>``; the bracket
    ``prod_j a_j^dag`` is expanded once and raised to the N-th power.
    """
    if atoms_per_site < 0:
        raise ValueError("atoms_per_site must be >= 0")
    U = np.asarray(U, dtype=complex)
    n = U.shape[0]
    bracket = MonomialPoly.one(n)
    for form in creators_in_new_basis(U):
        bracket = bracket * form
    poly = bracket.power(atoms_per_site)
    log_pref = -0.5 * n * math.lgamma(atoms_per_site + 1)
    amps = poly.to_fock_amplitudes(log_pref)
    norm = float(np.linalg.norm(amps))
    if abs(norm - 1.0) > 1e-6:
        raise PrecisionLossError(f"hat-state norm {norm!r} deviates from 1")
    return QuantumState(poly.basis, amps / norm)


@lru_cache(maxsize=4)
def _new_mode_expansions(U_bytes: bytes, n: int, total: int) -> np.ndarray:
    """Matrix M with M[m, s] = <s|m>_new for the whole sector.

    Built sector by sector: |m> = alpha_k^dag |m - e_k> / sqrt(m_k), with k the
    most occupied new mode, and alpha_k^dag = sum_j conj(U[k, j]) a_j^dag
    acting on site-basis rows.  Raising along a weakly occupied mode would
    amplify accumulated roundoff by up to sqrt(t) per step.
    """
    U = np.frombuffer(U_bytes, dtype=complex).reshape(n, n)
    M = np.ones((1, 1), dtype=complex)
    for t in range(1, total + 1):
        new = basis_build(n, t)
        prev = basis_build(n, t - 1)
        occ = new.occupations
        k_raise = np.argmax(occ, axis=1)
        out = np.zeros((new.dimension, new.dimension), dtype=complex)
        for k in range(n):
            rows = np.flatnonzero(k_raise == k)
            if len(rows) == 0:
                continue
            parent_occ = occ[rows].copy()
            parent_occ[:, k] -= 1
            parents = M[prev.index_of(parent_occ)]
            block = np.zeros((len(rows), new.dimension), dtype=complex)
            for j in range(n):
                targets, factors = raising_map(n, t - 1, j)
                block[:, targets] += np.conj(U[k, j]) * parents * factors
            out[rows] = block / np.sqrt(occ[rows, k])[:, None]
        M = out
    M.setflags(write=False)
    return M


def basis_change_matrix(U: np.ndarray, total_atoms: int) -> np.ndarray:
    """Sector matrix T with new-mode amplitudes = T @ site amplitudes."""
    U = np.ascontiguousarray(U, dtype=complex)
    return _new_mode_expansions(U.tobytes(), U.shape[0], total_atoms).conj()


def fock_basis_change(U: np.ndarray, state: QuantumState) -> QuantumState:
    """Re-express ``state`` in the occupations of the modes defined by ``U``."""
    U = np.asarray(U, dtype=complex)
    if U.shape != (state.n_modes, state.n_modes):
        raise ValueError(f"mode matrix shape {U.shape} does not match {state.n_modes} modes")
    out = basis_change_matrix(U, state.total_atoms) @ state.amplitudes
    n_in, n_out = state.norm(), float(np.linalg.norm(out))
    if abs(n_out - n_in) > 1e-6 * max(n_in, 1.0):
        raise PrecisionLossError(f"basis change changed the norm from {n_in!r} to {n_out!r}")
    return QuantumState(state.basis, out)


def occupation_distribution(state: QuantumState) -> np.ndarray:
    """P[N_alpha, N_beta] for a three-mode state; the third mode is implied."""
    if state.n_modes != 3:
        raise ValueError("the two-dimensional occupation projection needs exactly three modes")
    T = state.total_atoms
    occ = state.basis.occupations
    P = np.zeros((T + 1, T + 1))
    P[occ[:, 0], occ[:, 1]] = state.probabilities()
    return P


def hat_distribution(atoms_per_site: int, xi: float = 0.0) -> np.ndarray:
    """Quasi-momentum occupation distribution of the triple Fock state."""
    U = quasimomentum_matrix(QuasiMomentumParams(3, xi))
    return occupation_distribution(product_fock_in_new_basis(U, atoms_per_site))
