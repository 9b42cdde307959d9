"""Sequential far-field detection of atoms released from the lattice sites.

Detecting one atom at angle theta applies

    Omega(u) = n**-0.5 * sum_j exp(-i j u) a_j,      u = eta * theta,

to the state and renormalises.  The measurement depends on theta only
through ``u``, so ``u`` (wrapped to [-pi, pi)) is what gets sampled; the
recorded theta is ``u / eta`` for an eta drawn from F(eta).

Random numbers come from numpy's PCG64 generator seeded with the run seed.
Each detection draws eta first (nothing for a delta distribution, one
normal deviate per rejection attempt for a Gaussian, one uniform for a
table) and then exactly one uniform deviate for u.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fock import QuantumState, basis_build, lowering_map, normalize

DEFAULT_GRID = 1024
TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class EtaDistribution:
    """F(eta): ``delta`` (eta0), ``gaussian`` (mean, sd, truncated to eta > 0) or ``table``."""

    kind: str = "delta"
    params: tuple = (1.0,)
    weights: tuple = ()

    def __post_init__(self):
        if self.kind == "delta":
            (eta0,) = self.params
            if not eta0 > 0:
                raise ValueError("delta eta must be positive")
        elif self.kind == "gaussian":
            mean, sd = self.params
            if not (sd > 0 and math.isfinite(mean) and mean + 6 * sd > 0):
                raise ValueError("gaussian eta needs sd > 0 and non-negligible mass above zero")
        elif self.kind == "table":
            vals = np.asarray(self.params, dtype=float)
            w = np.asarray(self.weights, dtype=float)
            if len(vals) == 0 or vals.shape != w.shape:
                raise ValueError("table eta needs matching, non-empty values and weights")
            if np.any(vals <= 0) or np.any(w < 0) or w.sum() <= 0:
                raise ValueError("table eta needs positive values and non-negative weights")
        else:
            raise ValueError(f"unknown eta distribution kind {self.kind!r}")

    @classmethod
    def delta(cls, eta0: float = 1.0) -> EtaDistribution:
        return cls("delta", (float(eta0),))

    @classmethod
    def gaussian(cls, mean: float, sd: float) -> EtaDistribution:
        return cls("gaussian", (float(mean), float(sd)))

    @classmethod
    def table(cls, values, weights) -> EtaDistribution:
        return cls("table", tuple(map(float, values)), tuple(map(float, weights)))

    @classmethod
    def parse(cls, text: str) -> EtaDistribution:
        """Parse ``delta:1.0``, ``gauss:1.0,0.05`` or ``table:1,2;0.5,0.5``."""
        kind, _, rest = text.partition(":")
        kind = kind.strip().lower()
        try:
            if kind == "delta":
                return cls.delta(float(rest) if rest else 1.0)
            if kind in ("gauss", "gaussian"):
                mean, sd = (float(x) for x in rest.split(","))
                return cls.gaussian(mean, sd)
            if kind == "table":
                vals, _, wts = rest.partition(";")
                return cls.table([float(x) for x in vals.split(",")], [float(x) for x in wts.split(",")])
        except ValueError as exc:
            raise ValueError(f"bad eta distribution {text!r}: {exc}") from None
        raise ValueError(f"unknown eta distribution {text!r}")

    def spec(self) -> str:
        if self.kind == "delta":
            return f"delta:{self.params[0]!r}"
        if self.kind == "gaussian":
            return f"gauss:{self.params[0]!r},{self.params[1]!r}"
        return "table:" + ",".join(map(repr, self.params)) + ";" + ",".join(map(repr, self.weights))

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "delta":
            return self.params[0]
        if self.kind == "gaussian":
            mean, sd = self.params
            while True:
                eta = mean + sd * rng.standard_normal()
                if eta > 0:
                    return float(eta)
        w = np.asarray(self.weights, dtype=float)
        cdf = np.cumsum(w / w.sum())
        i = int(np.searchsorted(cdf, rng.random(), side="right"))
        return self.params[min(i, len(self.params) - 1)]


@dataclass(frozen=True)
class DetectionEvent:
    k: int
    u: float
    eta: float

    @property
    def theta(self) -> float:
        return self.u / self.eta


@dataclass
class DetectionRun:
    seed: int
    eta_dist: EtaDistribution
    initial_state: QuantumState
    final_state: QuantumState
    events: list[DetectionEvent] = field(default_factory=list)

    @property
    def n_detections(self) -> int:
        return len(self.events)


def detection_operator_coeffs(n_modes: int, u: float) -> np.ndarray:
    """Coefficient of a_j in Omega(u): exp(-i j u) / sqrt(n)."""
    if n_modes < 2:
        raise ValueError("need at least two modes")
    return np.exp(-1j * np.arange(n_modes) * u) / math.sqrt(n_modes)


def _lowered(state: QuantumState) -> np.ndarray:
    """Rows a_j |state> for every mode j, in the sector with one atom fewer."""
    n, T = state.n_modes, state.total_atoms
    out = np.zeros((n, len(basis_build(n, T - 1))), dtype=complex)
    for j in range(n):
        rows, targets, factors = lowering_map(n, T, j)
        out[j, targets] = factors * state.amplitudes[rows]
    return out


def one_body_matrix(state: QuantumState) -> np.ndarray:
    """G[j, k] = <a_j^dag a_k>."""
    if state.total_atoms == 0:
        return np.zeros((state.n_modes, state.n_modes), dtype=complex)
    A = _lowered(state)
    return A.conj() @ A.T


def detection_expectation(state: QuantumState, u) -> np.ndarray:
    """<Omega(u)^dag Omega(u)> at the given points (unnormalised density)."""
    G = one_body_matrix(state)
    c = detection_operator_coeffs(state.n_modes, 0.0)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    phases = np.exp(-1j * np.outer(u, np.arange(state.n_modes))) * c
    return np.einsum("uj,jk,uk->u", phases.conj(), G, phases).real


def phase_grid(grid_points: int) -> np.ndarray:
    return -np.pi + TWO_PI * np.arange(grid_points) / grid_points


def detection_density(state: QuantumState, grid_points: int = DEFAULT_GRID) -> tuple[np.ndarray, np.ndarray]:
    """Normalised single-atom detection density on a uniform periodic u grid.

    Returns ``(u, density)``; the periodic trapezoidal integral of the
    density over [-pi, pi) is 1.
    """
    if state.total_atoms == 0:
        raise ValueError("no atoms left to detect")
    u = phase_grid(grid_points)
    dens = np.clip(detection_expectation(state, u), 0.0, None)
    dens /= dens.sum() * (TWO_PI / grid_points)
    return u, dens


def _inverse_cdf(u: np.ndarray, dens: np.ndarray, r: float) -> float:
    h = TWO_PI / len(u)
    cell = 0.5 * h * (dens + np.roll(dens, -1))
    cdf = np.concatenate([[0.0], np.cumsum(cell)])
    target = r * cdf[-1]
    i = int(np.searchsorted(cdf, target, side="right")) - 1
    i = min(max(i, 0), len(u) - 1)
    frac = (target - cdf[i]) / cell[i] if cell[i] > 0 else 0.0
    val = u[i] + h * frac
    return float(val - TWO_PI) if val >= np.pi else float(val)


def apply_detection(state: QuantumState, u: float) -> QuantumState:
    """Omega(u)|state>, unnormalised."""
    A = _lowered(state)
    c = detection_operator_coeffs(state.n_modes, u)
    return QuantumState(basis_build(state.n_modes, state.total_atoms - 1), c @ A)


def sample_detection(
    state: QuantumState,
    F: EtaDistribution,
    rng: np.random.Generator,
    k: int = 0,
    grid_points: int = DEFAULT_GRID,
) -> tuple[DetectionEvent, QuantumState]:
    """Draw one detection and return it with the normalised post-measurement state."""
    eta = F.sample(rng)
    grid, dens = detection_density(state, grid_points)
    u = _inverse_cdf(grid, dens, rng.random())
    post, _ = normalize(apply_detection(state, u))
    return DetectionEvent(k, u, eta), post


def run_sequence(
    state: QuantumState,
    n_detections: int,
    F: EtaDistribution | None = None,
    seed: int = 0,
    grid_points: int = DEFAULT_GRID,
) -> DetectionRun:
    if n_detections < 0 or n_detections > state.total_atoms:
        raise ValueError(f"cannot detect {n_detections} of {state.total_atoms} atoms")
    F = F or EtaDistribution.delta()
    rng = np.random.Generator(np.random.PCG64(seed))
    events = []
    current = state
    for k in range(n_detections):
        event, current = sample_detection(current, F, rng, k, grid_points)
        events.append(event)
    return DetectionRun(seed, F, state, current, events)


def replay(state: QuantumState, us) -> QuantumState:
    """Apply detections at the given u values (with renormalisation)."""
    for u in us:
        state, _ = normalize(apply_detection(state, u))
    return state
