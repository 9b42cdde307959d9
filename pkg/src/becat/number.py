"""Number-space signatures of a relative-phase cat, and the coherent-state pattern.

A cat of relative phases (Phi1, Phi2) and (Phi2, Phi1) has the joint number
distribution

    P(N_a, N_b) ~ |C|^2 (1 + cos[(T - N_b)(Phi1 - Phi2) + delta])

so fringes run along N_b with (Phi1 - Phi2) / 2 pi cycles per atom and are
flat along N_a.  :func:`fringe_analysis` measures this from the
distribution alone; the peaks only supply the prediction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .detection import replay
from .errors import DegeneratePeaksError, NoCatStructureError
from .fock import QuantumState
from .phase import CatPeaks, find_cat_peaks, phase_distribution


@dataclass(frozen=True)
class NumberDistribution:
    """P[N_a, N_b] for a three-mode sector of ``total`` atoms."""

    values: np.ndarray
    total: int


@dataclass(frozen=True)
class FringeReport:
    dominant_frequency_b: float
    contrast_b: float
    dominant_frequency_a: float
    predicted_frequency: float
    delta_estimate: float
    contrast_a: float
    spectral_peak_b: float
    spectral_bin: float

    @property
    def frequency_error_bins(self) -> float:
        return abs(self.dominant_frequency_b - self.predicted_frequency) / self.spectral_bin


def number_distribution(state: QuantumState) -> NumberDistribution:
    if state.n_modes != 3:
        raise ValueError("the (N_a, N_b) distribution needs exactly three modes")
    T = state.total_atoms
    occ = state.basis.occupations
    P = np.zeros((T + 1, T + 1))
    P[occ[:, 0], occ[:, 1]] = state.probabilities()
    return NumberDistribution(P, T)


def _wrap(x: float) -> float:
    return (x + math.pi) % (2 * math.pi) - math.pi


def _gauss(x, l0, m, s):
    return np.exp(np.minimum(l0 - 0.5 * ((x - m) / s) ** 2, 700.0))


def fringe_periodogram(profile: np.ndarray, total: int, rel_floor: float = 1e-10):
    """Envelope-normalised least-squares spectrum of a 1D number profile.

    ``profile[k]`` is the (summed) probability at k atoms.  The envelope g is
    the Gaussian with the profile's mean and variance; at each frequency
    f = k / (total + 1) the profile is fitted as g (p0 + p1 cos w + p2 sin w)
    with w = 2 pi f (total - x).  Returns ``(freqs, residual_cost, contrast)``
    where contrast = |(p1, p2)| / p0 and the f = 0 entry is the envelope alone.
    """
    x = np.arange(total + 1)
    keep = profile > rel_floor * profile.max()
    x, y = x[keep].astype(float), profile[keep]
    mu = y @ x / y.sum()
    sd = max(math.sqrt(y @ (x - mu) ** 2 / y.sum()), 0.5)
    g = _gauss(x, 0.0, mu, sd)
    freqs = np.arange(0, total // 2 + 1) / (total + 1)
    cost = np.empty(len(freqs))
    contrast = np.zeros(len(freqs))
    for i, f in enumerate(freqs):
        w = 2 * np.pi * f * (total - x)
        A = g[:, None] if f == 0 else np.stack([g, g * np.cos(w), g * np.sin(w)], axis=1)
        p, *_ = np.linalg.lstsq(A, y, rcond=None)
        r = y - A @ p
        cost[i] = 0.5 * r @ r
        if f > 0 and p[0] > 0:
            contrast[i] = min(math.hypot(p[1], p[2]) / p[0], 1.0)
    return freqs, cost, contrast


def _fit_profile(x, y, total, f0, half_width, f_floor=0.0):
    """Joint Gaussian-envelope and fringe fit of one profile; returns (cost, f, c)."""
    mu = y @ x / y.sum()
    sd = max(math.sqrt(y @ (x - mu) ** 2 / y.sum()), 0.5)
    lo = [-np.inf, -np.inf, 0.1, 0.0, max(f0 - half_width, f_floor), -np.inf]
    # stop at the last spectral bin; exactly f = 1/2 has no sine component
    hi = [np.inf, np.inf, np.inf, 1.0, min(f0 + half_width, (total // 2) / (total + 1)), np.inf]
    best = None
    for dl in np.linspace(-np.pi, np.pi, 4, endpoint=False):
        def resid(z):
            l0, m, s, c, f, d = z
            return _gauss(x, l0, m, s) * (1 + c * np.cos(2 * np.pi * f * (total - x) + d)) - y
        x0 = [math.log(y.max()), mu, sd, 0.5, min(max(f0, lo[4]), hi[4]), dl]
        r = least_squares(resid, x0, bounds=(lo, hi))
        if best is None or r.cost < best.cost:
            best = r
    return best.cost, best.x[4], best.x[3]


def _dominant(
    profile: np.ndarray, total: int, min_contrast: float, min_periods: float, candidates: int = 3
) -> tuple[float, float, float]:
    """(frequency, contrast, periodogram bin) of the strongest fringe.

    Frequency and bin are 0 if there is none.

    The periodogram's lowest-cost local minima are refitted with the envelope
    free, since the moment envelope is biased when the contrast is high.  Only
    frequencies completing ``min_periods`` periods within +-2 sd of the
    envelope are admitted: slower modulations cannot be told apart from the
    envelope's own skew and kurtosis.
    """
    freqs, cost, _ = fringe_periodogram(profile, total)
    keep = profile > 1e-10 * profile.max()
    x, y = np.arange(total + 1)[keep].astype(float), profile[keep]
    mu = y @ x / y.sum()
    sd = max(math.sqrt(y @ (x - mu) ** 2 / y.sum()), 0.5)
    f_floor = min_periods / (4 * sd)
    bin_width = 1.0 / (total + 1)
    inner = cost[1:]
    is_min = np.r_[True, inner[1:] <= inner[:-1]] & np.r_[inner[:-1] <= inner[1:], True]
    order = [k for k in np.argsort(inner) if is_min[k] and freqs[k + 1] >= f_floor][:candidates]
    fits = [(*_fit_profile(x, y, total, freqs[k + 1], bin_width, f_floor), freqs[k + 1]) for k in order]
    if not fits:
        return 0.0, 0.0, 0.0
    _, f, c, f_bin = min(fits)
    if c < min_contrast:
        return 0.0, float(c), 0.0
    return float(f), float(c), float(f_bin)


def _fit_fringes(P: np.ndarray, T: int, f: float, rel_floor: float = 1e-10):
    """Least-squares fit of env(N_a, N_b) (1 + c cos(2 pi f (T - N_b) + delta)) at fixed f.

    The envelope is log-quadratic in (N_a, N_b) and c is bounded to [0, 1].
    The frequency stays fixed: with only a few periods under the envelope a
    free f trades off against the envelope shape.  Several delta starts guard
    against local minima.  Returns ``(c, delta)``.
    """
    a, b = np.nonzero(P > rel_floor * P.max())
    y = P[a, b]
    w = y / y.sum()
    ma, mb = float(w @ a), float(w @ b)
    cov = np.cov(np.stack([a, b]).astype(float), aweights=w) + 1e-6 * np.eye(2)
    prec = np.linalg.inv(cov)
    phase = 2 * np.pi * f * (T - b)

    def model(x):
        l0, ca, cb, saa, sab, sbb, c, dl = x
        da, db = a - ca, b - cb
        expo = np.minimum(l0 - 0.5 * (saa * da * da + 2 * sab * da * db + sbb * db * db), 700.0)
        return np.exp(expo) * (1 + c * np.cos(phase + dl))

    lo = [-np.inf] * 6 + [0.0, -np.inf]
    hi = [np.inf] * 6 + [1.0, np.inf]
    best = None
    for dl in np.linspace(-np.pi, np.pi, 6, endpoint=False):
        x0 = [math.log(y.max()), ma, mb, prec[0, 0], prec[0, 1], prec[1, 1], 0.9, dl]
        r = least_squares(lambda x: model(x) - y, x0, bounds=(lo, hi))
        if best is None or r.cost < best.cost:
            best = r
    return best.x[6], best.x[7]


def fringe_analysis(
    dist: NumberDistribution, peaks: CatPeaks, min_contrast: float = 0.1, min_periods: float = 1.5
) -> FringeReport:
    """Measure the number-space fringes of a cat and compare with the phase peaks.

    Along each axis the columns (fixed N_a) or rows (fixed N_b) are averaged
    with their masses as weights, which is the marginal, and the result goes
    through :func:`fringe_periodogram` on bins of 1 / (T + 1) cycles per atom.
    A fringe weaker than ``min_contrast``, or one completing fewer than
    ``min_periods`` periods across the envelope, counts as the zero bin.  The
    best periodogram minima are refitted with the envelope free, which sets
    the reported frequency.  A two-dimensional least-squares fit of the fringe
    form at that frequency then gives the N_b contrast and delta.
    """
    if peaks.degenerate:
        raise DegeneratePeaksError("fringe period undefined: cat peaks are degenerate")
    P = np.asarray(dist.values, dtype=float)
    T = dist.total
    bin_width = 1.0 / (T + 1)
    f_b, c_b, bin_b = _dominant(P.sum(axis=0), T, min_contrast, min_periods)
    f_a, c_a, _ = _dominant(P.sum(axis=1), T, min_contrast, min_periods)
    delta = float("nan")
    if f_b > 0:
        c_b, delta = _fit_fringes(P, T, f_b)
        delta = _wrap(float(delta))
    return FringeReport(
        dominant_frequency_b=float(f_b),
        contrast_b=float(c_b),
        dominant_frequency_a=f_a,
        predicted_frequency=abs(_wrap(peaks.phi1 - peaks.phi2)) / (2 * math.pi),
        delta_estimate=delta,
        contrast_a=c_a,
        spectral_peak_b=bin_b,
        spectral_bin=bin_width,
    )


def fringe_contrast_curve(initial: QuantumState, us, checkpoints, M: int = 256) -> list[tuple[int, float]]:
    """N_b fringe contrast after each checkpoint count of detections at ``us``.

    Stages without a resolvable cat (flat or degenerate phase peaks) give nan.
    """
    out = []
    state, done = initial, 0
    for k in sorted(checkpoints):
        state = replay(state, us[done:k])
        done = k
        try:
            peaks = find_cat_peaks(phase_distribution(state, M))
            out.append((k, fringe_analysis(number_distribution(state), peaks).contrast_b))
        except (NoCatStructureError, DegeneratePeaksError):
            out.append((k, float("nan")))
    return out


def coherent_pattern(n_modes: int, phases, F_value: float, u) -> np.ndarray | float:
    """Far-field density of n coherent condensates with the given phases.

    (1/2pi) (1 + (2/n) F sum_{j<k} cos((k - j) u - (phi_k - phi_j))); for three
    modes the pair sum is cos(u - phi_ba) + cos(u - phi_cb) + cos(2u - phi_ba - phi_cb).
    """
    phases = np.asarray(phases, dtype=float)
    if len(phases) != n_modes:
        raise ValueError(f"expected {n_modes} phases, got {len(phases)}")
    if not 0.0 <= F_value <= 1.0:
        raise ValueError("F_value must lie in [0, 1]")
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    acc = np.zeros_like(u)
    for j in range(n_modes):
        for k in range(j + 1, n_modes):
            acc += np.cos((k - j) * u - (phases[k] - phases[j]))
    out = (1.0 + (2.0 / n_modes) * F_value * acc) / (2 * np.pi)
    if np.any(out < -1e-12):
        raise ArithmeticError("coherent pattern went negative")
    return float(out[0]) if scalar else out


def relative_phases(phases) -> np.ndarray:
    """phi_{k+1} - phi_k for consecutive modes (phi_ba, phi_cb, phi_dc, ...)."""
    return np.diff(np.asarray(phases, dtype=float))


def swap_relative(phases, i: int, j: int) -> np.ndarray:
    """Absolute phases with relative phases i and j exchanged (mode 0 held fixed)."""
    rel = relative_phases(phases)
    rel[[i, j]] = rel[[j, i]]
    return np.concatenate([[phases[0]], phases[0] + np.cumsum(rel)])


def pattern_swap_check(
    n_modes: int,
    phases,
    F_value: float = 1.0,
    grid_points: int = 1024,
    pair: tuple[int, int] | None = None,
) -> float:
    """max |pattern(phases) - pattern(swapped)| over a u grid.

    ``pair`` indexes relative phases; the default exchanges the outermost two
    (phi_ba with phi_cb for three modes, phi_ba with phi_dc for four).
    """
    phases = np.asarray(phases, dtype=float)
    i, j = pair if pair is not None else (0, n_modes - 2)
    u = -np.pi + 2 * np.pi * np.arange(grid_points) / grid_points
    p0 = coherent_pattern(n_modes, phases, F_value, u)
    p1 = coherent_pattern(n_modes, swap_relative(phases, i, j), F_value, u)
    return float(np.max(np.abs(p0 - p1)))
