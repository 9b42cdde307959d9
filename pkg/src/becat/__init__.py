"""Exact simulation of Fock-state condensates on a three-site ring: quasi-momentum
statistics, Bose-Hubbard ground states, sequential atom detection and the
relative-phase cat states it produces."""
from .errors import (
    AnnihilatedStateError,
    ConvergenceError,
    DegeneratePeaksError,
    NoCatStructureError,
    NumericalError,
    PrecisionLossError,
)
from .fock import FockBasis, QuantumState, basis_build, fock_state
from .modes import QuasiMomentumParams, fock_basis_change, hat_distribution, quasimomentum_matrix
from .hubbard import Boundary, HamiltonianParams, solve
from .detection import EtaDistribution, run_sequence
from .phase import find_cat_peaks, phase_distribution, swap_asymmetry
from .number import coherent_pattern, fringe_analysis, number_distribution, pattern_swap_check

__version__ = "0.1.0"
