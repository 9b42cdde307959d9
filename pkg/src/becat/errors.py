"""Exception types raised by the numerical routines."""


class NumericalError(RuntimeError):
    """Base class for failures that stem from the numerics rather than bad input."""


class AnnihilatedStateError(NumericalError):
    """An operator mapped the state to (numerically) zero."""


class PrecisionLossError(NumericalError):
    """A basis change lost unitarity beyond tolerance."""


class ConvergenceError(NumericalError):
    """The eigensolver did not reach the requested residual."""


class NoCatStructureError(NumericalError):
    """The phase distribution is too flat to contain a cat."""


class DegeneratePeaksError(NumericalError):
    """The two cat peaks coincide, so the number-space fringe period is undefined."""
