"""Exception hierarchy shared by every decolab module."""


class DecolabError(Exception):
    """Base class for all errors raised by decolab."""


class PacketTooWideError(DecolabError, ValueError):
    """A wave packet would touch the edge of the periodic grid."""


class MomentumAliasingError(DecolabError, ValueError):
    """Requested momentum is too close to the grid's Nyquist momentum."""


class NonNormalizedInputError(DecolabError, ValueError):
    pass


class SignificantNegativityError(DecolabError, ValueError):
    """A density matrix has an eigenvalue below the positivity tolerance."""


class StepTooLargeError(DecolabError, ValueError):
    """Time step violates the solver's resolution precondition."""


class GridEscapeError(DecolabError, RuntimeError):
    """Probability leaked onto the boundary cells of the periodic grid."""


class NoFringeDetectedError(DecolabError, ValueError):
    pass


class ThirdDerivativeVanishesError(DecolabError, ZeroDivisionError):
    pass


class TimeNotSampledError(DecolabError, KeyError):
    pass


class OptimizerNotConvergedWarning(UserWarning):
    pass


class HighTemperatureValidityWarning(UserWarning):
    """Bath parameters sit outside the high-temperature regime."""


class ConfigError(DecolabError, ValueError):
    """Experiment configuration is malformed (CLI exit code 2)."""


class SolverFailure(DecolabError, RuntimeError):
    """Numerical failure during an experiment (CLI exit code 3)."""
