"""Error hierarchy for the simulator.

Every error carries the process exit code the CLI returns for it:
2 for invalid input or configuration, 3 for numerical failures.
"""

from typing import Optional


class SimulationError(Exception):
    """Base class for all simulator errors"""
    exit_code = 1


class ConfigError(SimulationError):
    """Invalid configuration or input value"""
    exit_code = 2


class NumericalError(SimulationError):
    """A computation failed or produced an unusable result"""
    exit_code = 3


# Input validation

class DimensionError(ConfigError):
    pass


class StateError(ConfigError):
    """Matrix is not a valid (possibly unnormalized) density matrix"""


class PolarizationError(ConfigError):
    pass


class SequenceError(ConfigError):
    """Pulse sequence timing is inconsistent"""


class TruthTableError(ConfigError):
    pass


class DatasetError(ConfigError):
    pass


class ChainLengthError(ConfigError):
    pass


class WindowError(ConfigError):
    """Coincidence window incompatible with the pulse offsets"""


# Numerical failures

class NonHermitianError(NumericalError):
    pass


class SingularSystemError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    """An emission window ended with too much trion population left"""


class SampleFailureError(NumericalError):
    """A Monte-Carlo sample raised while being evaluated"""

    def __init__(self, sample_index: int, cause: Exception):
        self.sample_index = sample_index
        self.cause = cause
        if isinstance(cause, SimulationError):
            self.exit_code = cause.exit_code
        super().__init__(f"Monte-Carlo sample {sample_index} failed: {cause}")


# Tag stream format

class TagFormatError(ConfigError):
    pass


class BadMagicError(TagFormatError):
    pass


class VersionMismatchError(TagFormatError):
    pass


class TruncatedStreamError(TagFormatError):
    def __init__(self, message: str, record_index: Optional[int] = None):
        self.record_index = record_index
        super().__init__(message)


class UnsortedStreamError(TagFormatError):
    pass


class ReproductionError(NumericalError):
    """One or more recomputed published numbers fell outside tolerance"""

    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__(f"reproduction failed for: {', '.join(self.failed)}")
