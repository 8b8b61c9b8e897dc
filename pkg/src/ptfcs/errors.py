"""Exception hierarchy.

Each class carries the process exit code the CLI maps it to
(2 configuration, 3 numerical quality, 4 I/O).
"""

from __future__ import annotations


class PtfcsError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(PtfcsError, ValueError):
    exit_code = 2


class DimensionError(ConfigError):
    """Paired tensor legs have different extents."""


class InvalidConfigError(ConfigError):
    pass


class UnsupportedModelError(ConfigError):
    pass


class ConventionViolationError(ConfigError):
    """A gate does not commute with the charge it is tilted by."""


class IncompatibleTensorsError(ConfigError):
    pass


class AliasingError(ConfigError):
    """The counting-field grid is too coarse for the charge support."""


class LightConeError(ConfigError):
    """Depth exceeds what a finite lattice reproduces exactly."""


class FeasibilityError(ConfigError):
    """A dense oracle was asked for more qubits than it can hold."""


class DomainError(ConfigError):
    pass


class WindowError(ConfigError):
    pass


class NumericalError(PtfcsError, ArithmeticError):
    exit_code = 3


class DegenerateEnvironmentError(NumericalError):
    """A bond environment has (numerically) zero norm."""


class TruncationQualityError(NumericalError):
    """Imaginary residue or negative probability beyond tolerance."""


class PersistenceError(PtfcsError, OSError):
    exit_code = 4


class ChecksumError(PersistenceError):
    pass


class FormatVersionError(PersistenceError):
    pass


class TruncatedFileError(PersistenceError):
    pass


class CacheMismatchError(PersistenceError):
    exit_code = 2
