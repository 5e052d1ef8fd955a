"""Exception hierarchy shared by the library and the CLI.

Each category carries the process exit code the CLI uses when the error
escapes a command. Plain ``ValueError`` raised by library functions for bad
arguments is mapped to the usage exit code by the CLI.
"""

EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_RESOURCE = 4
EXIT_NUMERIC = 5


class DriverBenchError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(DriverBenchError):
    """Input data violates a contract (bad counts, unbalanced sets, ...)."""

    exit_code = EXIT_VALIDATION


class DatasetStructureError(ValidationError):
    """Dataset directory layout is wrong, e.g. a class folder is missing."""


class CheckpointFormatError(ValidationError):
    """Checkpoint file is corrupt, truncated, or not one of ours."""


class ResourceError(DriverBenchError):
    """A required external resource (weight file, disk) is unavailable."""

    exit_code = EXIT_RESOURCE


class NumericError(DriverBenchError):
    """A computation produced a non-finite value; the run must abort."""

    exit_code = EXIT_NUMERIC
