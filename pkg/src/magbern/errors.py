"""Exception taxonomy shared by all modules; exit codes match the CLI contract."""


class MagbernError(Exception):
    """Base class; exit code 1."""

    exit_code = 1


class ValidationError(MagbernError):
    """Bad input or configuration; exit code 2."""

    exit_code = 2


class NumericalError(MagbernError):
    """Numerically void or non-convergent computation; exit code 3."""

    exit_code = 3


class ResourceLimitError(MagbernError):
    """Configured resource cap exceeded; exit code 4."""

    exit_code = 4
