"""
Error hierarchy of the toolkit.

Every class carries the process exit code the management commands use
when the error reaches the command line.
"""


class NonlocalGameError(Exception):
    exit_code = 3


class DomainError(NonlocalGameError, ValueError):
    """Input outside the domain of an operation (bad color, non-edge, unknown preset...)."""

    exit_code = 3


class SizeGuardError(NonlocalGameError):
    exit_code = 2


class DataError(NonlocalGameError):
    """Malformed or inconsistent data files and bitstrings."""

    exit_code = 3


class CompletenessError(DataError):
    def __init__(self, message, missing=()):
        self.missing = sorted(missing)
        if self.missing:
            message = f"{message}: missing {', '.join(self.missing)}"
        super().__init__(message)


class NumericError(NonlocalGameError):
    exit_code = 4

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (last residual {residual:.3e})"
        super().__init__(message)
