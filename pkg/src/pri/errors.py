"""Exception types shared across the package.

The CLI maps these onto process exit codes: usage problems exit 1,
validation failures exit 2, unexpected runtime failures exit 3.
"""


class PriError(Exception):
    """Base class for all package errors."""


class UsageError(PriError):
    """Bad invocation: missing/contradictory arguments, unknown subcommand."""


class ValidationError(PriError):
    """Malformed or inconsistent input data (files, records, configs)."""
