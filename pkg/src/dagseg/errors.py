"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class DagsegError(Exception):
    exit_code = 1
    kind = "error"


class ConfigError(DagsegError):
    exit_code = 2
    kind = "config"


class InputError(DagsegError):
    """Unreadable, undecodable or malformed input files."""

    exit_code = 3
    kind = "io"


class DataError(DagsegError):
    """Inputs that parse but violate a data invariant (spans, lengths, variants)."""

    exit_code = 4
    kind = "data"


class NumericError(DagsegError):
    exit_code = 5
    kind = "numeric"
