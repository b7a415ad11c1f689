"""Error taxonomy shared by the library, the service, and the CLI.

Exit-code contract for scripting: 0 success, 1 usage error, 2 data error,
3 numerical failure.
"""


class ProtoVerbError(Exception):
    """Base class; carries the CLI exit code and a machine-readable kind."""

    exit_code = 1
    kind = "usage"


class UsageError(ProtoVerbError):
    """Bad arguments, missing files, incompatible options."""

    exit_code = 1
    kind = "usage"


class DataError(ProtoVerbError):
    """Malformed or invariant-violating input data."""

    exit_code = 2
    kind = "data"

    def __init__(self, message, line=None, record_id=None):
        self.line = line
        self.record_id = record_id
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if record_id is not None:
            prefix += f"record {record_id!r}: "
        super().__init__(prefix + message)
        self.message = message


class NumericalError(ProtoVerbError):
    """Non-finite values, zero norms, and other numeric failures."""

    exit_code = 3
    kind = "numerical"


class DegenerateEpisodeError(DataError):
    """Episode cannot support the requested loss (e.g. no instances at all)."""
