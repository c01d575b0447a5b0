"""Exception hierarchy shared by all solver modules."""


class GsinrError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(GsinrError, ValueError):
    pass


class NotPositiveDefinite(GsinrError, ValueError):
    pass


class NonConvergence(GsinrError, RuntimeError):
    pass


class Singular(GsinrError, ValueError):
    pass


class Infeasible(GsinrError):
    """No nonnegative power vector meets the SINR targets."""


class Unbounded(GsinrError, RuntimeError):
    """Internal error: the power LP can never be unbounded below."""


class ZeroSignalGain(GsinrError, ValueError):
    pass


class ZeroGain(GsinrError, ValueError):
    pass


class DimensionInfeasible(GsinrError, ValueError):
    """Block diagonalization needs ``M > sum of the other users' antennas``."""


class ConfigError(GsinrError, ValueError):
    """Bad experiment or system configuration.

    ``line`` and ``field`` point at the offending spec-file entry when known.
    """

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
