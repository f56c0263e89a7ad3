"""Exception hierarchy shared by the library and mapped to CLI exit codes."""


class WatermarkError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(WatermarkError, ValueError):
    """Invalid inputs: malformed distributions, bad parameters, bad config files."""


class CapacityError(ConfigError):
    """A desk-scale enumeration cap would be exceeded."""


class InfeasibleError(WatermarkError):
    """Parameters are valid but no scheme exists for them (e.g. m above its maximum)."""


class SolverError(WatermarkError):
    """A numerical solver failed to reach its stated tolerance."""


class AuditError(WatermarkError):
    """A constructed object failed an exact invariant check."""
