"""Exception hierarchy shared across the toolkit.

The CLI maps each branch to a distinct exit code, so new exceptions should
subclass the branch that matches how a caller has to react.
"""


class NavsynthError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(NavsynthError):
    """Bad or missing configuration (unknown key, unresolvable path, no seed)."""


class DataError(NavsynthError):
    """Malformed input data or broken file contract."""


class BackendError(NavsynthError):
    """A scorer backend failed or returned something unusable."""


class CheckError(NavsynthError):
    """A verification command (grad-check, overfit) did not meet its bound."""
