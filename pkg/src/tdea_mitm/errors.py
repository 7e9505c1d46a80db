"""Exception types shared across the package."""


class InvalidInput(ValueError):
    """A key, block or parameter lies outside the range its spec allows."""


class ConfigError(ValueError):
    """An experiment or attack configuration cannot be executed as given."""


class InvariantError(RuntimeError):
    """An internal consistency check failed (e.g. oracle disagreement)."""
