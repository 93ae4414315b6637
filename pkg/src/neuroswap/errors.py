class NeuroswapError(Exception):
    """Base class for all model errors raised by this package."""


class ParameterError(NeuroswapError, ValueError):
    """An argument violates a documented precondition or type invariant."""


class ModelError(NeuroswapError):
    """The cost model cannot be evaluated for these parameters (e.g. memory too small to merge)."""


class ConfigError(NeuroswapError):
    """A scenario file is missing fields, has unknown fields, or violates a bound."""
