"""Exception types shared across the package."""


class HildriveError(Exception):
    """Base class for all package errors."""


class DimensionError(HildriveError, ValueError):
    """Array or vector widths do not match a declared shape."""


class NumericError(HildriveError, ArithmeticError):
    """A numeric operation produced or received non-finite values."""


class StateError(HildriveError, RuntimeError):
    """An operation was called in a state that does not allow it."""


class ContractError(HildriveError, ValueError):
    """A data invariant was violated by the caller."""


class MapGenerationError(HildriveError, RuntimeError):
    """Procedural map composition failed after bounded retries."""

    def __init__(self, message: str, seed: int):
        super().__init__(f"{message} (seed={seed})")
        self.seed = seed


class MapParseError(HildriveError, ValueError):
    """A map file is malformed; carries the offending field."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{message}" + (f" [field: {field}]" if field else ""))
        self.field = field


class MapValidationError(HildriveError, ValueError):
    """A parsed map violates structural invariants (e.g. connectivity)."""


class ConfigError(HildriveError, ValueError):
    """A run configuration is invalid or references unknown entries."""
