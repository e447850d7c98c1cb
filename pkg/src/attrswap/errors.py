"""Exception hierarchy shared across the package."""


class AttrswapError(Exception):
    """Base class for all package errors."""


class ConfigurationError(AttrswapError):
    """Invalid configuration values (bad class counts, weights, sizes, ...)."""


class IngestionError(AttrswapError):
    """A manifest row or image file could not be ingested."""


class SplitError(AttrswapError):
    """Invalid train/test split request."""


class ShapeError(AttrswapError):
    """Tensor shape violates a model contract."""


class ContractError(AttrswapError):
    """An operation precondition was violated."""


class DivergenceError(AttrswapError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, term: str | None = None):
        super().__init__(message)
        self.term = term


class CapabilityError(AttrswapError):
    """The compute substrate lacks a required capability (e.g. double backward)."""
