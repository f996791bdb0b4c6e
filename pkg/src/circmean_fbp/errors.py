"""Exception hierarchy shared by the numerical services and the CLI."""
from __future__ import annotations


class CircMeanError(Exception):
    """Base class for every error raised by circmean_fbp."""


class PreconditionError(CircMeanError, ValueError):
    """An operation was called outside its documented domain."""

    def __init__(self, module: str, message: str) -> None:
        self.module = module
        super().__init__(f"{module}: {message}")


class GridMismatchError(PreconditionError):
    """Two inputs were sampled on incompatible grids."""


class SupportError(PreconditionError):
    """A phantom primitive leaves the reconstruction disk."""


class DataFormatError(CircMeanError, ValueError):
    """A data or phantom file could not be parsed."""


class VerificationError(CircMeanError):
    """A numerical oracle missed its tolerance."""
