"""Exception types shared across the package."""

from __future__ import annotations


class LatefuseError(Exception):
    """Base class for all errors raised by latefuse."""


class ValidationError(LatefuseError, ValueError):
    """Input data violated a schema or invariant.

    ``errors`` holds one human-readable string per problem so callers (the
    CLI in particular) can emit a machine-readable list.
    """

    def __init__(self, errors: list[str] | str):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class FitError(LatefuseError):
    """Fitting could not proceed (degenerate labels, numerical failure)."""
