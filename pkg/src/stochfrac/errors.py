"""Exception types shared across the package."""

from __future__ import annotations


class StochFracError(Exception):
    """Base class for package errors."""


class DomainError(StochFracError, ValueError):
    """An argument lies outside the supported domain of a function."""


class ConfigError(StochFracError, ValueError):
    """Invalid experiment or solver configuration."""


class NumericalFailure(StochFracError, RuntimeError):
    """A numerical stage failed (divergence, singular system, tail bound)."""

    def __init__(self, message: str, *, stage: str | None = None, history=None):
        super().__init__(message)
        self.stage = stage
        self.history = list(history) if history is not None else []


class ConvergenceError(NumericalFailure):
    """Fixed-point iteration did not reach its tolerance."""


class KernelTailError(NumericalFailure):
    """Spectral series truncation cannot meet the requested tolerance."""
