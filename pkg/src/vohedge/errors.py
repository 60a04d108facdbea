"""Exception hierarchy shared by every module.

Each class maps onto one CLI exit code, see :mod:`vohedge.cli`.
"""
from __future__ import annotations


class VoHedgeError(Exception):
    """Base class for all package errors."""


class ParameterError(VoHedgeError, ValueError):
    """Invalid constructor arguments (negative scale, bad strike, ...)."""


class DomainError(VoHedgeError, ValueError):
    """A complex argument lies outside the strip where a transform exists."""


class AssumptionError(VoHedgeError):
    """A modelling assumption required by the hedging formulas fails."""


class SolverError(VoHedgeError):
    """A root finder or optimizer could not produce a valid answer."""


class NumericsError(VoHedgeError):
    """A numerical sanity check failed (imaginary residue, non-convergence)."""


class ConfigError(VoHedgeError):
    """Malformed or schema-violating run configuration."""
