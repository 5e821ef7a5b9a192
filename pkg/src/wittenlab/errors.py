"""Error taxonomy shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2, NumericalError and
subclasses -> 3, GapNotFoundError -> 4.
"""
from __future__ import annotations


class WittenLabError(Exception):
    """Base class for package errors."""


class ConfigError(WittenLabError):
    """Bad configuration, unparseable input, or violated precondition."""


class NumericalError(WittenLabError):
    """A numerical validation failed (residual, convergence, count)."""


class TrackingError(NumericalError):
    """Branch continuation failed: no bisection step restores overlap."""


class ZeroCountError(NumericalError):
    """Number of numerically-zero eigenvalue branches does not match
    the expected Betti number."""


class DegenerateCriticalPointError(NumericalError):
    """A critical point has a (numerically) singular Hessian."""


class GapNotFoundError(WittenLabError):
    """No spectral gap separates decaying from growing branches."""
