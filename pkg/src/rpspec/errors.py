"""Exception types for infeasible designs, failed solves, and degenerate data."""

from __future__ import annotations


class RpspecError(Exception):
    """Base class for toolkit-specific failures."""


class InfeasibleTargetError(RpspecError):
    """No positivity scale above the floor yields a realizable sign process."""

    def __init__(self, message: str, c_floor: float | None = None):
        super().__init__(message)
        self.c_floor = c_floor


class DesignFailureError(RpspecError):
    """FIR autocorrelation fit stagnated above the acceptable residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class DecoherenceFloorError(RpspecError):
    """Mean measured coherence was <= 0, so the decay exponent is undefined."""

    def __init__(self, message: str, mean_coherence: float):
        super().__init__(message)
        self.mean_coherence = mean_coherence


class InfeasibleLagError(RpspecError):
    """Some requested measurement lags cannot be realized by the generator."""

    def __init__(self, message: str, lags):
        super().__init__(message)
        self.lags = list(lags)


class SolverFailureError(RpspecError):
    """Coordinate descent failed to reach the duality-gap tolerance."""

    def __init__(self, message: str, gap: float):
        super().__init__(message)
        self.gap = gap
