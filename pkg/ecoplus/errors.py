from __future__ import annotations


class EcoPlusError(Exception):
    """Base class for every error raised by ecoplus."""


class ConfigError(EcoPlusError, ValueError):
    pass


class ModelError(EcoPlusError, ValueError):
    """Invalid physical parameters or inputs outside a model's domain."""


class SolverError(EcoPlusError, RuntimeError):
    pass


class InfeasibleError(SolverError):
    """A solve that must succeed (fixed feasible set) came back infeasible."""


class ExtractionError(EcoPlusError, RuntimeError):
    """Solver output could not be mapped back to a consistent trajectory."""
