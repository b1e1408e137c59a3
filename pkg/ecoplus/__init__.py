"""Eco-driving trajectory optimization: ECO+ linear program, benchmarks and consumption models."""
from .errors import ConfigError, EcoPlusError, ExtractionError, InfeasibleError, ModelError, SolverError

__all__ = [
    "ConfigError", "EcoPlusError", "ExtractionError", "InfeasibleError", "ModelError", "SolverError",
]
__version__ = "0.1.0"
