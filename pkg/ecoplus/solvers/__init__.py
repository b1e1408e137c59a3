from .interior_point import SolveResult, SolverOptions, Status, solve
from .kkt import kkt_residuals, verify_solution
from .mps import write_mps

__all__ = ["SolveResult", "SolverOptions", "Status", "solve", "kkt_residuals", "verify_solution", "write_mps"]
