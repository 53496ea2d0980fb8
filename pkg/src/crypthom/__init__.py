"""Periodic homogenization toolkit for aberrant-crypt-foci cell dynamics.

The cell problem on the reference hexagon gives the averaged coefficients of
the homogenized model; the fine solver resolves the periodic medium directly.
"""
from .cell_problem import HomCoeffs, solve_cell_problem
from .errors import (ConfigError, CrypthomError, DependencyError, DomainError, MeshError,
                     ParameterError, PositivityError, ProtocolError, SolverError)
from .fine_solver import run_fine
from .geometry import CoefficientField, CryptGeometry, RegionTag
from .homog_solver import run_homog
from .report import convergence_table, relative_error
from .sim import SimConfig, Trajectory

__version__ = "0.1.0"

__all__ = [
    "CoefficientField", "ConfigError", "CryptGeometry", "CrypthomError", "DependencyError",
    "DomainError", "HomCoeffs", "MeshError", "ParameterError", "PositivityError",
    "ProtocolError", "RegionTag", "SimConfig", "SolverError", "Trajectory",
    "convergence_table", "relative_error", "run_fine", "run_homog", "solve_cell_problem",
    "__version__",
]
