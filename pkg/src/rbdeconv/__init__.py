"""Blind deconvolution by Riemannian steepest descent on the rank-one quotient manifold."""
from ._core import BACKEND
from .linops import (
    ConvergenceError,
    DimensionError,
    MeasurementOperator,
    NoiseModel,
    leading_singular_triple,
    random_operator,
)
from .manifold import FactorPair, HorizontalVector, balance
from .objective import Objective, PenaltyParams
from .solvers import SolverConfig, SolverReport, ama_solve, rsd_solve, spectral_init, wirtinger_solve

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConvergenceError",
    "DimensionError",
    "FactorPair",
    "HorizontalVector",
    "MeasurementOperator",
    "NoiseModel",
    "Objective",
    "PenaltyParams",
    "SolverConfig",
    "SolverReport",
    "ama_solve",
    "balance",
    "leading_singular_triple",
    "random_operator",
    "rsd_solve",
    "spectral_init",
    "wirtinger_solve",
]
