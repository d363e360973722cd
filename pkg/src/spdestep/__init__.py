"""Spectral Galerkin time stepping for the stochastic heat equation
``du = (Delta u + f(u)) dt + dW`` on the unit torus, with stochastic
convolution samples as the noise input."""

__version__ = "0.1.0"

from .errors import BlowUpError, ConditioningError, ConfigError, NonFiniteError
from .spectral import RealGridField, SpectralField, TimeGrid, norm
from .noise import OuPath, RngStream, WienerPath, sample_ou_path, sample_wiener_path
from .nonlinearity import Nonlinearity, allen_cahn, bounded_sin, linear, zero
from .schemes import SchemeConfig, Trajectory, run
from .analysis import RateReport, convergence_study, holder_exponent
from .lowerbound import ConditioningResult, lower_bound_total

__all__ = [
    "BlowUpError", "ConditioningError", "ConfigError", "NonFiniteError",
    "RealGridField", "SpectralField", "TimeGrid", "norm",
    "OuPath", "RngStream", "WienerPath", "sample_ou_path", "sample_wiener_path",
    "Nonlinearity", "allen_cahn", "bounded_sin", "linear", "zero",
    "SchemeConfig", "Trajectory", "run",
    "RateReport", "convergence_study", "holder_exponent",
    "ConditioningResult", "lower_bound_total",
]
