"""Numerical laboratory for the disordered chiral strip model."""
from .config import ExperimentConfig, load_config, parse_config
from .exceptions import ConfigInvalid, LabError, NumericalFailure
from .model import GUE, DiagonalComplexUniform, Fixed, Ginibre, ModelConfig, ShiftedGinibre
from .runner import RunResult, run, sqrt_w_sweep

__version__ = "0.1.0"
