"""
Scripted, seeded capital studies. Importing the package registers every study.
"""

from .experiment_factory import (
    BaseExperiment,
    ExperimentFactory,
    build_config,
    parse_study,
    run_experiment,
)
from .implied_bi_grid import ImpliedBiGridExperiment
from .instability import InstabilityExperiment
from .sigma_sensitivity import SigmaSensitivityExperiment
from .superadditivity import SuperadditivityExperiment

__all__ = [
    'BaseExperiment',
    'ExperimentFactory',
    'ImpliedBiGridExperiment',
    'InstabilityExperiment',
    'SigmaSensitivityExperiment',
    'SuperadditivityExperiment',
    'build_config',
    'parse_study',
    'run_experiment',
]
