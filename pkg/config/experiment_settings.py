from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple


class Study(Enum):
    INSTABILITY = "instability"
    SIGMA_SENSITIVITY = "sigma"
    SUPERADDITIVITY = "superadditivity"
    IMPLIED_BI_GRID = "implied-bi-grid"


@dataclass
class EntityProfile:
    """Two-cell loss process: frequent small losses plus rare large ones"""
    name: str
    lognormal_mu: float
    gamma_beta: float
    lognormal_sigma: float = 2.5
    lognormal_lam: float = 10.0
    gamma_lam: float = 990.0
    gamma_alpha: float = 1.0


@dataclass
class ExperimentConfig:
    study: Study
    years: int = 1000
    window: int = 10
    seed: int = 42
    bi: float = 2000.0  # millions, bucket 2
    var_level: float = 0.999
    threads: int = 1
    out_dir: Optional[str] = None


@dataclass
class InstabilityConfig(ExperimentConfig):
    study: Study = Study.INSTABILITY
    # case -> lognormal sigma
    cases: Dict[int, float] = field(default_factory=lambda: {1: 2.5, 2: 2.8})
    # size -> (lognormal mu, gamma beta)
    entities: Dict[str, Tuple[float, float]] = field(default_factory=lambda: {
        "small": (10.0, 1e4),
        "medium": (12.0, 1e5),
        "large": (14.0, 5e5),
    })
    # published 0.999 VaR of 1,000 simulated years (millions), order-of-magnitude reference
    reference_var: Dict[str, float] = field(default_factory=lambda: {
        "case1_small": 164.0, "case1_medium": 1663.0, "case1_large": 9049.0,
        "case2_small": 354.0, "case2_medium": 3620.0, "case2_large": 18832.0,
    })
    var_tolerance_factor: float = 3.0
    doubling_ratio: float = 2.0

    def profiles(self):
        """(case, entity index, profile) for every case and entity size"""
        for case, sigma in self.cases.items():
            for index, (size, (mu, beta)) in enumerate(self.entities.items()):
                yield int(case), index, EntityProfile(name=size, lognormal_mu=mu, gamma_beta=beta,
                                                      lognormal_sigma=sigma)


@dataclass
class SigmaSensitivityConfig(ExperimentConfig):
    study: Study = Study.SIGMA_SENSITIVITY
    sigmas: Tuple[float, ...] = (2.0, 2.25, 2.5, 2.75, 3.0)
    lognormal_mu: float = 14.0
    # exponential small-loss cell with mean 1.5e5
    gamma_alpha: float = 1.0
    gamma_beta: float = 1.5e5
    whisker: float = 1.5
    outlier_multiple: float = 5.0


@dataclass
class SuperadditivityConfig(ExperimentConfig):
    study: Study = Study.SUPERADDITIVITY
    # panel -> (merged BI, merged LC); split lines carry half of each
    panels: Dict[str, Tuple[float, float]] = field(default_factory=lambda: {
        "left": (32000.0, 4000.0),
        "right": (70000.0, 4000.0),
    })
    lines: int = 2
    lam: float = 10.0
    lognormal_mu: float = 14.0
    lognormal_sigma: float = 2.0


@dataclass
class ImpliedBiGridConfig(ExperimentConfig):
    study: Study = Study.IMPLIED_BI_GRID
    mus: Tuple[float, ...] = (10.0, 12.0, 14.0)
    sigmas: Tuple[float, ...] = (1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0)
    lam: float = 10.0


STUDY_CONFIGS = {
    Study.INSTABILITY: InstabilityConfig,
    Study.SIGMA_SENSITIVITY: SigmaSensitivityConfig,
    Study.SUPERADDITIVITY: SuperadditivityConfig,
    Study.IMPLIED_BI_GRID: ImpliedBiGridConfig,
}
