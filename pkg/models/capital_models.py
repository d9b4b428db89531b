from dataclasses import dataclass, field
from typing import List, Optional

from models.risk_models import AnnualLossRecord, SeveritySpec


@dataclass
class SmaInputs:
    """Business Indicator in millions, loss history in base UM."""

    bi: float
    loss_history: List[AnnualLossRecord]
    lower_threshold: float = 1e7
    upper_threshold: float = 1e8
    allow_any_history_length: bool = False


@dataclass
class CapitalResult:
    """SMA capital; every amount in millions."""

    k_sma: float
    bucket: int
    bic: float
    lc: float
    bi: float


@dataclass
class ImpliedBiResult:
    bi: float
    converged: bool
    iterations: int
    residual: float
    target_var: float
    lc: float
    bucket: Optional[int] = None
    message: str = ""


@dataclass
class FitResult:
    spec: SeveritySpec
    log_likelihood: float
    aic: float
    bic_criterion: float
    n_used: int
    threshold: Optional[float] = None
    standard_errors: Optional[dict] = None
    converged: bool = True

    @property
    def parameter_count(self) -> int:
        # GPD location is the fixed threshold, not an estimated parameter
        count = len(self.spec.params)
        return count - 1 if self.threshold is not None else count


@dataclass
class GofReport:
    ks_statistic: float
    ad_statistic: float
    n: int
    level: float
    ks_critical: float
    ad_critical: float
    passed: bool
    ks_passed: bool = True
    ad_passed: bool = True


@dataclass
class MeanExcessPoint:
    threshold: float
    mean_excess: float
    exceedances: int


@dataclass
class ModelRanking:
    fits: List[FitResult] = field(default_factory=list)
    gof: List[GofReport] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)
