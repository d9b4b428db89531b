"""Compound Poisson aggregation on a lattice: Panjer recursion and FFT.

Independent Poisson cells merge into one compound Poisson with rate sum(lam)
and the rate-weighted mixture of the discretized severities.
"""

import logging
import math
from typing import Dict, List, Type

import numpy as np

from interfaces.aggregator import ILossAggregator
from models.errors import GridError, ParameterDomainError
from models.risk_models import AggregatePmf, CompoundModel, FrequencySpec, SeverityFamily, SeveritySpec, VarEstimate
from services.distribution_service import frozen_distribution
from services.lda_service import DEFAULT_CHUNK_YEARS, mc_var, sla_var_model

logger = logging.getLogger(__name__)

# exp(-x) underflows to zero past this exponent
MAX_LOG_ZERO_MASS = 700.0
DEFAULT_ALIASING_LIMIT = 1e-9


def discretize_severity(sev: SeveritySpec, h: float, n: int) -> np.ndarray:
    """Mass rounding: f_0 = F(h/2), f_k = F((k + 1/2) h) - F((k - 1/2) h).

    Mass above (n - 1/2) h is dropped and shows up as truncation mass.
    """
    if h <= 0:
        raise ParameterDomainError(f"Grid step must be positive, got {h}")
    if n < 1:
        raise ParameterDomainError(f"Grid size must be >= 1, got {n}")
    edges = (np.arange(n) + 0.5) * h
    if sev.family == SeverityFamily.DEGENERATE:
        survival = np.where(sev["value"] > edges, 1.0, 0.0)
    else:
        survival = frozen_distribution(sev).sf(edges)
    return -np.diff(np.concatenate(([1.0], survival)))


def _merged_severity(model: CompoundModel, h: float, n: int):
    lam = sum(cell.frequency.lam for cell in model.cells)
    if lam == 0:
        return 0.0, np.concatenate(([1.0], np.zeros(n - 1)))
    mixture = np.zeros(n)
    for cell in model.cells:
        if cell.frequency.lam > 0:
            mixture += cell.frequency.lam / lam * discretize_severity(cell.severity, h, n)
    return lam, mixture


def _as_model(freq: FrequencySpec, sev: SeveritySpec) -> CompoundModel:
    return CompoundModel.single(freq.lam, sev)


def panjer_from_discrete(lam: float, severity: np.ndarray, h: float) -> AggregatePmf:
    """Poisson (a = 0, b = lam) recursion g_k = lam/k sum_j j f_j g_{k-j}"""
    n = severity.size
    exponent = lam * (1.0 - severity[0])
    if exponent > MAX_LOG_ZERO_MASS:
        raise GridError(
            f"Panjer starting mass exp(-{exponent:.1f}) underflows; "
            f"use a larger grid step than {h:g} or the FFT method"
        )
    nonzero = np.nonzero(severity[1:] > 0)[0]
    support = int(nonzero[-1]) + 2 if nonzero.size else 1
    weighted = np.arange(support) * severity[:support]
    pmf = np.zeros(n)
    pmf[0] = math.exp(-exponent)
    for k in range(1, n):
        width = min(k, support - 1)
        if width == 0:
            break
        pmf[k] = lam / k * np.dot(weighted[1:width + 1], pmf[k - width:k][::-1])
    truncation = max(0.0, 1.0 - float(pmf.sum()))
    return AggregatePmf(h=h, probabilities=pmf, truncation_mass=truncation, method="panjer")


def panjer_aggregate(freq: FrequencySpec, sev: SeveritySpec, h: float, n: int) -> AggregatePmf:
    return panjer_aggregate_model(_as_model(freq, sev), h, n)


def panjer_aggregate_model(model: CompoundModel, h: float, n: int) -> AggregatePmf:
    lam, severity = _merged_severity(model, h, n)
    result = panjer_from_discrete(lam, severity, h)
    logger.debug(f"Panjer on {n} points, h={h:g}: truncation mass {result.truncation_mass:.3e}")
    return result


def fft_from_discrete(lam: float, severity: np.ndarray, h: float, n: int,
                      aliasing_limit: float = DEFAULT_ALIASING_LIMIT) -> AggregatePmf:
    """exp(lam (phi - 1)) in the transform domain; severity already padded"""
    transform = np.fft.rfft(severity)
    padded = np.fft.irfft(np.exp(lam * (transform - 1.0)), severity.size)
    padded = np.clip(padded, 0.0, None)
    pmf = padded[:n].copy()
    wrap_mass = float(padded[n:].sum())
    truncation = max(0.0, 1.0 - float(pmf.sum()))
    warnings = []
    if wrap_mass > aliasing_limit:
        message = (f"FFT padding region holds mass {wrap_mass:.3e} (limit {aliasing_limit:.1e}); "
                   f"wrap-around may distort the pmf, extend the grid or the step")
        logger.warning(message)
        warnings.append(message)
    return AggregatePmf(h=h, probabilities=pmf, truncation_mass=truncation, method="fft", warnings=warnings)


def fft_aggregate(freq: FrequencySpec, sev: SeveritySpec, h: float, n: int, padding: int = 2,
                  aliasing_limit: float = DEFAULT_ALIASING_LIMIT) -> AggregatePmf:
    return fft_aggregate_model(_as_model(freq, sev), h, n, padding, aliasing_limit)


def fft_aggregate_model(model: CompoundModel, h: float, n: int, padding: int = 2,
                        aliasing_limit: float = DEFAULT_ALIASING_LIMIT) -> AggregatePmf:
    if n < 1 or n & (n - 1):
        raise ParameterDomainError(f"FFT grid size must be a power of two, got {n}")
    if padding < 1:
        raise ParameterDomainError(f"Padding factor must be >= 1, got {padding}")
    lam, severity = _merged_severity(model, h, n * padding)
    return fft_from_discrete(lam, severity, h, n, aliasing_limit)


def quantile_from_pmf(pmf: AggregatePmf, q: float) -> float:
    """Smallest grid point with CDF >= q"""
    if not 0 < q < 1:
        raise ParameterDomainError(f"Quantile level must lie in (0, 1), got {q}")
    cdf = np.cumsum(pmf.probabilities)
    if cdf[-1] < q:
        raise GridError(
            f"q={q} lies inside the truncation mass {pmf.truncation_mass:.3e}; the grid "
            f"ends at {pmf.h * (pmf.probabilities.size - 1):,.0f} and must be extended "
            f"(larger step or more points)"
        )
    return float(np.searchsorted(cdf, q, side="left") * pmf.h)


def aggregate_mean(pmf: AggregatePmf) -> float:
    return float(np.dot(pmf.grid, pmf.probabilities))


def total_variation(first: AggregatePmf, second: AggregatePmf) -> float:
    size = max(first.probabilities.size, second.probabilities.size)
    a = np.pad(first.probabilities, (0, size - first.probabilities.size))
    b = np.pad(second.probabilities, (0, size - second.probabilities.size))
    return 0.5 * float(np.abs(a - b).sum())


class _GridAggregator(ILossAggregator):
    def __init__(self, grid_step: float, grid_size: int):
        self.grid_step = grid_step
        self.grid_size = grid_size

    def _aggregate(self, model: CompoundModel) -> AggregatePmf:
        raise NotImplementedError

    def value_at_risk(self, model: CompoundModel, q: float) -> VarEstimate:
        pmf = self._aggregate(model)
        warnings = list(pmf.warnings)
        if pmf.truncation_mass > 1.0 - q:
            message = (f"{self.name}: truncation mass {pmf.truncation_mass:.3e} exceeds 1-q={1 - q:.1e}; "
                       f"the tail is too heavy for this grid, use the mc or sla method")
            logger.warning(message)
            warnings.append(message)
        var = quantile_from_pmf(pmf, q)
        return VarEstimate(q=q, var=var, method=self.name, truncation_mass=pmf.truncation_mass,
                           warnings=warnings)

    def describe(self) -> dict:
        return {"method": self.name, "grid_step": self.grid_step, "grid_size": self.grid_size}


class PanjerAggregator(_GridAggregator):
    name = "panjer"

    def _aggregate(self, model: CompoundModel) -> AggregatePmf:
        return panjer_aggregate_model(model, self.grid_step, self.grid_size)


class FftAggregator(_GridAggregator):
    name = "fft"

    def __init__(self, grid_step: float, grid_size: int, padding: int = 2,
                 aliasing_limit: float = DEFAULT_ALIASING_LIMIT):
        super().__init__(grid_step, grid_size)
        self.padding = padding
        self.aliasing_limit = aliasing_limit

    def _aggregate(self, model: CompoundModel) -> AggregatePmf:
        return fft_aggregate_model(model, self.grid_step, self.grid_size, self.padding, self.aliasing_limit)

    def describe(self) -> dict:
        return {**super().describe(), "padding": self.padding}


class MonteCarloAggregator(ILossAggregator):
    name = "mc"

    def __init__(self, years: int, seed: int, threads: int = 1, chunk_years: int = DEFAULT_CHUNK_YEARS):
        self.years = years
        self.seed = seed
        self.threads = threads
        self.chunk_years = chunk_years

    def value_at_risk(self, model: CompoundModel, q: float) -> VarEstimate:
        return mc_var(model, q, self.years, self.seed, self.threads, self.chunk_years)

    def describe(self) -> dict:
        return {"method": self.name, "years": self.years, "seed": self.seed}


class SlaAggregator(ILossAggregator):
    name = "sla"

    def value_at_risk(self, model: CompoundModel, q: float) -> VarEstimate:
        result = sla_var_model(q, model)
        warnings = [] if result.mean_correction_defined else ["mean correction undefined (infinite mean)"]
        return VarEstimate(q=q, var=result.var, method=self.name, warnings=warnings)

    def describe(self) -> dict:
        return {"method": self.name}


class AggregatorFactory:
    """Registry of VaR engines selectable by name"""

    _aggregators: Dict[str, Type[ILossAggregator]] = {}

    @classmethod
    def register(cls, name: str, aggregator_class: Type[ILossAggregator]):
        cls._aggregators[name] = aggregator_class
        logger.debug(f"Registered aggregator: {name}")

    @classmethod
    def create(cls, name: str, **settings) -> ILossAggregator:
        if name not in cls._aggregators:
            raise ParameterDomainError(f"Unknown aggregation method: {name}, expected one of {cls.available()}")
        return cls._aggregators[name](**settings)

    @classmethod
    def available(cls) -> List[str]:
        return list(cls._aggregators.keys())


AggregatorFactory.register("mc", MonteCarloAggregator)
AggregatorFactory.register("panjer", PanjerAggregator)
AggregatorFactory.register("fft", FftAggregator)
AggregatorFactory.register("sla", SlaAggregator)
