"""Standardised Measurement Approach capital.

BI, BIC, LC and K_SMA are in millions; loss events are in base UM.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy import special

from models.capital_models import CapitalResult, SmaInputs
from models.errors import ParameterDomainError
from models.risk_models import AnnualLossRecord, FrequencySpec, SeveritySpec
from services.distribution_service import partial_expectation, severity_mean

logger = logging.getLogger(__name__)

MILLION = 1e6
DEFAULT_LOWER_THRESHOLD = 1e7
DEFAULT_UPPER_THRESHOLD = 1e8
MIN_HISTORY_YEARS = 5
MAX_HISTORY_YEARS = 10

# K = 110 + (BIC - 110) * ln(e - 1 + LC / BIC); 110 = bic(1000), so K is continuous there
K_SMA_OFFSET = 110.0
LOG_SHIFT = math.e - 1.0

LC_WEIGHT_ALL = 7.0
LC_WEIGHT_ABOVE_LOWER = 7.0
LC_WEIGHT_ABOVE_UPPER = 5.0


@dataclass(frozen=True)
class BucketSchedule:
    breakpoints: Tuple[float, ...] = (1000.0, 3000.0, 10000.0, 30000.0)
    coefficients: Tuple[float, ...] = (0.11, 0.15, 0.19, 0.23, 0.29)

    @property
    def base_amounts(self) -> Tuple[float, ...]:
        """BIC at the start of each bucket: cumulative marginal sums"""
        bases = [0.0]
        previous = 0.0
        for breakpoint, coefficient in zip(self.breakpoints, self.coefficients):
            bases.append(bases[-1] + coefficient * (breakpoint - previous))
            previous = breakpoint
        return tuple(bases)


DEFAULT_SCHEDULE = BucketSchedule()


def bucket_of(bi: float, schedule: BucketSchedule = DEFAULT_SCHEDULE) -> int:
    """1-based bucket; a breakpoint value belongs to the lower bucket"""
    for index, breakpoint in enumerate(schedule.breakpoints):
        if bi <= breakpoint:
            return index + 1
    return len(schedule.breakpoints) + 1


def bic(bi: float, schedule: BucketSchedule = DEFAULT_SCHEDULE) -> Tuple[float, int]:
    """Business Indicator Component and bucket for a BI in millions"""
    if math.isnan(bi) or bi < 0:
        raise ParameterDomainError(f"Business Indicator must be >= 0, got {bi}")
    bucket = bucket_of(bi, schedule)
    start = schedule.breakpoints[bucket - 2] if bucket > 1 else 0.0
    value = schedule.base_amounts[bucket - 1] + schedule.coefficients[bucket - 1] * (bi - start)
    return value, bucket


def bi_from_components(interest_leasing_dividend: float = 0.0,
                       services: float = 0.0,
                       financial: float = 0.0) -> float:
    """BI as the sum of its three addends (millions)"""
    total = interest_leasing_dividend + services + financial
    if total < 0:
        raise ParameterDomainError(f"BI components sum to a negative value: {total}")
    return total


def _history_arrays(history: Sequence[AnnualLossRecord], lower: float,
                    upper: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-year totals: all events, events > lower, events > upper"""
    totals = np.empty(len(history))
    above_lower = np.empty(len(history))
    above_upper = np.empty(len(history))
    for i, record in enumerate(history):
        events = record.events
        totals[i] = record.total
        above_lower[i] = events[events > lower].sum()
        above_upper[i] = events[events > upper].sum()
    return totals, above_lower, above_upper


def yearly_lc_contributions(history: Sequence[AnnualLossRecord],
                            lower: float = DEFAULT_LOWER_THRESHOLD,
                            upper: float = DEFAULT_UPPER_THRESHOLD) -> np.ndarray:
    """7*total + 7*total(>L) + 5*total(>H) per year, in millions.

    The Loss Component of a window is the mean of these values.
    """
    if not lower < upper:
        raise ParameterDomainError(f"Thresholds must satisfy L < H, got L={lower}, H={upper}")
    totals, above_lower, above_upper = _history_arrays(history, lower, upper)
    return (LC_WEIGHT_ALL * totals + LC_WEIGHT_ABOVE_LOWER * above_lower
            + LC_WEIGHT_ABOVE_UPPER * above_upper) / MILLION


def loss_component(history: Sequence[AnnualLossRecord],
                   lower: float = DEFAULT_LOWER_THRESHOLD,
                   upper: float = DEFAULT_UPPER_THRESHOLD,
                   allow_any_length: bool = False) -> float:
    """Loss Component in millions from T years of history"""
    if len(history) == 0:
        raise ParameterDomainError("Loss history is empty")
    if not allow_any_length and not MIN_HISTORY_YEARS <= len(history) <= MAX_HISTORY_YEARS:
        raise ParameterDomainError(
            f"Loss history must cover {MIN_HISTORY_YEARS}-{MAX_HISTORY_YEARS} years, "
            f"got {len(history)} (pass allow_any_length to override)"
        )
    return float(yearly_lc_contributions(history, lower, upper).mean())


def k_sma(bi: float, lc: float, schedule: BucketSchedule = DEFAULT_SCHEDULE) -> CapitalResult:
    """SMA capital from BI and LC (millions)"""
    if math.isnan(lc) or lc < 0:
        raise ParameterDomainError(f"Loss Component must be >= 0, got {lc}")
    component, bucket = bic(bi, schedule)
    if bucket == 1:
        capital = component
    else:
        capital = K_SMA_OFFSET + (component - K_SMA_OFFSET) * math.log(LOG_SHIFT + lc / component)
    return CapitalResult(k_sma=capital, bucket=bucket, bic=component, lc=lc, bi=bi)


def sma_capital(inputs: SmaInputs) -> CapitalResult:
    lc = loss_component(inputs.loss_history, inputs.lower_threshold, inputs.upper_threshold,
                        allow_any_length=inputs.allow_any_history_length)
    result = k_sma(inputs.bi, lc)
    logger.info(f"SMA capital: BI={inputs.bi:,.1f} bucket={result.bucket} "
                f"BIC={result.bic:,.1f} LC={lc:,.1f} K={result.k_sma:,.1f}")
    return result


def long_run_lc_generic(freq: FrequencySpec, sev: SeveritySpec,
                        lower: float = DEFAULT_LOWER_THRESHOLD,
                        upper: float = DEFAULT_UPPER_THRESHOLD) -> float:
    """Expected Loss Component (millions) of a compound Poisson cell.

    math.inf when the severity mean is infinite.
    """
    if freq.lam == 0:
        return 0.0
    mean = severity_mean(sev)
    if not math.isfinite(mean):
        logger.warning(f"Long-run LC undefined for infinite-mean severity {sev.describe()}")
        return math.inf
    value = freq.lam * (LC_WEIGHT_ALL * mean
                        + LC_WEIGHT_ABOVE_LOWER * partial_expectation(sev, lower)
                        + LC_WEIGHT_ABOVE_UPPER * partial_expectation(sev, upper))
    return value / MILLION


def long_run_lc_lognormal(lam: float, mu: float, sigma: float,
                          lower: float = DEFAULT_LOWER_THRESHOLD,
                          upper: float = DEFAULT_UPPER_THRESHOLD) -> float:
    """Closed-form expected LC (millions) for Poisson-Lognormal"""
    if sigma <= 0:
        raise ParameterDomainError(f"sigma must be positive, got {sigma}")
    mean = math.exp(mu + 0.5 * sigma ** 2)
    shift = sigma ** 2 + mu
    value = lam * mean * (LC_WEIGHT_ALL
                          + LC_WEIGHT_ABOVE_LOWER * special.ndtr((shift - math.log(lower)) / sigma)
                          + LC_WEIGHT_ABOVE_UPPER * special.ndtr((shift - math.log(upper)) / sigma))
    return value / MILLION


def long_run_lc_model(cells: Iterable, lower: float = DEFAULT_LOWER_THRESHOLD,
                      upper: float = DEFAULT_UPPER_THRESHOLD) -> float:
    """Expected LC of independent cells; the LC is additive across cells"""
    return sum(long_run_lc_generic(cell.frequency, cell.severity, lower, upper) for cell in cells)


def rolling_k_sma(history: Sequence[AnnualLossRecord], bi: float, window: int = 10,
                  lower: float = DEFAULT_LOWER_THRESHOLD,
                  upper: float = DEFAULT_UPPER_THRESHOLD) -> np.ndarray:
    """K_SMA on each trailing window; element i uses years i .. i + window - 1"""
    if window < 1 or window > len(history):
        raise ParameterDomainError(f"Window {window} does not fit a {len(history)}-year history")
    contributions = yearly_lc_contributions(history, lower, upper)
    kernel = np.ones(window) / window
    lcs = np.convolve(contributions, kernel, mode="valid")
    return k_sma_vector(bi, lcs)


def k_sma_vector(bi: float, lcs: np.ndarray) -> np.ndarray:
    component, bucket = bic(bi)
    lcs = np.asarray(lcs, dtype=float)
    if bucket == 1:
        return np.full(lcs.shape, component)
    return K_SMA_OFFSET + (component - K_SMA_OFFSET) * np.log(LOG_SHIFT + lcs / component)


def superadditivity_gap(merged: CapitalResult, parts: List[CapitalResult]) -> float:
    """merged K minus the sum of the parts' K; positive means superadditive"""
    return merged.k_sma - sum(part.k_sma for part in parts)
