"""Loss Distribution Approach: annual-loss simulation and VaR estimates.

Amounts are in base UM.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Sequence

import numpy as np
from scipy import optimize, stats

from models.errors import ParameterDomainError
from models.risk_models import (
    AnnualLossRecord,
    CompoundModel,
    FrequencySpec,
    RngStream,
    SeveritySpec,
    SlaResult,
    VarEstimate,
)
from services.distribution_service import (
    draw_severity,
    severity_mean,
    severity_quantile,
    severity_second_moment,
    severity_sf,
    support_lower_bound,
)

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_YEARS = 100_000
CONFIDENCE_BAND = 0.95


def simulate_year(model: CompoundModel, year_index: int, seed: int) -> AnnualLossRecord:
    """One year drawn cell by cell from the (seed, year) substream"""
    rng = RngStream(seed, (year_index,)).generator()
    parts = []
    for cell in model.cells:
        count = int(rng.poisson(cell.frequency.lam)) if cell.frequency.lam > 0 else 0
        parts.append(draw_severity(cell.severity, rng, count))
    return AnnualLossRecord.from_events(year_index, np.concatenate(parts))


def simulate_years(model: CompoundModel, years: int, seed: int,
                   threads: int = 1, first_year: int = 0) -> List[AnnualLossRecord]:
    """Per-year event lists; identical for any thread count"""
    if years < 1:
        raise ParameterDomainError(f"years must be >= 1, got {years}")
    indices = range(first_year, first_year + years)
    if threads <= 1:
        records = [simulate_year(model, i, seed) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda i: simulate_year(model, i, seed), indices))
    logger.debug(f"Simulated {years} years with seed {seed}")
    return records


def _simulate_chunk(model: CompoundModel, chunk_index: int, years: int, seed: int) -> np.ndarray:
    rng = RngStream(seed, (1, chunk_index)).generator()
    totals = np.zeros(years)
    for cell in model.cells:
        if cell.frequency.lam == 0:
            continue
        counts = rng.poisson(cell.frequency.lam, size=years)
        amounts = draw_severity(cell.severity, rng, int(counts.sum()))
        totals += np.bincount(np.repeat(np.arange(years), counts), weights=amounts, minlength=years)
    return totals


def simulate_annual_totals(model: CompoundModel, years: int, seed: int, threads: int = 1,
                           chunk_years: int = DEFAULT_CHUNK_YEARS) -> np.ndarray:
    """Vectorized annual totals for large year counts.

    Years are generated in fixed-size chunks, each from its own substream, so
    the result depends on (seed, chunk_years) but not on the thread count.
    """
    if years < 1:
        raise ParameterDomainError(f"years must be >= 1, got {years}")
    sizes = [min(chunk_years, years - start) for start in range(0, years, chunk_years)]
    jobs = list(enumerate(sizes))
    if threads <= 1 or len(jobs) == 1:
        chunks = [_simulate_chunk(model, i, n, seed) for i, n in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda job: _simulate_chunk(model, job[0], job[1], seed), jobs))
    return np.concatenate(chunks)


def _order_statistic_rank(n: int, q: float) -> int:
    """1-based rank ceil(q n), guarded against floating noise in q n"""
    return min(max(int(math.ceil(q * n - 1e-9)), 1), n)


def var_empirical(samples: Sequence[float], q: float) -> float:
    """The ceil(q n)-th order statistic"""
    data = np.asarray(samples, dtype=float)
    if data.size == 0:
        raise ParameterDomainError("Cannot take a quantile of an empty sample")
    if not 0 < q < 1:
        raise ParameterDomainError(f"Quantile level must lie in (0, 1), got {q}")
    rank = _order_statistic_rank(data.size, q)
    return float(np.partition(data, rank - 1)[rank - 1])


def order_statistic_band(samples: Sequence[float], q: float,
                         confidence: float = CONFIDENCE_BAND) -> tuple:
    """Distribution-free confidence band for the q-quantile from binomial ranks"""
    data = np.sort(np.asarray(samples, dtype=float))
    n = data.size
    tail = (1.0 - confidence) / 2.0
    lower_rank = int(max(stats.binom.ppf(tail, n, q), 1))
    upper_rank = int(min(stats.binom.ppf(1.0 - tail, n, q) + 1, n))
    return float(data[lower_rank - 1]), float(data[upper_rank - 1])


def sla_var(alpha: float, freq: FrequencySpec, sev: SeveritySpec) -> SlaResult:
    """Single-loss approximation F^-1(1 - (1 - alpha) / lam) + lam * E[X]"""
    if not 0 < alpha < 1:
        raise ParameterDomainError(f"alpha must lie in (0, 1), got {alpha}")
    if freq.lam <= 0 or (1.0 - alpha) / freq.lam >= 1:
        raise ParameterDomainError(
            f"SLA quantile undefined: (1 - alpha) / lambda = {(1 - alpha) / max(freq.lam, 1e-300):.4g} >= 1"
        )
    quantile_term = severity_quantile(sev, 1.0 - (1.0 - alpha) / freq.lam)
    mean = severity_mean(sev)
    if not math.isfinite(mean):
        logger.warning(f"SLA mean correction undefined for {sev.describe()}; reporting quantile term only")
        return SlaResult(var=quantile_term, quantile_term=quantile_term, mean_term=math.inf,
                         mean_correction_defined=False)
    mean_term = freq.lam * mean
    return SlaResult(var=quantile_term + mean_term, quantile_term=quantile_term, mean_term=mean_term)


def sla_var_lognormal(alpha: float, lam: float, mu: float, sigma: float) -> float:
    return sla_var(alpha, FrequencySpec(lam), SeveritySpec.lognormal(mu, sigma)).var


def sla_var_model(alpha: float, model: CompoundModel) -> SlaResult:
    """SLA for several cells.

    The sum of independent compound Poisson cells is compound Poisson with
    rate Lambda = sum(lam) and the lam-weighted severity mixture, so the
    quantile term solves sum(lam_j * P(X_j > x)) = 1 - alpha. Cells with
    lam = 0 drop out; a single active cell reduces to sla_var.
    """
    if not 0 < alpha < 1:
        raise ParameterDomainError(f"alpha must lie in (0, 1), got {alpha}")
    active = [cell for cell in model.cells if cell.frequency.lam > 0]
    total_rate = sum(cell.frequency.lam for cell in active)
    if total_rate == 0 or (1.0 - alpha) / total_rate >= 1:
        raise ParameterDomainError(
            f"SLA quantile undefined: (1 - alpha) / total lambda = "
            f"{(1 - alpha) / max(total_rate, 1e-300):.4g} >= 1"
        )
    if len(active) == 1:
        return sla_var(alpha, active[0].frequency, active[0].severity)

    tail = 1.0 - alpha

    def excess_rate(x: float) -> float:
        return sum(cell.frequency.lam * severity_sf(cell.severity, x) for cell in active) - tail

    # at the largest per-cell level where each cell carries tail / len(active),
    # the summed exceedance rate is at most the target
    share = tail / len(active)
    upper = max(
        severity_quantile(cell.severity, 1.0 - share / cell.frequency.lam)
        if share < cell.frequency.lam else support_lower_bound(cell.severity)
        for cell in active
    )
    lower = min(support_lower_bound(cell.severity) for cell in active)
    if excess_rate(upper) >= 0:
        quantile_term = upper
    elif excess_rate(lower) <= 0:
        quantile_term = lower
    else:
        quantile_term = float(optimize.brentq(excess_rate, lower, upper,
                                              xtol=max(1e-9 * upper, 1e-12), rtol=1e-12))

    means = [cell.frequency.lam * severity_mean(cell.severity) for cell in active]
    if not all(math.isfinite(m) for m in means):
        logger.warning("SLA mean correction undefined: a cell has an infinite severity mean")
        return SlaResult(quantile_term, quantile_term, math.inf, False)
    mean_term = sum(means)
    return SlaResult(quantile_term + mean_term, quantile_term, mean_term)


def compound_mean(model: CompoundModel) -> float:
    """E[Z] = sum over cells of lam * E[X]"""
    return sum(cell.frequency.lam * severity_mean(cell.severity) for cell in model.cells)


def compound_variance(model: CompoundModel) -> float:
    """Var[Z] = sum over cells of lam * E[X^2]; math.inf for heavy tails"""
    return sum(cell.frequency.lam * severity_second_moment(cell.severity)
               for cell in model.cells if cell.frequency.lam > 0)


def mc_var(model: CompoundModel, q: float, years: int, seed: int, threads: int = 1,
           chunk_years: int = DEFAULT_CHUNK_YEARS) -> VarEstimate:
    totals = simulate_annual_totals(model, years, seed, threads, chunk_years)
    var = var_empirical(totals, q)
    lower, upper = order_statistic_band(totals, q)
    logger.info(f"Monte Carlo VaR({q}) over {years:,} years: {var:,.0f} "
                f"[{lower:,.0f}, {upper:,.0f}]")
    return VarEstimate(q=q, var=var, method="mc", lower=lower, upper=upper, years=years, seed=seed)
