"""Calibration: implied Business Indicator, severity fitting and model selection."""

import logging
import math
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import optimize, stats

from models.capital_models import FitResult, GofReport, ImpliedBiResult, MeanExcessPoint, ModelRanking
from models.errors import (
    DegenerateDataError,
    InsufficientDataError,
    OpRiskError,
    ParameterDomainError,
)
from models.risk_models import FrequencySpec, SeverityFamily, SeveritySpec
from services.distribution_service import frozen_distribution, parameter_count, severity_quantile
from services.lda_service import sla_var
from services.sma_service import (
    DEFAULT_LOWER_THRESHOLD,
    DEFAULT_SCHEDULE,
    DEFAULT_UPPER_THRESHOLD,
    MILLION,
    BucketSchedule,
    bic,
    k_sma,
    long_run_lc_generic,
    long_run_lc_lognormal,
)

logger = logging.getLogger(__name__)

BI_BRACKET_UPPER = 1e7
BRACKET_EXPANSIONS = 30
IMPLIED_BI_TOLERANCE = 1e-6

MIN_FIT_OBSERVATIONS = 10
MIN_EXCEEDANCES = 30

# Asymptotic Anderson-Darling critical values, fully specified null
AD_CRITICAL_VALUES = {0.10: 1.933, 0.05: 2.492, 0.025: 3.070, 0.01: 3.857}


def implied_bi(target_var: float, lc: float, schedule: BucketSchedule = DEFAULT_SCHEDULE,
               tolerance: float = IMPLIED_BI_TOLERANCE) -> ImpliedBiResult:
    """BI (millions) whose K_SMA at the given LC equals target_var (millions).

    K_SMA is continuous and strictly increasing in BI, so the root is unique.
    Targets at or below the bucket-1 ceiling invert the linear branch directly.
    """
    if math.isnan(target_var) or target_var <= 0:
        raise ParameterDomainError(f"Target capital must be positive, got {target_var}")
    if math.isnan(lc) or lc < 0:
        raise ParameterDomainError(f"Loss Component must be >= 0, got {lc}")

    first_ceiling = schedule.breakpoints[0]
    if target_var <= bic(first_ceiling, schedule)[0]:
        bi = target_var / schedule.coefficients[0]
        return ImpliedBiResult(bi=bi, converged=True, iterations=0, residual=0.0,
                               target_var=target_var, lc=lc, bucket=1)

    def gap(bi: float) -> float:
        return k_sma(bi, lc, schedule).k_sma - target_var

    lower, upper = first_ceiling, BI_BRACKET_UPPER
    expansions = 0
    while gap(upper) < 0:
        if expansions >= BRACKET_EXPANSIONS:
            message = f"No bracket for target {target_var:,.1f} up to BI={upper:,.0f}"
            logger.warning(message)
            return ImpliedBiResult(bi=math.nan, converged=False, iterations=expansions, residual=math.nan,
                                   target_var=target_var, lc=lc, message=message)
        lower, upper = upper, upper * 10.0
        expansions += 1

    root, info = optimize.brentq(gap, lower, upper, xtol=1e-12, rtol=4 * np.finfo(float).eps,
                                 maxiter=500, full_output=True, disp=False)
    residual = abs(gap(root))
    converged = bool(info.converged) and residual <= tolerance * target_var
    result = ImpliedBiResult(bi=root, converged=converged, iterations=info.iterations + expansions,
                             residual=residual, target_var=target_var, lc=lc,
                             bucket=k_sma(root, lc, schedule).bucket,
                             message="" if converged else info.flag)
    if not converged:
        logger.warning(f"Implied BI did not converge: {info.flag}, residual {residual:.3e}")
    return result


def implied_bi_from_model(alpha: float, freq: FrequencySpec, sev: SeveritySpec,
                          lower: float = DEFAULT_LOWER_THRESHOLD,
                          upper: float = DEFAULT_UPPER_THRESHOLD) -> ImpliedBiResult:
    """Long-run LC plus SLA capital, then the BI that equates SMA and LDA"""
    if sev.family == SeverityFamily.LOGNORMAL:
        lc = long_run_lc_lognormal(freq.lam, sev["mu"], sev["sigma"], lower, upper)
    else:
        lc = long_run_lc_generic(freq, sev, lower, upper)
    sla = sla_var(alpha, freq, sev)
    target = sla.var / MILLION
    if not math.isfinite(lc) or not sla.mean_correction_defined:
        message = f"Infinite-mean severity {sev.describe()}: LC or LDA capital undefined"
        logger.warning(message)
        return ImpliedBiResult(bi=math.nan, converged=False, iterations=0, residual=math.nan,
                               target_var=target, lc=lc, message=message)
    result = implied_bi(target, lc)
    logger.debug(f"Implied BI for {sev.describe()} at lambda={freq.lam:g}: "
                 f"LDA={target:,.1f} LC={lc:,.1f} BI={result.bi:,.1f}")
    return result


def _checked_sample(data: Sequence[float], minimum: int = MIN_FIT_OBSERVATIONS) -> np.ndarray:
    sample = np.asarray(data, dtype=float).ravel()
    if sample.size < minimum:
        raise InsufficientDataError(f"Need at least {minimum} observations, got {sample.size}")
    if not np.all(np.isfinite(sample)) or np.any(sample <= 0):
        raise ParameterDomainError("Loss amounts must be finite and positive")
    return sample


def _information_criteria(log_likelihood: float, k: int, n: int) -> Tuple[float, float]:
    return 2 * k - 2 * log_likelihood, k * math.log(n) - 2 * log_likelihood


def _result(spec: SeveritySpec, sample: np.ndarray, log_likelihood: float, threshold: Optional[float] = None,
            standard_errors: Optional[dict] = None, converged: bool = True) -> FitResult:
    k = parameter_count(spec.family)
    aic, bic_criterion = _information_criteria(log_likelihood, k, sample.size)
    return FitResult(spec=spec, log_likelihood=log_likelihood, aic=aic, bic_criterion=bic_criterion,
                     n_used=int(sample.size), threshold=threshold, standard_errors=standard_errors,
                     converged=converged)


def _log_likelihood(spec: SeveritySpec, sample: np.ndarray) -> float:
    return float(np.sum(frozen_distribution(spec).logpdf(sample)))


def _fit_lognormal(sample: np.ndarray) -> FitResult:
    logs = np.log(sample)
    mu, sigma = float(logs.mean()), float(logs.std())
    spec = SeveritySpec.lognormal(mu, sigma)
    n = sample.size
    errors = {"mu": sigma / math.sqrt(n), "sigma": sigma / math.sqrt(2 * n)}
    return _result(spec, sample, _log_likelihood(spec, sample), standard_errors=errors)


def _fit_pareto(sample: np.ndarray) -> FitResult:
    xm = float(sample.min())
    alpha = sample.size / float(np.sum(np.log(sample / xm)))
    spec = SeveritySpec.pareto(alpha, xm)
    return _result(spec, sample, _log_likelihood(spec, sample),
                   standard_errors={"alpha": alpha / math.sqrt(sample.size)})


# Starting points (natural parameters) for the simplex search
def _start_gamma(sample):
    mean, var = sample.mean(), sample.var()
    return {"alpha": mean ** 2 / var, "beta": var / mean}


def _start_weibull(sample):
    logs = np.log(sample)
    shape = 1.2825 / logs.std()
    return {"shape": shape, "scale": math.exp(logs.mean() + 0.5772 / shape)}


def _start_loglogistic(sample):
    logs = np.log(sample)
    return {"scale": float(np.median(sample)), "shape": math.pi / (math.sqrt(3.0) * logs.std())}


def _start_loggamma(sample):
    logs = np.log(sample)
    if np.any(logs <= 0):
        raise ParameterDomainError("loggamma severity needs every amount > 1")
    mean, var = logs.mean(), logs.var()
    return {"a": mean ** 2 / var, "b": mean / var}


def _start_gengamma(sample):
    weibull = _start_weibull(sample)
    return {"a": 1.0, "c": weibull["shape"], "scale": weibull["scale"]}


def _start_gpd(sample):
    mean, var = sample.mean(), sample.var()
    xi = min(max(0.5 * (1.0 - mean ** 2 / var), -0.4), 0.9)
    return {"xi": xi, "beta": mean * (1.0 - xi)}


_STARTING_POINTS: Dict[SeverityFamily, Callable[[np.ndarray], dict]] = {
    SeverityFamily.GAMMA: _start_gamma,
    SeverityFamily.WEIBULL: _start_weibull,
    SeverityFamily.LOG_LOGISTIC: _start_loglogistic,
    SeverityFamily.LOG_GAMMA: _start_loggamma,
    SeverityFamily.GENERALIZED_GAMMA: _start_gengamma,
    SeverityFamily.GPD: _start_gpd,
}


def _simplex_fit(sample: np.ndarray, family: SeverityFamily, start: dict,
                 fixed: Optional[dict] = None) -> Tuple[SeveritySpec, float, bool]:
    """Nelder-Mead on log-transformed positive parameters; the GPD shape is free"""
    fixed = fixed or {}
    names = list(start.keys())
    free_sign = {name: name == "xi" for name in names}

    def to_spec(theta) -> SeveritySpec:
        params = {name: (value if free_sign[name] else math.exp(value)) for name, value in zip(names, theta)}
        return SeveritySpec(family, {**params, **fixed})

    def objective(theta) -> float:
        try:
            value = -_log_likelihood(to_spec(theta), sample)
        except (ParameterDomainError, OverflowError):
            return np.inf
        return value if math.isfinite(value) else np.inf

    x0 = np.array([start[name] if free_sign[name] else math.log(start[name]) for name in names])
    res = optimize.minimize(objective, x0, method="Nelder-Mead",
                            options={"xatol": 1e-8, "fatol": 1e-8, "maxiter": 4000 * len(names),
                                     "maxfev": 8000 * len(names)})
    if not math.isfinite(res.fun):
        raise DegenerateDataError(f"{family.value}: likelihood is not finite near the starting point")
    if not res.success:
        logger.warning(f"{family.value} fit stopped early: {res.message}")
    return to_spec(res.x), -float(res.fun), bool(res.success)


def fit_mle(data: Sequence[float], family, start: Optional[dict] = None) -> FitResult:
    """Maximum-likelihood severity fit.

    Lognormal and Pareto use closed forms. Other families use a simplex search
    from a moment-based start (or the given start). GPD is fitted with location 0.
    """
    family = SeverityFamily.parse(family) if isinstance(family, str) else family
    sample = _checked_sample(data)
    if family == SeverityFamily.DEGENERATE:
        raise ParameterDomainError("A point mass is not fitted by maximum likelihood")
    if parameter_count(family) > 1 and np.ptp(sample) == 0:
        raise DegenerateDataError(f"All {sample.size} amounts are equal; {family.value} is not identifiable")

    if family == SeverityFamily.LOGNORMAL:
        result = _fit_lognormal(sample)
    elif family == SeverityFamily.PARETO:
        result = _fit_pareto(sample)
    else:
        initial = start or _STARTING_POINTS[family](sample)
        fixed = {"u": 0.0} if family == SeverityFamily.GPD else None
        spec, log_likelihood, converged = _simplex_fit(sample, family, initial, fixed)
        threshold = 0.0 if family == SeverityFamily.GPD else None
        result = _result(spec, sample, log_likelihood, threshold=threshold, converged=converged)
    logger.info(f"MLE {result.spec.describe()}: logL={result.log_likelihood:,.2f} AIC={result.aic:,.2f}")
    return result


def fit_pot_gpd(data: Sequence[float], threshold: float, min_exceedances: int = MIN_EXCEEDANCES) -> FitResult:
    """GPD (xi, beta) fitted by maximum likelihood to the excesses over threshold"""
    sample = np.asarray(data, dtype=float).ravel()
    if threshold < 0 or math.isnan(threshold):
        raise ParameterDomainError(f"POT threshold must be >= 0, got {threshold}")
    excesses = sample[sample > threshold] - threshold
    if excesses.size < min_exceedances:
        raise InsufficientDataError(
            f"Only {excesses.size} exceedances above {threshold:,.2f}; need at least {min_exceedances}"
        )
    if np.ptp(excesses) == 0:
        raise DegenerateDataError("All exceedances are equal")
    spec, log_likelihood, converged = _simplex_fit(excesses, SeverityFamily.GPD, _start_gpd(excesses),
                                                   fixed={"u": 0.0})
    fitted = SeveritySpec.gpd(spec["xi"], spec["beta"], threshold)
    result = _result(fitted, excesses, log_likelihood, threshold=threshold, converged=converged)
    logger.info(f"POT above {threshold:,.2f}: {excesses.size} exceedances, "
                f"xi={fitted['xi']:.4f} beta={fitted['beta']:,.2f}")
    return result


def _anderson_darling(sample: np.ndarray, spec: SeveritySpec) -> float:
    dist = frozen_distribution(spec)
    ordered = np.sort(sample)
    n = ordered.size
    log_cdf = np.maximum(dist.logcdf(ordered), -745.0)
    log_sf = np.maximum(dist.logsf(ordered[::-1]), -745.0)
    weights = 2 * np.arange(1, n + 1) - 1
    return float(-n - np.sum(weights * (log_cdf + log_sf)) / n)


def goodness_of_fit(data: Sequence[float], spec: SeveritySpec, level: float = 0.05) -> GofReport:
    """Kolmogorov-Smirnov and Anderson-Darling against a fully specified spec"""
    sample = _checked_sample(data)
    if level not in AD_CRITICAL_VALUES:
        raise ParameterDomainError(f"GoF level must be one of {sorted(AD_CRITICAL_VALUES)}, got {level}")
    if spec.family == SeverityFamily.DEGENERATE:
        raise ParameterDomainError("GoF needs a continuous severity")
    n = sample.size
    ks = stats.kstest(sample, frozen_distribution(spec).cdf)
    ad = max(_anderson_darling(sample, spec), 0.0)
    ks_critical = float(stats.kstwobign.ppf(1.0 - level)) / math.sqrt(n)
    ad_critical = AD_CRITICAL_VALUES[level]
    ks_passed = bool(ks.statistic < ks_critical)
    ad_passed = bool(ad < ad_critical)
    return GofReport(ks_statistic=float(ks.statistic), ad_statistic=ad, n=n, level=level,
                     ks_critical=ks_critical, ad_critical=ad_critical,
                     passed=ks_passed and ad_passed, ks_passed=ks_passed, ad_passed=ad_passed)


def mean_excess(data: Sequence[float], thresholds: Optional[Iterable[float]] = None) -> List[MeanExcessPoint]:
    """Empirical mean excess e(u) = mean(X - u | X > u) for each threshold"""
    sample = np.asarray(data, dtype=float).ravel()
    if sample.size == 0:
        raise InsufficientDataError("Mean excess needs data")
    if thresholds is None:
        thresholds = np.quantile(sample, np.linspace(0.5, 0.99, 50))
    points = []
    for u in thresholds:
        above = sample[sample > u]
        value = float((above - u).mean()) if above.size else math.nan
        points.append(MeanExcessPoint(threshold=float(u), mean_excess=value, exceedances=int(above.size)))
    return points


def qq_points(data: Sequence[float], spec: SeveritySpec) -> pd.DataFrame:
    """Fitted versus empirical quantiles at plotting positions (i - 0.5) / n"""
    ordered = np.sort(_checked_sample(data, minimum=1))
    probabilities = (np.arange(1, ordered.size + 1) - 0.5) / ordered.size
    return pd.DataFrame({
        "probability": probabilities,
        "theoretical": np.asarray(severity_quantile(spec, probabilities), dtype=float),
        "empirical": ordered,
    })


def select_model(data: Sequence[float], families: Iterable, level: float = 0.05) -> ModelRanking:
    """Fit each family, test it, and rank by AIC; failed fits are reported, not raised"""
    sample = _checked_sample(data)
    scored = []
    failures = []
    for family in families:
        name = family if isinstance(family, str) else family.value
        try:
            fit = fit_mle(sample, family)
            scored.append((fit, goodness_of_fit(sample, fit.spec, level)))
        except OpRiskError as e:
            logger.warning(f"Fit failed for {name}: {e}")
            failures.append(f"{name}: {e}")
    scored.sort(key=lambda pair: pair[0].aic)
    return ModelRanking(fits=[fit for fit, _ in scored], gof=[gof for _, gof in scored], failures=failures)


def fit_frequency(counts: Sequence[int]) -> FrequencySpec:
    """Poisson MLE: the mean annual event count"""
    values = np.asarray(counts, dtype=float)
    if values.size == 0:
        raise InsufficientDataError("Need at least one year of counts")
    if np.any(values < 0) or np.any(values != np.floor(values)):
        raise ParameterDomainError("Annual counts must be nonnegative integers")
    return FrequencySpec(float(values.mean()))
