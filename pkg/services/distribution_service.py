"""Severity and frequency families.

Every operation is pure given (spec, stream). Severity families are backed by
scipy.stats frozen distributions; the parameter table lives next to
SeverityFamily in models/risk_models.py.
"""

import logging
import math
from typing import Union

import numpy as np
from scipy import special, stats

from models.errors import ParameterDomainError
from models.risk_models import (
    FAMILY_PARAMETERS,
    FrequencySpec,
    RngStream,
    SeverityFamily,
    SeveritySpec,
)

logger = logging.getLogger(__name__)

RandomSource = Union[RngStream, np.random.Generator]


class _LogGammaSeverityGen(stats.rv_continuous):
    """X = exp(Y), Y ~ Gamma(shape, rate); support [1, inf)."""

    def _pdf(self, x, shape, rate):
        return np.exp(self._logpdf(x, shape, rate))

    def _logpdf(self, x, shape, rate):
        log_x = np.log(x)
        return (shape * np.log(rate) - special.gammaln(shape)
                + (shape - 1) * np.log(log_x) - (rate + 1) * log_x)

    def _cdf(self, x, shape, rate):
        return special.gammainc(shape, rate * np.log(x))

    def _sf(self, x, shape, rate):
        return special.gammaincc(shape, rate * np.log(x))

    def _ppf(self, q, shape, rate):
        return np.exp(special.gammaincinv(shape, q) / rate)

    def _rvs(self, shape, rate, size=None, random_state=None):
        return np.exp(random_state.gamma(shape, 1.0 / rate, size))


loggamma_severity = _LogGammaSeverityGen(a=1.0, name="loggamma_severity")


def _generator(source: RandomSource) -> np.random.Generator:
    if isinstance(source, np.random.Generator):
        return source
    return source.generator()


def frozen_distribution(spec: SeveritySpec):
    """scipy frozen distribution for a non-degenerate spec"""
    p = spec.params
    family = spec.family
    if family == SeverityFamily.LOGNORMAL:
        return stats.lognorm(s=p["sigma"], scale=math.exp(p["mu"]))
    if family == SeverityFamily.GAMMA:
        return stats.gamma(a=p["alpha"], scale=p["beta"])
    if family == SeverityFamily.GPD:
        return stats.genpareto(c=p["xi"], loc=p["u"], scale=p["beta"])
    if family == SeverityFamily.WEIBULL:
        return stats.weibull_min(c=p["shape"], scale=p["scale"])
    if family == SeverityFamily.PARETO:
        return stats.pareto(b=p["alpha"], scale=p["xm"])
    if family == SeverityFamily.LOG_LOGISTIC:
        return stats.fisk(c=p["shape"], scale=p["scale"])
    if family == SeverityFamily.LOG_GAMMA:
        return loggamma_severity(p["a"], p["b"])
    if family == SeverityFamily.GENERALIZED_GAMMA:
        return stats.gengamma(a=p["a"], c=p["c"], scale=p["scale"])
    raise ParameterDomainError(f"{family.value} has no continuous distribution")


def parameter_count(family: SeverityFamily) -> int:
    """Number of estimated parameters (GPD location is the fixed threshold)"""
    count = len(FAMILY_PARAMETERS[family])
    return count - 1 if family == SeverityFamily.GPD else count


def draw_severity(spec: SeveritySpec, rng: np.random.Generator, n: int) -> np.ndarray:
    if n < 0:
        raise ParameterDomainError(f"Sample size must be >= 0, got {n}")
    if n == 0:
        return np.empty(0)
    if spec.family == SeverityFamily.DEGENERATE:
        return np.full(n, spec["value"])
    return np.asarray(frozen_distribution(spec).rvs(size=n, random_state=rng), dtype=float)


def sample_severity(spec: SeveritySpec, stream: RandomSource, n: int) -> np.ndarray:
    """n independent severity draws, deterministic given the stream"""
    return draw_severity(spec, _generator(stream), n)


def severity_cdf(spec: SeveritySpec, x):
    if spec.family == SeverityFamily.DEGENERATE:
        result = np.where(np.asarray(x, dtype=float) >= spec["value"], 1.0, 0.0)
    else:
        result = frozen_distribution(spec).cdf(x)
    return float(result) if np.ndim(result) == 0 else result


def severity_sf(spec: SeveritySpec, x):
    """P(X > x), computed directly so far-tail values keep their precision"""
    if spec.family == SeverityFamily.DEGENERATE:
        result = np.where(np.asarray(x, dtype=float) < spec["value"], 1.0, 0.0)
    else:
        result = frozen_distribution(spec).sf(x)
    return float(result) if np.ndim(result) == 0 else result


def severity_pdf(spec: SeveritySpec, x):
    if spec.family == SeverityFamily.DEGENERATE:
        raise ParameterDomainError("degenerate severity has no density")
    return frozen_distribution(spec).pdf(x)


def severity_logpdf(spec: SeveritySpec, x):
    if spec.family == SeverityFamily.DEGENERATE:
        raise ParameterDomainError("degenerate severity has no density")
    return frozen_distribution(spec).logpdf(x)


def severity_quantile(spec: SeveritySpec, p):
    p_array = np.asarray(p, dtype=float)
    if np.any((p_array <= 0) | (p_array >= 1)) or np.any(np.isnan(p_array)):
        raise ParameterDomainError(f"Quantile level must lie in (0, 1), got {p}")
    if spec.family == SeverityFamily.DEGENERATE:
        result = np.full_like(p_array, spec["value"])
    elif spec.family == SeverityFamily.LOGNORMAL:
        result = np.exp(spec["mu"] + spec["sigma"] * special.ndtri(p_array))
    else:
        result = frozen_distribution(spec).ppf(p_array)
    return float(result) if np.ndim(result) == 0 else result


def severity_mean(spec: SeveritySpec) -> float:
    """E[X], or math.inf when the family/parameters give an infinite mean"""
    p = spec.params
    family = spec.family
    if family == SeverityFamily.LOGNORMAL:
        return math.exp(p["mu"] + 0.5 * p["sigma"] ** 2)
    if family == SeverityFamily.GAMMA:
        return p["alpha"] * p["beta"]
    if family == SeverityFamily.GPD:
        return p["u"] + p["beta"] / (1.0 - p["xi"]) if p["xi"] < 1 else math.inf
    if family == SeverityFamily.WEIBULL:
        return p["scale"] * math.gamma(1.0 + 1.0 / p["shape"])
    if family == SeverityFamily.PARETO:
        return p["alpha"] * p["xm"] / (p["alpha"] - 1.0) if p["alpha"] > 1 else math.inf
    if family == SeverityFamily.LOG_LOGISTIC:
        if p["shape"] <= 1:
            return math.inf
        ratio = math.pi / p["shape"]
        return p["scale"] * ratio / math.sin(ratio)
    if family == SeverityFamily.LOG_GAMMA:
        return (p["b"] / (p["b"] - 1.0)) ** p["a"] if p["b"] > 1 else math.inf
    if family == SeverityFamily.GENERALIZED_GAMMA:
        return p["scale"] * math.exp(special.gammaln(p["a"] + 1.0 / p["c"]) - special.gammaln(p["a"]))
    return p["value"]


def severity_second_moment(spec: SeveritySpec) -> float:
    """E[X^2], or math.inf when it diverges"""
    p = spec.params
    family = spec.family
    if family == SeverityFamily.LOGNORMAL:
        return math.exp(2.0 * p["mu"] + 2.0 * p["sigma"] ** 2)
    if family == SeverityFamily.GAMMA:
        return p["alpha"] * (p["alpha"] + 1.0) * p["beta"] ** 2
    if family == SeverityFamily.GPD:
        xi = p["xi"]
        if xi >= 0.5:
            return math.inf
        variance = p["beta"] ** 2 / ((1.0 - xi) ** 2 * (1.0 - 2.0 * xi))
        return variance + severity_mean(spec) ** 2
    if family == SeverityFamily.WEIBULL:
        return p["scale"] ** 2 * math.gamma(1.0 + 2.0 / p["shape"])
    if family == SeverityFamily.PARETO:
        return p["alpha"] * p["xm"] ** 2 / (p["alpha"] - 2.0) if p["alpha"] > 2 else math.inf
    if family == SeverityFamily.LOG_LOGISTIC:
        if p["shape"] <= 2:
            return math.inf
        ratio = 2.0 * math.pi / p["shape"]
        return p["scale"] ** 2 * ratio / math.sin(ratio)
    if family == SeverityFamily.LOG_GAMMA:
        return (p["b"] / (p["b"] - 2.0)) ** p["a"] if p["b"] > 2 else math.inf
    if family == SeverityFamily.GENERALIZED_GAMMA:
        return p["scale"] ** 2 * math.exp(special.gammaln(p["a"] + 2.0 / p["c"]) - special.gammaln(p["a"]))
    return p["value"] ** 2


def has_finite_mean(spec: SeveritySpec) -> bool:
    return math.isfinite(severity_mean(spec))


def support_lower_bound(spec: SeveritySpec) -> float:
    if spec.family == SeverityFamily.DEGENERATE:
        return spec["value"]
    return float(frozen_distribution(spec).support()[0])


def partial_expectation(spec: SeveritySpec, u: float) -> float:
    """E[X * 1{X > u}]; math.inf for infinite-mean specs.

    Closed forms for every family: regularized incomplete gamma for the gamma
    family and its transforms, power laws for Pareto/GPD, incomplete beta for
    the log-logistic.
    """
    if u < 0 or math.isnan(u):
        raise ParameterDomainError(f"Threshold must be >= 0, got {u}")
    mean = severity_mean(spec)
    if not math.isfinite(mean):
        return math.inf
    if spec.family == SeverityFamily.DEGENERATE:
        return spec["value"] if spec["value"] > u else 0.0
    if u <= support_lower_bound(spec):
        return mean
    if math.isinf(u):
        return 0.0

    p = spec.params
    family = spec.family
    if family == SeverityFamily.LOGNORMAL:
        return mean * special.ndtr((p["sigma"] ** 2 + p["mu"] - math.log(u)) / p["sigma"])
    if family == SeverityFamily.GAMMA:
        return mean * special.gammaincc(p["alpha"] + 1.0, u / p["beta"])
    if family == SeverityFamily.WEIBULL:
        return mean * special.gammaincc(1.0 + 1.0 / p["shape"], (u / p["scale"]) ** p["shape"])
    if family == SeverityFamily.GENERALIZED_GAMMA:
        return mean * special.gammaincc(p["a"] + 1.0 / p["c"], (u / p["scale"]) ** p["c"])
    if family == SeverityFamily.LOG_GAMMA:
        return mean * special.gammaincc(p["a"], (p["b"] - 1.0) * math.log(u))
    if family == SeverityFamily.PARETO:
        return mean * (p["xm"] / u) ** (p["alpha"] - 1.0)
    if family == SeverityFamily.GPD:
        # excess over u is again GPD with scale beta + xi * (u - loc)
        survival = float(frozen_distribution(spec).sf(u))
        if survival == 0.0:
            return 0.0
        return survival * (u + (p["beta"] + p["xi"] * (u - p["u"])) / (1.0 - p["xi"]))
    if family == SeverityFamily.LOG_LOGISTIC:
        inverse_shape = 1.0 / p["shape"]
        survival = 1.0 / (1.0 + (u / p["scale"]) ** p["shape"])
        return mean * special.betainc(1.0 - inverse_shape, 1.0 + inverse_shape, survival)
    raise ParameterDomainError(f"No partial expectation for {family.value}")


def poisson_sample(freq: FrequencySpec, stream: RandomSource, size: int = None):
    """Poisson annual count; an array of counts when size is given"""
    rng = _generator(stream)
    if size is None:
        return int(rng.poisson(freq.lam))
    return rng.poisson(freq.lam, size=size)
