import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from models.errors import ParameterDomainError


class SeverityFamily(Enum):
    LOGNORMAL = "lognormal"
    GAMMA = "gamma"
    GPD = "gpd"
    WEIBULL = "weibull"
    PARETO = "pareto"
    LOG_LOGISTIC = "loglogistic"
    LOG_GAMMA = "loggamma"
    GENERALIZED_GAMMA = "gengamma"
    DEGENERATE = "degenerate"

    @classmethod
    def parse(cls, name: str) -> "SeverityFamily":
        key = name.strip().lower().replace("-", "").replace("_", "")
        for family in cls:
            if family.value == key:
                return family
        raise ParameterDomainError(
            f"Unknown severity family '{name}', expected one of {[f.value for f in cls]}"
        )


# Parameter names per family, in the order used by optimizers and reports.
# lognormal          mu (mean of log), sigma > 0 (sd of log)
# gamma              alpha > 0 (shape), beta > 0 (scale)
# gpd                xi (shape), beta > 0 (scale), u >= 0 (location)
# weibull            shape > 0, scale > 0;            F = 1 - exp(-(x/scale)^shape)
# pareto             alpha > 0 (tail index), xm > 0;  F = 1 - (xm/x)^alpha, x >= xm
# loglogistic        scale > 0, shape > 0;            F = 1 / (1 + (x/scale)^-shape)
# loggamma           a > 0 (shape), b > 0 (rate);     ln X ~ Gamma(a, rate b), X >= 1
# gengamma           a > 0, c > 0, scale > 0;         (X/scale)^c ~ Gamma(a, 1)
# degenerate         value >= 0 (point mass)
FAMILY_PARAMETERS: Dict[SeverityFamily, Tuple[str, ...]] = {
    SeverityFamily.LOGNORMAL: ("mu", "sigma"),
    SeverityFamily.GAMMA: ("alpha", "beta"),
    SeverityFamily.GPD: ("xi", "beta", "u"),
    SeverityFamily.WEIBULL: ("shape", "scale"),
    SeverityFamily.PARETO: ("alpha", "xm"),
    SeverityFamily.LOG_LOGISTIC: ("scale", "shape"),
    SeverityFamily.LOG_GAMMA: ("a", "b"),
    SeverityFamily.GENERALIZED_GAMMA: ("a", "c", "scale"),
    SeverityFamily.DEGENERATE: ("value",),
}

_POSITIVE_PARAMETERS = {"sigma", "alpha", "beta", "shape", "scale", "xm", "a", "b", "c"}


@dataclass(frozen=True)
class SeveritySpec:
    family: SeverityFamily
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        expected = FAMILY_PARAMETERS[self.family]
        params = dict(self.params)
        if self.family == SeverityFamily.GPD:
            params.setdefault("u", 0.0)
        missing = [name for name in expected if name not in params]
        unknown = [name for name in params if name not in expected]
        if missing or unknown:
            raise ParameterDomainError(
                f"{self.family.value}: expected parameters {expected}, "
                f"missing {missing}, unknown {unknown}"
            )
        for name, value in params.items():
            if not math.isfinite(value):
                raise ParameterDomainError(f"{self.family.value}: {name} must be finite, got {value}")
            if name in _POSITIVE_PARAMETERS and value <= 0:
                raise ParameterDomainError(f"{self.family.value}: {name} must be positive, got {value}")
        if self.family == SeverityFamily.GPD and params["u"] < 0:
            raise ParameterDomainError(f"gpd: location u must be >= 0, got {params['u']}")
        if self.family == SeverityFamily.DEGENERATE and params["value"] < 0:
            raise ParameterDomainError(f"degenerate: value must be >= 0, got {params['value']}")
        object.__setattr__(self, "params", {name: float(params[name]) for name in expected})

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    @property
    def parameter_values(self) -> Tuple[float, ...]:
        return tuple(self.params.values())

    def describe(self) -> str:
        args = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.family.value}({args})"

    def to_dict(self) -> Dict:
        return {"family": self.family.value, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, data: Dict) -> "SeveritySpec":
        return cls(SeverityFamily.parse(data["family"]), dict(data["params"]))

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> "SeveritySpec":
        return cls(SeverityFamily.LOGNORMAL, {"mu": mu, "sigma": sigma})

    @classmethod
    def gamma(cls, alpha: float, beta: float) -> "SeveritySpec":
        return cls(SeverityFamily.GAMMA, {"alpha": alpha, "beta": beta})

    @classmethod
    def gpd(cls, xi: float, beta: float, u: float = 0.0) -> "SeveritySpec":
        return cls(SeverityFamily.GPD, {"xi": xi, "beta": beta, "u": u})

    @classmethod
    def weibull(cls, shape: float, scale: float) -> "SeveritySpec":
        return cls(SeverityFamily.WEIBULL, {"shape": shape, "scale": scale})

    @classmethod
    def pareto(cls, alpha: float, xm: float) -> "SeveritySpec":
        return cls(SeverityFamily.PARETO, {"alpha": alpha, "xm": xm})

    @classmethod
    def loglogistic(cls, scale: float, shape: float) -> "SeveritySpec":
        return cls(SeverityFamily.LOG_LOGISTIC, {"scale": scale, "shape": shape})

    @classmethod
    def loggamma(cls, a: float, b: float) -> "SeveritySpec":
        return cls(SeverityFamily.LOG_GAMMA, {"a": a, "b": b})

    @classmethod
    def gengamma(cls, a: float, c: float, scale: float) -> "SeveritySpec":
        return cls(SeverityFamily.GENERALIZED_GAMMA, {"a": a, "c": c, "scale": scale})

    @classmethod
    def degenerate(cls, value: float) -> "SeveritySpec":
        return cls(SeverityFamily.DEGENERATE, {"value": value})


@dataclass(frozen=True)
class FrequencySpec:
    """Poisson annual event count. lam = 0 is accepted and yields no events."""

    lam: float
    family: str = "poisson"

    def __post_init__(self):
        if self.family != "poisson":
            raise ParameterDomainError(f"Only Poisson frequency is supported, got {self.family}")
        if not math.isfinite(self.lam) or self.lam < 0:
            raise ParameterDomainError(f"Poisson lambda must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class RngStream:
    """Counter-based substream addressed by (seed, stream_id).

    stream_id is a tuple of nonnegative integers such as (entity, year); two
    streams with equal labels produce identical draws in any execution order.
    """

    seed: int
    stream_id: Tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(self.stream_id))
        return np.random.Generator(np.random.Philox(sequence))

    def child(self, *labels: int) -> "RngStream":
        return RngStream(self.seed, tuple(self.stream_id) + tuple(labels))

    def derived_seed(self) -> int:
        """Integer seed for an independent run, e.g. one entity of a study"""
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(self.stream_id))
        return int(sequence.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class RiskCell:
    frequency: FrequencySpec
    severity: SeveritySpec
    name: str = ""


@dataclass(frozen=True)
class CompoundModel:
    cells: Tuple[RiskCell, ...]

    def __post_init__(self):
        cells = tuple(self.cells)
        if not cells:
            raise ParameterDomainError("A compound model needs at least one risk cell")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def single(cls, lam: float, severity: SeveritySpec, name: str = "") -> "CompoundModel":
        return cls((RiskCell(FrequencySpec(lam), severity, name),))

    @classmethod
    def of(cls, *pairs: Tuple[float, SeveritySpec]) -> "CompoundModel":
        return cls(tuple(RiskCell(FrequencySpec(lam), sev, f"cell{i}") for i, (lam, sev) in enumerate(pairs)))


@dataclass
class AnnualLossRecord:
    year_index: int
    events: np.ndarray
    total: float

    @classmethod
    def from_events(cls, year_index: int, events: Sequence[float]) -> "AnnualLossRecord":
        array = np.asarray(events, dtype=float)
        if array.size and array.min() < 0:
            raise ParameterDomainError(f"Year {year_index}: loss amounts must be >= 0")
        return cls(year_index=year_index, events=array, total=math.fsum(array))

    @property
    def event_count(self) -> int:
        return int(self.events.size)


@dataclass
class AggregatePmf:
    """Compound-loss pmf on the lattice {0, h, 2h, ...}."""

    h: float
    probabilities: np.ndarray
    truncation_mass: float
    method: str = ""
    warnings: List[str] = field(default_factory=list)

    @property
    def grid(self) -> np.ndarray:
        return self.h * np.arange(self.probabilities.size)

    @property
    def covered_mass(self) -> float:
        return float(self.probabilities.sum())


@dataclass
class SlaResult:
    var: float
    quantile_term: float
    mean_term: float
    mean_correction_defined: bool = True


@dataclass
class VarEstimate:
    """Annual-loss VaR at level q, amounts in base UM."""

    q: float
    var: float
    method: str
    lower: Optional[float] = None
    upper: Optional[float] = None
    years: Optional[int] = None
    seed: Optional[int] = None
    truncation_mass: Optional[float] = None
    warnings: List[str] = field(default_factory=list)
