from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np


@dataclass
class BoxplotSummary:
    label: str
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    lower_whisker: float
    upper_whisker: float
    outliers: List[float] = field(default_factory=list)

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1

    @classmethod
    def from_values(cls, label: str, values, whisker: float = 1.5) -> "BoxplotSummary":
        """Tukey boxplot: whiskers at the most extreme points within whisker * IQR"""
        data = np.sort(np.asarray(values, dtype=float))
        q1, median, q3 = np.percentile(data, [25, 50, 75])
        reach = whisker * (q3 - q1)
        inside = data[(data >= q1 - reach) & (data <= q3 + reach)]
        outliers = data[(data < q1 - reach) | (data > q3 + reach)]
        return cls(label=label, minimum=float(data[0]), q1=float(q1), median=float(median), q3=float(q3),
                   maximum=float(data[-1]), lower_whisker=float(inside[0]), upper_whisker=float(inside[-1]),
                   outliers=[float(x) for x in outliers])

    def to_row(self) -> Dict:
        return {"label": self.label, "minimum": self.minimum, "lower_whisker": self.lower_whisker,
                "q1": self.q1, "median": self.median, "q3": self.q3, "upper_whisker": self.upper_whisker,
                "maximum": self.maximum, "iqr": self.iqr, "outlier_count": len(self.outliers),
                "max_over_median": self.maximum / self.median if self.median else float("nan")}


@dataclass
class ExperimentReport:
    """Study output; monetary values in millions, every stochastic row carries its seed"""

    study: str
    seed: int
    config: Dict
    summary: List[Dict] = field(default_factory=list)
    series: Dict[str, List[float]] = field(default_factory=dict)
    boxplots: List[BoxplotSummary] = field(default_factory=list)
    grid: List[Dict] = field(default_factory=list)
    checks: Dict[str, bool] = field(default_factory=dict)
    metrics: Dict[str, float] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
