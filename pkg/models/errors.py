from dataclasses import dataclass
from typing import List


class OpRiskError(Exception):
    """Base class for all capital-model errors"""


class ParameterDomainError(OpRiskError, ValueError):
    """Parameters or inputs outside the domain an operation accepts"""


class GridError(OpRiskError):
    """Discretized aggregation cannot represent the requested quantity"""


class DegenerateDataError(OpRiskError):
    """Data cannot identify the parameters of the requested family"""


class InsufficientDataError(OpRiskError):
    """Not enough observations for the requested procedure"""


class ConfigError(OpRiskError):
    """Configuration document is invalid or requests unsupported features"""


@dataclass
class RowError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


class IngestError(OpRiskError):
    """Loss data file failed validation"""

    def __init__(self, message: str, row_errors: List[RowError] = None):
        self.row_errors = row_errors or []
        details = "; ".join(str(e) for e in self.row_errors[:10])
        if len(self.row_errors) > 10:
            details += f"; ... {len(self.row_errors) - 10} more"
        super().__init__(f"{message}: {details}" if details else message)
