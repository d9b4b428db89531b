from abc import ABC, abstractmethod

from models.risk_models import CompoundModel, VarEstimate


class ILossAggregator(ABC):
    """Interface for annual-loss VaR engines"""

    name: str = ""

    @abstractmethod
    def value_at_risk(self, model: CompoundModel, q: float) -> VarEstimate:
        """VaR of the annual aggregate loss at level q, in base UM"""
        pass

    @abstractmethod
    def describe(self) -> dict:
        """Settings that determine the estimate"""
        pass
