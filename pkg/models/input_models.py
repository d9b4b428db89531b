"""Validated external input: loss-event rows and configuration documents."""

from datetime import date
from enum import Enum
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.risk_models import CompoundModel, FrequencySpec, RiskCell, SeveritySpec


class BusinessLine(Enum):
    CORPORATE_FINANCE = "corporate_finance"
    TRADING_AND_SALES = "trading_and_sales"
    RETAIL_BANKING = "retail_banking"
    COMMERCIAL_BANKING = "commercial_banking"
    PAYMENT_AND_SETTLEMENT = "payment_and_settlement"
    AGENCY_SERVICES = "agency_services"
    ASSET_MANAGEMENT = "asset_management"
    RETAIL_BROKERAGE = "retail_brokerage"


class EventType(Enum):
    INTERNAL_FRAUD = "internal_fraud"
    EXTERNAL_FRAUD = "external_fraud"
    EMPLOYMENT_PRACTICES = "employment_practices"
    CLIENTS_PRODUCTS = "clients_products"
    PHYSICAL_ASSETS = "physical_assets"
    SYSTEM_FAILURES = "system_failures"
    EXECUTION_DELIVERY = "execution_delivery"


LOSS_CSV_COLUMNS = ("entity_id", "occurrence_date", "amount", "business_line", "event_type")
REQUIRED_LOSS_COLUMNS = ("entity_id", "occurrence_date", "amount")


class LossEvent(BaseModel):
    """One loss; the occurrence date defines its year"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    entity_id: str = ""
    occurrence_date: date
    amount: float = Field(gt=0, allow_inf_nan=False)
    business_line: Optional[BusinessLine] = None
    event_type: Optional[EventType] = None

    @field_validator("business_line", "event_type", mode="before")
    @classmethod
    def blank_is_none(cls, value):
        if isinstance(value, str):
            value = value.strip().lower()
            return value or None
        return value


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class UnitsBlock(_Strict):
    amounts: Literal["UM"] = "UM"
    capital: Literal["millions"] = "millions"


class SeverityBlock(_Strict):
    family: str
    params: Dict[str, float]

    def to_spec(self) -> SeveritySpec:
        return SeveritySpec.from_dict({"family": self.family, "params": self.params})


class FrequencyBlock(_Strict):
    family: Literal["poisson"] = "poisson"
    lam: float = Field(ge=0)


class CellBlock(_Strict):
    name: str = ""
    frequency: FrequencyBlock
    severity: SeverityBlock


class ModelBlock(_Strict):
    cells: List[CellBlock] = Field(min_length=1)

    def to_compound_model(self) -> CompoundModel:
        return CompoundModel(tuple(
            RiskCell(FrequencySpec(cell.frequency.lam), cell.severity.to_spec(), cell.name or f"cell{i}")
            for i, cell in enumerate(self.cells)
        ))


class BiComponents(_Strict):
    interest_leasing_dividend: float = 0.0
    services: float = 0.0
    financial: float = 0.0


class SmaBlock(_Strict):
    bi: Optional[float] = Field(default=None, ge=0)
    bi_components: Optional[BiComponents] = None
    lc: Optional[float] = Field(default=None, ge=0)
    losses: Optional[str] = None
    lower_threshold: float = Field(default=1e7, gt=0)
    upper_threshold: float = Field(default=1e8, gt=0)
    allow_any_history_length: bool = False

    @model_validator(mode="after")
    def one_bi_source(self):
        if (self.bi is None) == (self.bi_components is None):
            raise ValueError("give exactly one of bi or bi_components")
        if self.lower_threshold >= self.upper_threshold:
            raise ValueError("lower_threshold must be below upper_threshold")
        return self


class LdaBlock(_Strict):
    method: Literal["mc", "panjer", "fft", "sla"] = "sla"
    quantiles: List[float] = Field(default_factory=lambda: [0.999])
    years: int = Field(default=1_000_000, ge=1)
    grid_step: Optional[float] = Field(default=None, gt=0)
    grid_size: Optional[int] = Field(default=None, ge=1)
    padding: int = Field(default=2, ge=1)
    expected_loss_offset: bool = False

    @field_validator("quantiles")
    @classmethod
    def levels_in_unit_interval(cls, value):
        if not value or any(not 0 < q < 1 for q in value):
            raise ValueError("quantiles must be a non-empty list inside (0, 1)")
        return value


class ExperimentBlock(_Strict):
    study: Literal["instability", "sigma", "superadditivity", "implied-bi-grid"]
    years: Optional[int] = Field(default=None, ge=1)
    window: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = None
    bi: Optional[float] = Field(default=None, ge=0)
    parameters: Dict[str, Any] = Field(default_factory=dict)


class ConfigDocument(_Strict):
    units: UnitsBlock = Field(default_factory=UnitsBlock)
    seed: Optional[int] = None
    model: Optional[ModelBlock] = None
    sma: Optional[SmaBlock] = None
    lda: Optional[LdaBlock] = None
    experiments: List[ExperimentBlock] = Field(default_factory=list)
