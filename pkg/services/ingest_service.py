"""Loss-event CSV ingestion, annualization and configuration documents."""

import json
import logging
import os
from collections import defaultdict
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError

from models.errors import ConfigError, IngestError, ParameterDomainError, RowError
from models.input_models import LOSS_CSV_COLUMNS, REQUIRED_LOSS_COLUMNS, ConfigDocument, LossEvent
from models.risk_models import AnnualLossRecord

logger = logging.getLogger(__name__)


def _first_error(error: ValidationError) -> str:
    details = error.errors()[0]
    field = ".".join(str(part) for part in details["loc"])
    return f"{field}: {details['msg']}"


def load_loss_csv(path: str) -> List[LossEvent]:
    """Validated loss events; every bad row is reported with its file line number"""
    if not os.path.exists(path):
        raise IngestError(f"Loss file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True,
                            skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise IngestError(f"{path}: no header row, expected {','.join(LOSS_CSV_COLUMNS)}")

    frame.columns = [column.strip() for column in frame.columns]
    missing = [column for column in REQUIRED_LOSS_COLUMNS if column not in frame.columns]
    unknown = [column for column in frame.columns if column not in LOSS_CSV_COLUMNS]
    if missing or unknown:
        raise IngestError(f"{path}: header mismatch, missing {missing}, unknown {unknown}")

    # blank lines stay in the frame so the index tracks file lines; drop them here
    blank = frame.fillna("").apply(lambda column: column.str.strip()).eq("").all(axis=1)
    frame = frame[~blank]
    if frame.empty:
        logger.warning(f"{path} has a header but no loss events")
        return []

    events = []
    row_errors = []
    # line 1 is the header, frame index 0 is line 2
    for index, row in zip(frame.index, frame.to_dict(orient="records")):
        line = int(index) + 2
        try:
            events.append(LossEvent.model_validate(row))
        except ValidationError as e:
            row_errors.append(RowError(line, _first_error(e)))
    if row_errors:
        logger.error(f"{path}: {len(row_errors)} invalid rows")
        raise IngestError(f"{path}: {len(row_errors)} invalid rows", row_errors)

    logger.info(f"Loaded {len(events)} loss events from {path}")
    return events


def annualize(events: Sequence[LossEvent], start_year: int, end_year: int) -> List[AnnualLossRecord]:
    """One record per calendar year in [start_year, end_year], empty years included"""
    if end_year < start_year:
        raise ParameterDomainError(f"end_year {end_year} precedes start_year {start_year}")
    amounts: Dict[int, List[float]] = defaultdict(list)
    outside = 0
    for event in events:
        year = event.occurrence_date.year
        if start_year <= year <= end_year:
            amounts[year].append(event.amount)
        else:
            outside += 1
    if outside:
        logger.warning(f"{outside} events fall outside {start_year}-{end_year} and were ignored")
    return [
        AnnualLossRecord.from_events(year, np.sort(np.asarray(amounts.get(year, []), dtype=float)))
        for year in range(start_year, end_year + 1)
    ]


def event_years(events: Sequence[LossEvent]) -> tuple:
    """(first, last) occurrence year of a non-empty event list"""
    years = [event.occurrence_date.year for event in events]
    return min(years), max(years)


def load_config_document(path: str) -> ConfigDocument:
    """JSON or YAML configuration, validated with unknown keys rejected"""
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        if path.lower().endswith((".yaml", ".yml")):
            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"{path}: cannot parse: {e}")
    try:
        return ConfigDocument.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"{path}: {problems}")


def config_json_schema() -> dict:
    return ConfigDocument.model_json_schema()


def write_annual_records(records: Sequence[AnnualLossRecord], path: str,
                         lower: float = 1e7, upper: float = 1e8) -> str:
    """Per-year totals (base UM), including the parts above each LC threshold"""
    rows = [{
        "year_index": record.year_index,
        "event_count": record.event_count,
        "total": record.total,
        "total_above_lower": float(record.events[record.events > lower].sum()),
        "total_above_upper": float(record.events[record.events > upper].sum()),
    } for record in records]
    columns = ["year_index", "event_count", "total", "total_above_lower", "total_above_upper"]
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False, float_format="%.17g")
    logger.debug(f"Wrote {len(rows)} annual records to {path}")
    return path
