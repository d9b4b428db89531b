import json
import logging
from datetime import date

import pandas as pd
import pytest

from models.errors import ConfigError, IngestError, ParameterDomainError
from models.input_models import BusinessLine, ConfigDocument, EventType, LossEvent
from models.risk_models import SeverityFamily
from services.ingest_service import (
    annualize,
    config_json_schema,
    event_years,
    load_config_document,
    load_loss_csv,
    write_annual_records,
)


def event(day, amount):
    return LossEvent(entity_id="E1", occurrence_date=day, amount=amount)


class TestLoadLossCsv:
    def test_valid_rows(self, write_loss_csv):
        path = write_loss_csv([
            {"entity_id": "E1", "occurrence_date": "2015-03-01", "amount": "1.5e7",
             "business_line": "retail_banking", "event_type": "external_fraud"},
            {"entity_id": "E1", "occurrence_date": "2016-07-14", "amount": "250000"},
        ])
        events = load_loss_csv(path)
        assert len(events) == 2
        assert events[0].amount == 1.5e7
        assert events[0].occurrence_date == date(2015, 3, 1)
        assert events[0].business_line is BusinessLine.RETAIL_BANKING
        assert events[0].event_type is EventType.EXTERNAL_FRAUD
        assert events[1].business_line is None

    def test_optional_columns_may_be_absent(self, write_loss_csv):
        path = write_loss_csv(["E2,2019-01-01,1000"], header="entity_id,occurrence_date,amount")
        assert load_loss_csv(path)[0].entity_id == "E2"

    def test_row_errors_carry_line_numbers(self, write_loss_csv):
        path = write_loss_csv([
            "E1,2015-03-01,-5,,",
            "E1,2015-03-02,100,,",
            "E1,2015-13-01,100,,",
            "E1,2015-03-04,100,mining,",
        ])
        with pytest.raises(IngestError) as caught:
            load_loss_csv(path)
        assert [error.line for error in caught.value.row_errors] == [2, 4, 5]
        assert "amount" in caught.value.row_errors[0].message

    def test_blank_lines_keep_file_line_numbers(self, write_loss_csv):
        path = write_loss_csv([
            "E1,2015-03-01,100,,",
            "",
            "E1,2015-03-02,-1,,",
            "",
            "E1,2015-13-01,100,,",
        ])
        with pytest.raises(IngestError) as caught:
            load_loss_csv(path)
        assert [error.line for error in caught.value.row_errors] == [4, 6]

    def test_blank_lines_are_skipped(self, write_loss_csv):
        path = write_loss_csv(["", "E1,2015-03-01,100,,", "", "E2,2016-03-01,200,,", ""])
        assert [event.entity_id for event in load_loss_csv(path)] == ["E1", "E2"]

    @pytest.mark.parametrize("header", [
        "entity_id,occurrence_date",
        "entity_id,occurrence_date,amount,currency",
    ])
    def test_header_mismatch(self, write_loss_csv, header):
        path = write_loss_csv([], header=header)
        with pytest.raises(IngestError, match="header mismatch"):
            load_loss_csv(path)

    def test_header_only_file(self, write_loss_csv, caplog):
        path = write_loss_csv([])
        with caplog.at_level(logging.WARNING):
            assert load_loss_csv(path) == []
        assert "no loss events" in caplog.text

    def test_missing_and_empty_files(self, tmp_path):
        with pytest.raises(IngestError, match="not found"):
            load_loss_csv(str(tmp_path / "absent.csv"))
        empty = tmp_path / "empty.csv"
        empty.write_text("", encoding="utf-8")
        with pytest.raises(IngestError, match="no header"):
            load_loss_csv(str(empty))


class TestAnnualize:
    def test_every_year_in_range(self):
        events = [event(date(2017, 5, 1), 3.0), event(date(2015, 1, 2), 9.0), event(date(2017, 1, 1), 1.0)]
        records = annualize(events, 2014, 2018)
        assert [r.year_index for r in records] == [2014, 2015, 2016, 2017, 2018]
        assert [r.event_count for r in records] == [0, 1, 0, 2, 0]
        assert records[3].events.tolist() == [1.0, 3.0]
        assert records[3].total == 4.0

    def test_events_outside_range_are_ignored(self, caplog):
        events = [event(date(2010, 5, 1), 3.0), event(date(2015, 1, 2), 9.0)]
        with caplog.at_level(logging.WARNING):
            records = annualize(events, 2015, 2015)
        assert records[0].total == 9.0
        assert "outside" in caplog.text

    def test_range_order(self):
        with pytest.raises(ParameterDomainError):
            annualize([], 2020, 2019)

    def test_event_years(self):
        events = [event(date(2017, 5, 1), 3.0), event(date(2012, 1, 2), 9.0)]
        assert event_years(events) == (2012, 2017)

    def test_write_annual_records(self, tmp_path):
        records = annualize([event(date(2015, 1, 1), 2e7), event(date(2015, 6, 1), 2e8),
                             event(date(2016, 1, 1), 5.0)], 2015, 2016)
        path = write_annual_records(records, str(tmp_path / "out" / "years.csv"))
        frame = pd.read_csv(path)
        assert frame["event_count"].tolist() == [2, 1]
        assert frame["total_above_lower"].tolist() == [2.2e8, 0.0]
        assert frame["total_above_upper"].tolist() == [2e8, 0.0]


class TestConfigDocument:
    DOCUMENT = {
        "seed": 7,
        "model": {"cells": [
            {"frequency": {"lam": 10}, "severity": {"family": "lognormal", "params": {"mu": 14, "sigma": 2}}},
            {"name": "small", "frequency": {"lam": 990},
             "severity": {"family": "gamma", "params": {"alpha": 1, "beta": 1e4}}},
        ]},
        "sma": {"bi": 2000, "lc": 150},
        "lda": {"method": "panjer", "quantiles": [0.99, 0.999], "grid_step": 1e4, "grid_size": 4096},
    }

    def test_json_document(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(self.DOCUMENT), encoding="utf-8")
        document = load_config_document(str(path))
        model = document.model.to_compound_model()
        assert [cell.name for cell in model.cells] == ["cell0", "small"]
        assert model.cells[1].severity.family is SeverityFamily.GAMMA
        assert document.lda.quantiles == [0.99, 0.999]
        assert document.units.amounts == "UM"

    def test_yaml_document(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("seed: 3\nexperiments:\n  - study: sigma\n    years: 500\n", encoding="utf-8")
        document = load_config_document(str(path))
        assert document.experiments[0].study == "sigma"
        assert document.experiments[0].years == 500

    @pytest.mark.parametrize("change", [
        {"unknown_block": {}},
        {"sma": {"bi": 2000, "bi_components": {"services": 10}}},
        {"sma": {"bi": 2000, "lower_threshold": 1e8, "upper_threshold": 1e7}},
        {"lda": {"quantiles": [1.0]}},
        {"lda": {"method": "saddlepoint"}},
        {"units": {"amounts": "EUR"}},
    ])
    def test_invalid_documents(self, tmp_path, change):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({**self.DOCUMENT, **change}), encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config_document(str(path))

    def test_unparseable_and_missing(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="cannot parse"):
            load_config_document(str(path))
        with pytest.raises(ConfigError, match="not found"):
            load_config_document(str(tmp_path / "absent.yaml"))

    def test_schema(self):
        schema = config_json_schema()
        assert set(schema["properties"]) >= {"units", "seed", "model", "sma", "lda", "experiments"}
        assert schema == ConfigDocument.model_json_schema()
