import numpy as np
import pytest

from models.risk_models import SeveritySpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def large_loss_severity():
    """Lognormal(14, 2), the large-loss severity used across the capital examples"""
    return SeveritySpec.lognormal(14.0, 2.0)


@pytest.fixture
def write_loss_csv(tmp_path):
    """Write loss-event rows (dicts or raw lines) under the standard header and return the path"""

    def _write(rows, name="losses.csv", header="entity_id,occurrence_date,amount,business_line,event_type"):
        lines = [header]
        for row in rows:
            if isinstance(row, str):
                lines.append(row)
            else:
                lines.append(",".join(str(row.get(column, "")) for column in header.split(",")))
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return str(path)

    return _write
