import dataclasses
import hashlib
import json
import logging
import math
import os
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """Plain JSON types for dataclasses, enums and numpy values"""
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        # JSON has no NaN or Infinity
        number = float(value)
        return number if math.isfinite(number) else None
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def config_hash(config: Any, length: int = 10) -> str:
    """Stable short hash of a configuration object"""
    text = json.dumps(to_jsonable(config), sort_keys=True, default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:length]


def dumps(payload: Any) -> str:
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True, allow_nan=False)


class ReportWriter:
    """Writes report tables (CSV) and structured reports (JSON) under out_dir.

    Filenames embed study, seed and config hash; contents carry no timestamps,
    so equal inputs give byte-identical files.
    """

    def __init__(self, out_dir: str, study: str, seed: Optional[int], config: Any):
        self.out_dir = out_dir
        self.stem = f"{study}_seed{seed}_{config_hash(config)}"
        self.written: List[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def path_for(self, name: str, extension: str) -> str:
        return os.path.join(self.out_dir, f"{self.stem}_{name}.{extension}")

    def write_json(self, name: str, payload: Any) -> str:
        path = self.path_for(name, "json")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(dumps(payload))
            f.write("\n")
        self.written.append(path)
        logger.debug(f"Wrote {path}")
        return path

    def write_table(self, name: str, rows: Union[pd.DataFrame, Sequence[Dict]]) -> str:
        path = self.path_for(name, "csv")
        frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame([to_jsonable(r) for r in rows])
        frame.to_csv(path, index=False, lineterminator="\n")
        self.written.append(path)
        logger.debug(f"Wrote {path}")
        return path


def format_millions(value: float) -> str:
    """Thousands separators for table output; raw values go to JSON/CSV"""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "n/a"
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return f"{value:,.1f}"


def format_table(rows: Sequence[Dict], columns: Optional[Sequence[str]] = None) -> str:
    """Aligned plain-text table"""
    if not rows:
        return "(no rows)"
    columns = list(columns or rows[0].keys())
    cells = [[_cell(row.get(column)) for column in columns] for row in rows]
    widths = [max(len(column), *(len(r[i]) for r in cells)) for i, column in enumerate(columns)]
    lines = ["  ".join(column.rjust(w) for column, w in zip(columns, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(value.rjust(w) for value, w in zip(r, widths)) for r in cells]
    return "\n".join(lines)


def _cell(value: Any) -> str:
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, (float, np.floating)):
        return format_millions(float(value))
    return str(to_jsonable(value))
