import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import psutil
from dotenv import load_dotenv


class OutputFormat(Enum):
    TABLE = "table"
    JSON = "json"
    CSV = "csv"


@dataclass
class SmaConfig:
    lower_threshold: float = 1e7
    upper_threshold: float = 1e8


@dataclass
class SimulationConfig:
    seed: int = 42
    threads: int = 1
    chunk_years: int = 100_000
    mc_years: int = 1_000_000


@dataclass
class AggregationConfig:
    grid_step: float = 1e4
    grid_size: int = 2 ** 16
    padding: int = 2
    aliasing_limit: float = 1e-9


@dataclass
class FitConfig:
    gof_level: float = 0.05
    min_exceedances: int = 30


@dataclass
class OutputConfig:
    format: OutputFormat = OutputFormat.TABLE
    out_dir: Optional[str] = None


@dataclass
class RuntimeSettings:
    sma: SmaConfig = field(default_factory=SmaConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    aggregation: AggregationConfig = field(default_factory=AggregationConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    log_level: str = "INFO"
    log_file: Optional[str] = None


def default_thread_count() -> int:
    return max(1, psutil.cpu_count(logical=False) or 1)


def load_settings(env_file: Optional[str] = None) -> RuntimeSettings:
    """Settings from a .env file and OPRISK_* environment variables"""
    load_dotenv(env_file)
    settings = RuntimeSettings()
    settings.simulation.seed = int(os.environ.get('OPRISK_SEED', settings.simulation.seed))
    settings.simulation.threads = int(os.environ.get('OPRISK_THREADS', default_thread_count()))
    settings.aggregation.grid_step = float(os.environ.get('OPRISK_GRID_STEP', settings.aggregation.grid_step))
    settings.aggregation.grid_size = int(os.environ.get('OPRISK_GRID_SIZE', settings.aggregation.grid_size))
    settings.fit.gof_level = float(os.environ.get('OPRISK_GOF_LEVEL', settings.fit.gof_level))
    settings.log_level = os.environ.get('OPRISK_LOG_LEVEL', settings.log_level).upper()
    settings.log_file = os.environ.get('OPRISK_LOG_FILE') or None
    return settings
