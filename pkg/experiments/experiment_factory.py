import dataclasses
import logging
from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Type

from config.experiment_settings import STUDY_CONFIGS, ExperimentConfig, Study
from models.errors import ConfigError
from models.experiment_models import ExperimentReport
from utils.report_writer import ReportWriter, to_jsonable

logger = logging.getLogger(__name__)


class BaseExperiment(ABC):
    """Base class for the scripted studies"""

    def __init__(self, config: ExperimentConfig):
        if config.years < config.window:
            raise ConfigError(f"years ({config.years}) must be >= window ({config.window})")
        self.config = config

    @abstractmethod
    def run(self) -> ExperimentReport:
        pass

    def new_report(self) -> ExperimentReport:
        # output location and thread count do not change results
        settings = {k: v for k, v in to_jsonable(self.config).items() if k not in ("out_dir", "threads")}
        return ExperimentReport(study=self.config.study.value, seed=self.config.seed, config=settings)

    def write(self, report: ExperimentReport, out_dir: str) -> List[str]:
        """CSV per table plus the full JSON report"""
        writer = ReportWriter(out_dir, report.study, report.seed, report.config)
        if report.summary:
            writer.write_table("summary", report.summary)
        if report.series:
            rows = [{"series": name, "index": i, "value": value}
                    for name, values in sorted(report.series.items()) for i, value in enumerate(values)]
            writer.write_table("series", rows)
        if report.boxplots:
            writer.write_table("boxplots", [box.to_row() for box in report.boxplots])
        if report.grid:
            writer.write_table("grid", report.grid)
        writer.write_json("report", report)
        logger.info(f"{report.study}: wrote {len(writer.written)} files to {out_dir}")
        return writer.written


class ExperimentFactory:
    """Registry of studies selectable by name"""

    _experiments: Dict[Study, Type[BaseExperiment]] = {}

    @classmethod
    def register_experiment(cls, study: Study, experiment_class: Type[BaseExperiment]):
        cls._experiments[study] = experiment_class
        logger.debug(f"Registered experiment: {study.value}")

    @classmethod
    def create_experiment(cls, config: ExperimentConfig) -> BaseExperiment:
        if config.study not in cls._experiments:
            raise ConfigError(f"Unknown study: {config.study}")
        return cls._experiments[config.study](config)

    @classmethod
    def get_available_studies(cls) -> List[str]:
        return [study.value for study in cls._experiments]


def parse_study(name: str) -> Study:
    for study in Study:
        if study.value == name:
            return study
    raise ConfigError(f"Unknown study '{name}', expected one of {[s.value for s in Study]}")


def build_config(study: Study, overrides: Optional[Dict] = None) -> ExperimentConfig:
    """Study defaults with overrides applied; unknown keys are rejected"""
    config_class = STUDY_CONFIGS[study]
    names = {f.name for f in dataclasses.fields(config_class)}
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    unknown = sorted(set(overrides) - names)
    if unknown:
        raise ConfigError(f"{study.value}: unknown parameters {unknown}")
    for key, value in overrides.items():
        if isinstance(value, list):
            overrides[key] = tuple(value)
    return config_class(**overrides)


def run_experiment(config: ExperimentConfig, out_dir: Optional[str] = None) -> ExperimentReport:
    experiment = ExperimentFactory.create_experiment(config)
    logger.info(f"Running {config.study.value} with seed {config.seed}")
    report = experiment.run()
    target = out_dir or config.out_dir
    if target:
        experiment.write(report, target)
    return report
