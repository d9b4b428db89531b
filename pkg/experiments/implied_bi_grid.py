"""Implied Business Indicator over a grid of lognormal severities."""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Tuple

from config.experiment_settings import ImpliedBiGridConfig, Study
from experiments.experiment_factory import BaseExperiment, ExperimentFactory
from models.experiment_models import ExperimentReport
from models.risk_models import FrequencySpec, SeveritySpec
from services.calibration_service import implied_bi_from_model

logger = logging.getLogger(__name__)


def is_monotone(grid: List[Dict], along: str, across: str) -> bool:
    """Implied BI never decreases along one axis, for every value of the other (converged cells only)"""
    for value in sorted({row[across] for row in grid}):
        line = sorted((row for row in grid if row[across] == value and row["converged"]),
                      key=lambda row: row[along])
        if any(b["bi"] < a["bi"] for a, b in zip(line, line[1:])):
            return False
    return True


class ImpliedBiGridExperiment(BaseExperiment):
    config: ImpliedBiGridConfig

    def _cell(self, cell: Tuple[float, float]) -> Dict:
        mu, sigma = cell
        result = implied_bi_from_model(self.config.var_level, FrequencySpec(self.config.lam),
                                       SeveritySpec.lognormal(mu, sigma))
        return {"mu": mu, "sigma": sigma, "bi": result.bi, "converged": result.converged,
                "bucket": result.bucket, "lda": result.target_var, "lc": result.lc,
                "iterations": result.iterations, "residual": result.residual, "message": result.message}

    def run(self) -> ExperimentReport:
        report = self.new_report()
        cells = list(itertools.product(self.config.mus, self.config.sigmas))
        if self.config.threads > 1:
            with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
                report.grid = list(pool.map(self._cell, cells))
        else:
            report.grid = [self._cell(cell) for cell in cells]

        report.checks["monotone_in_mu"] = is_monotone(report.grid, along="mu", across="sigma")
        report.checks["monotone_in_sigma"] = is_monotone(report.grid, along="sigma", across="mu")
        failed = [(row["mu"], row["sigma"]) for row in report.grid if not row["converged"]]
        report.checks["all_converged"] = not failed
        if failed:
            report.notes.append(f"cells without a root: {failed}")
        report.notes.append(f"BI in millions, lambda = {self.config.lam:g}, LDA capital by SLA")
        logger.info(f"Implied BI grid: {len(cells)} cells, {len(failed)} without a root")
        return report


ExperimentFactory.register_experiment(Study.IMPLIED_BI_GRID, ImpliedBiGridExperiment)
