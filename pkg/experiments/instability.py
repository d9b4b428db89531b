"""Year-to-year instability of SMA capital at a fixed Business Indicator."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from config.experiment_settings import EntityProfile, InstabilityConfig, Study
from experiments.experiment_factory import BaseExperiment, ExperimentFactory
from models.experiment_models import ExperimentReport
from models.risk_models import AnnualLossRecord, CompoundModel, RngStream, SeveritySpec
from services.lda_service import compound_mean, compound_variance, simulate_years, var_empirical
from services.sma_service import DEFAULT_LOWER_THRESHOLD, DEFAULT_UPPER_THRESHOLD, MILLION, rolling_k_sma

logger = logging.getLogger(__name__)


def entity_model(profile: EntityProfile) -> CompoundModel:
    """Rare large losses first, then frequent small ones"""
    return CompoundModel.of(
        (profile.lognormal_lam, SeveritySpec.lognormal(profile.lognormal_mu, profile.lognormal_sigma)),
        (profile.gamma_lam, SeveritySpec.gamma(profile.gamma_alpha, profile.gamma_beta)),
    )


@dataclass
class CapitalPath:
    history: List[AnnualLossRecord]
    rolling_k: np.ndarray
    seed: int

    @property
    def totals(self) -> np.ndarray:
        return np.array([record.total for record in self.history])

    @property
    def ratios(self) -> np.ndarray:
        """Rolling K_SMA over its long-run mean"""
        return self.rolling_k / self.rolling_k.mean()


def capital_path(model: CompoundModel, bi: float, years: int, window: int, seed: int,
                 threads: int = 1, lower: float = DEFAULT_LOWER_THRESHOLD,
                 upper: float = DEFAULT_UPPER_THRESHOLD) -> CapitalPath:
    """Simulated loss years and the trailing-window K_SMA for each year t >= window"""
    history = simulate_years(model, years, seed, threads)
    return CapitalPath(history=history, rolling_k=rolling_k_sma(history, bi, window, lower, upper), seed=seed)


def summary_row(label: Dict, model: CompoundModel, path: CapitalPath, var_level: float) -> Dict:
    totals = path.totals
    ratios = path.ratios
    mean = float(totals.mean())
    analytic_mean = compound_mean(model)
    # compound Poisson error; the sample deviation understates it for heavy tails
    analytic_se = math.sqrt(compound_variance(model) / totals.size)
    return {
        **label,
        "seed": path.seed,
        "mean_annual_loss": mean / MILLION,
        "analytic_mean_annual_loss": analytic_mean / MILLION,
        "mean_standard_error": float(totals.std(ddof=1)) / math.sqrt(totals.size) / MILLION,
        "analytic_standard_error": analytic_se / MILLION,
        "mean_z_score": (mean - analytic_mean) / analytic_se if 0 < analytic_se < math.inf else 0.0,
        "var_empirical": var_empirical(totals, var_level) / MILLION,
        "k_sma_mean": float(path.rolling_k.mean()),
        "ratio_mean": float(ratios.mean()),
        "ratio_min": float(ratios.min()),
        "ratio_max": float(ratios.max()),
        "max_over_min": float(path.rolling_k.max() / path.rolling_k.min()),
    }


class InstabilityExperiment(BaseExperiment):
    """Rolling-window SMA capital of small, medium and large entities over simulated years"""

    config: InstabilityConfig

    def _run_entity(self, job: Tuple[int, int, EntityProfile]) -> Tuple[Dict, CapitalPath]:
        case, index, profile = job
        config = self.config
        model = entity_model(profile)
        seed = RngStream(config.seed, (case, index)).derived_seed()
        path = capital_path(model, config.bi, config.years, config.window, seed)
        label = {"case": case, "entity": profile.name, "lognormal_mu": profile.lognormal_mu,
                 "lognormal_sigma": profile.lognormal_sigma, "gamma_beta": profile.gamma_beta}
        logger.info(f"Case {case} {profile.name}: simulated {config.years} years with seed {seed}")
        return summary_row(label, model, path, config.var_level), path

    def run(self) -> ExperimentReport:
        report = self.new_report()
        jobs = list(self.config.profiles())
        if self.config.threads > 1:
            with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
                results = list(pool.map(self._run_entity, jobs))
        else:
            results = [self._run_entity(job) for job in jobs]

        for (case, _, profile), (row, path) in zip(jobs, results):
            key = f"case{case}_{profile.name}"
            reference = self.config.reference_var.get(key)
            if reference is not None:
                row["reference_var"] = reference
                row["var_over_reference"] = row["var_empirical"] / reference
            report.summary.append(row)
            report.series[f"{key}_ratio"] = path.ratios.tolist()
            report.series[f"{key}_k_sma"] = path.rolling_k.tolist()
            report.metrics[f"{key}_max_over_min"] = row["max_over_min"]
            report.metrics[f"{key}_mean_z_score"] = row["mean_z_score"]
        self._add_checks(report)
        report.notes.append(
            "ratio = trailing-window K_SMA divided by the mean K_SMA of the same entity over all windows"
        )
        report.notes.append(f"BI fixed at {self.config.bi:,.0f} millions; amounts in millions")
        return report

    def _add_checks(self, report: ExperimentReport) -> None:
        config = self.config
        report.checks["means_within_3_se"] = all(abs(row["mean_z_score"]) <= 3.0 for row in report.summary)
        factors = [row["var_over_reference"] for row in report.summary if "var_over_reference" in row]
        if factors:
            tolerance = config.var_tolerance_factor
            report.checks["var_within_reference_factor"] = all(
                1.0 / tolerance <= factor <= tolerance for factor in factors
            )
        largest = "case2_large_max_over_min"
        if largest in report.metrics:
            report.checks["case2_large_doubles"] = report.metrics[largest] >= config.doubling_ratio
        for name, passed in report.checks.items():
            if not passed:
                logger.warning(f"Instability check {name} not met")


ExperimentFactory.register_experiment(Study.INSTABILITY, InstabilityExperiment)
