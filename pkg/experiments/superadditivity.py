"""SMA capital of one merged entity versus the same business split into lines."""

import logging
from typing import Dict, List

from config.experiment_settings import Study, SuperadditivityConfig
from experiments.experiment_factory import BaseExperiment, ExperimentFactory
from models.capital_models import CapitalResult
from models.experiment_models import ExperimentReport
from models.risk_models import FrequencySpec, SeveritySpec
from services.calibration_service import implied_bi
from services.lda_service import sla_var
from services.sma_service import MILLION, k_sma, long_run_lc_lognormal, superadditivity_gap

logger = logging.getLogger(__name__)


def _row(panel: str, entity: str, result: CapitalResult, **extra) -> Dict:
    return {"panel": panel, "entity": entity, "bi": result.bi, "bucket": result.bucket,
            "bic": result.bic, "lc": result.lc, "sma": result.k_sma, **extra}


def split_panel(panel: str, bi: float, lc: float, lines: int) -> List[Dict]:
    """Merged entity against `lines` equal lines carrying BI/lines and LC/lines each"""
    merged = k_sma(bi, lc)
    parts = [k_sma(bi / lines, lc / lines) for _ in range(lines)]
    gap = superadditivity_gap(merged, parts)
    rows = [_row(panel, "merged", merged)]
    rows += [_row(panel, f"line{i + 1}", part) for i, part in enumerate(parts)]
    rows.append({"panel": panel, "entity": "lines_total", "sma": sum(p.k_sma for p in parts),
                 "gap": gap, "superadditive": gap > 0})
    return rows


class SuperadditivityExperiment(BaseExperiment):
    config: SuperadditivityConfig

    def _model_panel(self) -> List[Dict]:
        """LDA-calibrated entity: BI chosen so SMA equals the SLA capital, then split by frequency"""
        config = self.config
        severity = SeveritySpec.lognormal(config.lognormal_mu, config.lognormal_sigma)
        lda = sla_var(config.var_level, FrequencySpec(config.lam), severity).var / MILLION
        lc = long_run_lc_lognormal(config.lam, config.lognormal_mu, config.lognormal_sigma)
        merged_bi = implied_bi(lda, lc)
        merged = k_sma(merged_bi.bi, lc)

        line_lam = config.lam / config.lines
        line_lda = sla_var(config.var_level, FrequencySpec(line_lam), severity).var / MILLION
        line_lc = long_run_lc_lognormal(line_lam, config.lognormal_mu, config.lognormal_sigma)
        line_bi = implied_bi(line_lda, line_lc)
        parts = [k_sma(merged_bi.bi / config.lines, line_lc) for _ in range(config.lines)]
        gap = superadditivity_gap(merged, parts)

        rows = [_row("model", "merged", merged, lda=lda, implied_bi=merged_bi.bi)]
        rows += [_row("model", f"line{i + 1}", part, lda=line_lda, implied_bi=line_bi.bi)
                 for i, part in enumerate(parts)]
        rows.append({"panel": "model", "entity": "lines_total", "sma": sum(p.k_sma for p in parts),
                     "lda": line_lda * config.lines, "gap": gap, "superadditive": gap > 0})
        return rows

    def run(self) -> ExperimentReport:
        report = self.new_report()
        for panel, (bi, lc) in self.config.panels.items():
            report.summary.extend(split_panel(panel, bi, lc, self.config.lines))
        report.summary.extend(self._model_panel())

        for row in report.summary:
            if row["entity"] == "lines_total":
                report.checks[f"{row['panel']}_superadditive"] = bool(row["superadditive"])
                logger.info(f"Panel {row['panel']}: gap {row['gap']:,.1f} -> "
                            f"{'superadditive' if row['superadditive'] else 'not superadditive'}")
        report.notes.append(
            "model panel lines use half the merged BI; implied_bi is the BI at which a line's SMA "
            "equals its own LDA capital"
        )
        return report


ExperimentFactory.register_experiment(Study.SUPERADDITIVITY, SuperadditivityExperiment)
