import argparse
import io
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence

import pandas as pd

from config.settings import OutputFormat, RuntimeSettings, load_settings
from experiments import build_config, parse_study, run_experiment
from models.capital_models import SmaInputs
from models.errors import ConfigError, IngestError, OpRiskError, ParameterDomainError
from models.input_models import ConfigDocument
from models.risk_models import CompoundModel, SeverityFamily, SeveritySpec
from services.aggregation_service import AggregatorFactory
from services.calibration_service import (
    fit_pot_gpd,
    goodness_of_fit,
    implied_bi,
    implied_bi_from_model,
    mean_excess,
    qq_points,
    select_model,
)
from services.ingest_service import annualize, config_json_schema, event_years, load_config_document, load_loss_csv
from services.sma_service import MILLION, bi_from_components, k_sma, sma_capital
from utils.logging_setup import setup_logging
from utils.report_writer import dumps, format_table, to_jsonable

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_INPUT = 2


class CommandFailed(OpRiskError):
    """A command ran but could not produce its result"""


def emit(rows: List[Dict], settings: RuntimeSettings, columns: Optional[Sequence[str]] = None,
         name: str = "result") -> None:
    """Print rows as a table, JSON or CSV; also save them under --out when given"""
    fmt = settings.output.format
    if fmt == OutputFormat.JSON:
        text = dumps(rows)
    elif fmt == OutputFormat.CSV:
        buffer = io.StringIO()
        pd.DataFrame([to_jsonable(r) for r in rows], columns=columns).to_csv(buffer, index=False,
                                                                           lineterminator="\n")
        text = buffer.getvalue().rstrip("\n")
    else:
        text = format_table(rows, columns)
    print(text)
    if settings.output.out_dir:
        os.makedirs(settings.output.out_dir, exist_ok=True)
        extension = "txt" if fmt == OutputFormat.TABLE else fmt.value
        path = os.path.join(settings.output.out_dir, f"{name}.{extension}")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text + "\n")
        logger.info(f"Wrote {path}")


def _document(args) -> Optional[ConfigDocument]:
    return load_config_document(args.config) if getattr(args, "config", None) else None


def _model_from_flags(args) -> CompoundModel:
    if args.lam is None or args.severity is None:
        raise ParameterDomainError("Give a model with --config or with --lam, --severity and --param")
    params = {}
    for item in args.param or []:
        if "=" not in item:
            raise ParameterDomainError(f"--param expects name=value, got '{item}'")
        key, value = item.split("=", 1)
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise ParameterDomainError(f"--param {key}: '{value}' is not a number")
    return CompoundModel.single(args.lam, SeveritySpec(SeverityFamily.parse(args.severity), params))


def _seed(args, settings: RuntimeSettings, document: Optional[ConfigDocument]) -> int:
    """--seed, then the config document's seed, then OPRISK_SEED"""
    if args.seed is None and document is not None and document.seed is not None:
        return document.seed
    return settings.simulation.seed


def _model(args, document: Optional[ConfigDocument]) -> CompoundModel:
    if document is not None and document.model is not None:
        return document.model.to_compound_model()
    return _model_from_flags(args)


def cmd_sma(args, settings: RuntimeSettings) -> int:
    document = _document(args)
    block = document.sma if document else None
    if block is not None:
        bi = block.bi if block.bi is not None else bi_from_components(**block.bi_components.model_dump())
        lc, losses = block.lc, block.losses
        lower, upper = block.lower_threshold, block.upper_threshold
        allow_any = block.allow_any_history_length
    else:
        bi = bi_from_components(*args.bi_components) if args.bi_components else args.bi
        lc, losses = args.lc, args.losses
        lower = args.lower if args.lower is not None else settings.sma.lower_threshold
        upper = args.upper if args.upper is not None else settings.sma.upper_threshold
        allow_any = args.allow_any_length
    if bi is None:
        raise ParameterDomainError("Give --bi or --bi-components")
    if (lc is None) == (losses is None):
        raise ParameterDomainError("Give exactly one of --lc or --losses")

    if losses is not None:
        events = load_loss_csv(losses)
        if not events:
            raise IngestError(f"{losses}: no loss events to build a history from")
        first, last = event_years(events)
        history = annualize(events, args.start_year or first, args.end_year or last)
        result = sma_capital(SmaInputs(bi=bi, loss_history=history, lower_threshold=lower,
                                       upper_threshold=upper, allow_any_history_length=allow_any))
    else:
        result = k_sma(bi, lc)
    emit([to_jsonable(result)], settings, ["bi", "bucket", "bic", "lc", "k_sma"], name="sma")
    return EXIT_OK


def cmd_lda(args, settings: RuntimeSettings) -> int:
    document = _document(args)
    block = document.lda if document else None
    if block is not None and block.expected_loss_offset:
        raise ConfigError("expected_loss_offset is not supported: capital is the full VaR")
    model = _model(args, document)
    method = args.method or (block.method if block else "sla")
    quantiles = args.q or (block.quantiles if block else [0.999])
    seed = _seed(args, settings, document)

    if method == "mc":
        years = args.years or (block.years if block else settings.simulation.mc_years)
        aggregator = AggregatorFactory.create("mc", years=years, seed=seed, threads=settings.simulation.threads,
                                              chunk_years=settings.simulation.chunk_years)
    elif method in ("panjer", "fft"):
        step = args.grid_step or (block.grid_step if block and block.grid_step else settings.aggregation.grid_step)
        size = args.grid_size or (block.grid_size if block and block.grid_size else settings.aggregation.grid_size)
        options = {"grid_step": step, "grid_size": size}
        if method == "fft":
            options.update(padding=args.padding or (block.padding if block else settings.aggregation.padding),
                           aliasing_limit=settings.aggregation.aliasing_limit)
        aggregator = AggregatorFactory.create(method, **options)
    else:
        aggregator = AggregatorFactory.create("sla")

    rows = []
    for q in quantiles:
        estimate = aggregator.value_at_risk(model, q)
        rows.append({
            "q": q,
            "method": estimate.method,
            "var": estimate.var / MILLION,
            "lower": estimate.lower / MILLION if estimate.lower is not None else None,
            "upper": estimate.upper / MILLION if estimate.upper is not None else None,
            "truncation_mass": estimate.truncation_mass,
            "seed": estimate.seed,
            "warnings": "; ".join(estimate.warnings),
        })
    emit(rows, settings, ["q", "method", "var", "lower", "upper", "truncation_mass", "seed", "warnings"],
         name="lda")
    return EXIT_OK


def cmd_implied_bi(args, settings: RuntimeSettings) -> int:
    document = _document(args)
    if args.target_var is not None:
        if args.lc is None:
            raise ParameterDomainError("--target-var needs --lc")
        result = implied_bi(args.target_var, args.lc)
    else:
        model = _model(args, document)
        if len(model.cells) != 1:
            raise ParameterDomainError("Implied BI from a model needs a single risk cell")
        cell = model.cells[0]
        result = implied_bi_from_model(args.alpha, cell.frequency, cell.severity)
    emit([to_jsonable(result)], settings,
         ["bi", "bucket", "converged", "iterations", "residual", "target_var", "lc", "message"], name="implied_bi")
    if not result.converged:
        raise CommandFailed(f"Implied BI did not converge: {result.message}")
    return EXIT_OK


def cmd_experiment(args, settings: RuntimeSettings) -> int:
    study = parse_study(args.study)
    overrides = {}
    document = _document(args)
    if document is not None:
        blocks = [block for block in document.experiments if block.study == study.value]
        if blocks:
            block = blocks[0]
            overrides.update(block.parameters)
            overrides.update({k: getattr(block, k) for k in ("years", "window", "seed", "bi")})
        if document.seed is not None and overrides.get("seed") is None:
            overrides["seed"] = document.seed
    overrides.update({k: v for k, v in (("years", args.years), ("window", args.window), ("bi", args.bi))
                      if v is not None})
    if args.seed is not None or overrides.get("seed") is None:
        overrides["seed"] = settings.simulation.seed
    overrides["threads"] = settings.simulation.threads
    config = build_config(study, overrides)

    report = run_experiment(config, settings.output.out_dir)
    rows = report.summary or report.grid or [box.to_row() for box in report.boxplots]
    emit(rows, settings, name=f"{study.value}_summary")
    for check, passed in sorted(report.checks.items()):
        logger.info(f"check {check}: {'pass' if passed else 'fail'}")
    return EXIT_OK


def cmd_fit(args, settings: RuntimeSettings) -> int:
    events = load_loss_csv(args.data)
    amounts = [event.amount for event in events]
    level = args.level or settings.fit.gof_level
    rows = []
    if args.pot_threshold is not None:
        fit = fit_pot_gpd(amounts, args.pot_threshold, settings.fit.min_exceedances)
        excesses = [a - args.pot_threshold for a in amounts if a > args.pot_threshold]
        shifted = SeveritySpec.gpd(fit.spec["xi"], fit.spec["beta"])
        gof = goodness_of_fit(excesses, shifted, level)
        rows.append(_fit_row(fit, gof))
        tail_sample, tail_spec = excesses, shifted
    else:
        families = [name.strip() for name in args.family.split(",") if name.strip()]
        ranking = select_model(amounts, families, level)
        rows = [_fit_row(fit, gof) for fit, gof in zip(ranking.fits, ranking.gof)]
        for failure in ranking.failures:
            logger.error(failure)
        if not rows:
            raise CommandFailed("No family could be fitted: " + "; ".join(ranking.failures))
        tail_sample, tail_spec = amounts, ranking.fits[0].spec
    emit(rows, settings, ["family", "params", "log_likelihood", "aic", "bic", "n_used", "ks", "ad", "gof_passed"],
         name="fit")
    if args.diagnostics:
        _emit_diagnostics(amounts, tail_sample, tail_spec, settings)
    return EXIT_OK


def _emit_diagnostics(amounts: List[float], tail_sample: List[float], tail_spec: SeveritySpec,
                      settings: RuntimeSettings) -> None:
    """Mean-excess rows for choosing a POT threshold; Q-Q series of the selected fit under --out"""
    points = mean_excess(amounts)
    emit([to_jsonable(point) for point in points], settings,
         ["threshold", "mean_excess", "exceedances"], name="mean_excess")
    if not settings.output.out_dir:
        logger.info("Q-Q series are written only with --out")
        return
    series = qq_points(tail_sample, tail_spec)
    path = os.path.join(settings.output.out_dir, f"qq_{tail_spec.family.value}.csv")
    series.to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Wrote {path}")


def _fit_row(fit, gof) -> Dict:
    return {"family": fit.spec.family.value, "params": fit.spec.describe(), "log_likelihood": fit.log_likelihood,
            "aic": fit.aic, "bic": fit.bic_criterion, "n_used": fit.n_used, "threshold": fit.threshold,
            "ks": gof.ks_statistic, "ad": gof.ad_statistic, "gof_passed": gof.passed}


def cmd_schema(args, settings: RuntimeSettings) -> int:
    print(dumps(config_json_schema()))
    return EXIT_OK


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="random seed (default: OPRISK_SEED or 42)")
    common.add_argument("--threads", type=_positive_int, help="worker threads (default: OPRISK_THREADS or cores)")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.TABLE.value,
                        help="output format")
    common.add_argument("--out", help="directory for written results")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="log level")
    common.add_argument("--config", help="JSON or YAML configuration document")

    model_flags = argparse.ArgumentParser(add_help=False)
    model_flags.add_argument("--lam", type=float, help="Poisson annual frequency")
    model_flags.add_argument("--severity", help="severity family, e.g. lognormal")
    model_flags.add_argument("--param", action="append", help="severity parameter name=value (repeatable)")

    parser = argparse.ArgumentParser(prog="main_oprisk.py",
                                     description="Operational risk capital: SMA, LDA and calibration")
    commands = parser.add_subparsers(dest="command", required=True)

    sma = commands.add_parser("sma", parents=[common], help="SMA capital from BI and LC or a loss history")
    sma.add_argument("--bi", type=float, help="Business Indicator, millions")
    sma.add_argument("--bi-components", type=float, nargs=3, metavar=("ILDC", "SC", "FC"),
                     help="BI addends, millions")
    sma.add_argument("--lc", type=float, help="Loss Component, millions")
    sma.add_argument("--losses", help="loss event CSV")
    sma.add_argument("--lower", type=float, help="lower LC threshold L, UM (default 1e7)")
    sma.add_argument("--upper", type=float, help="upper LC threshold H, UM (default 1e8)")
    sma.add_argument("--start-year", type=int, help="first history year (default: first event year)")
    sma.add_argument("--end-year", type=int, help="last history year (default: last event year)")
    sma.add_argument("--allow-any-length", action="store_true", help="accept histories outside 5-10 years")
    sma.set_defaults(handler=cmd_sma)

    lda = commands.add_parser("lda", parents=[common, model_flags], help="annual-loss VaR of a compound model")
    lda.add_argument("--method", choices=AggregatorFactory.available(), help="VaR engine (default sla)")
    lda.add_argument("--q", type=float, action="append", help="quantile level (repeatable, default 0.999)")
    lda.add_argument("--years", type=_positive_int, help="Monte Carlo years")
    lda.add_argument("--grid-step", type=float, help="lattice step h, UM")
    lda.add_argument("--grid-size", type=_positive_int, help="lattice points")
    lda.add_argument("--padding", type=_positive_int, help="FFT padding factor")
    lda.set_defaults(handler=cmd_lda)

    implied = commands.add_parser("implied-bi", parents=[common, model_flags],
                                  help="BI at which SMA capital equals a target")
    implied.add_argument("--target-var", type=float, help="target capital, millions")
    implied.add_argument("--lc", type=float, help="Loss Component, millions")
    implied.add_argument("--alpha", type=float, default=0.999, help="VaR level for the model mode")
    implied.set_defaults(handler=cmd_implied_bi)

    experiment = commands.add_parser("experiment", parents=[common], help="run a scripted study")
    experiment.add_argument("--study", required=True, help="instability, sigma, superadditivity, implied-bi-grid")
    experiment.add_argument("--years", type=_positive_int, help="simulated years")
    experiment.add_argument("--window", type=_positive_int, help="rolling LC window, years")
    experiment.add_argument("--bi", type=float, help="fixed Business Indicator, millions")
    experiment.set_defaults(handler=cmd_experiment)

    fit = commands.add_parser("fit", parents=[common], help="fit severities to loss data")
    fit.add_argument("--data", required=True, help="loss event CSV")
    fit.add_argument("--family", default="lognormal", help="comma-separated families")
    fit.add_argument("--pot-threshold", type=float, help="fit a GPD to excesses over this threshold")
    fit.add_argument("--level", type=float, help="GoF significance level")
    fit.add_argument("--diagnostics", action="store_true",
                     help="also emit mean-excess rows and write Q-Q series under --out")
    fit.set_defaults(handler=cmd_fit)

    schema = commands.add_parser("schema", parents=[common], help="print the configuration JSON schema")
    schema.set_defaults(handler=cmd_schema)
    return parser


def _apply_flags(settings: RuntimeSettings, args) -> RuntimeSettings:
    if args.seed is not None:
        settings.simulation.seed = args.seed
    if args.threads is not None:
        settings.simulation.threads = args.threads
    if args.log_level:
        settings.log_level = args.log_level
    settings.output.format = OutputFormat(args.format)
    settings.output.out_dir = args.out
    return settings


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INPUT

    settings = _apply_flags(load_settings(), args)
    setup_logging(settings.log_level, settings.log_file)

    try:
        return args.handler(args, settings)
    except (ParameterDomainError, IngestError, ConfigError) as e:
        logger.error(str(e))
        return EXIT_INPUT
    except OpRiskError as e:
        logger.error(str(e))
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
