import os

import numpy as np
import pytest

from config.experiment_settings import InstabilityConfig, Study, SuperadditivityConfig
from experiments import ExperimentFactory, build_config, parse_study, run_experiment
from experiments.implied_bi_grid import is_monotone
from experiments.instability import capital_path, entity_model
from experiments.superadditivity import split_panel
from models.errors import ConfigError
from models.experiment_models import BoxplotSummary
from models.risk_models import CompoundModel, SeveritySpec
from services.lda_service import compound_mean

SMALL_ONLY = {"small": (10.0, 1e4)}


class TestConfiguration:
    def test_every_study_is_registered(self):
        assert set(ExperimentFactory.get_available_studies()) == {s.value for s in Study}

    def test_parse_study(self):
        assert parse_study("implied-bi-grid") is Study.IMPLIED_BI_GRID
        with pytest.raises(ConfigError):
            parse_study("stress")

    def test_build_config_overrides(self):
        config = build_config(Study.SIGMA_SENSITIVITY, {"years": 50, "sigmas": [2.0, 3.0], "seed": None})
        assert config.years == 50
        assert config.sigmas == (2.0, 3.0)
        assert config.seed == 42
        with pytest.raises(ConfigError, match="unknown parameters"):
            build_config(Study.SIGMA_SENSITIVITY, {"sigma_grid": [2.0]})

    def test_years_must_cover_window(self):
        with pytest.raises(ConfigError):
            ExperimentFactory.create_experiment(InstabilityConfig(years=5, window=10))


class TestBoxplotSummary:
    def test_tukey_whiskers(self):
        box = BoxplotSummary.from_values("x", [1, 2, 3, 4, 5, 6, 7, 8, 9, 100])
        assert box.q1 == pytest.approx(3.25)
        assert box.median == pytest.approx(5.5)
        assert box.iqr == pytest.approx(4.5)
        assert box.upper_whisker == 9.0
        assert box.outliers == [100.0]
        assert box.to_row()["outlier_count"] == 1


class TestInstability:
    def test_entity_model_cells(self):
        profile = next(InstabilityConfig().profiles())[2]
        model = entity_model(profile)
        assert model.cells[0].severity == SeveritySpec.lognormal(10.0, 2.5)
        assert model.cells[1].frequency.lam == 990
        assert compound_mean(model) == pytest.approx(10 * np.exp(10 + 2.5 ** 2 / 2) + 990 * 1e4)

    def test_case_one_small_entity(self):
        config = build_config(Study.INSTABILITY, {"cases": {1: 2.5}, "entities": SMALL_ONLY})
        report = run_experiment(config)
        row = report.summary[0]
        assert row["mean_annual_loss"] == pytest.approx(row["analytic_mean_annual_loss"], rel=0.35)
        assert row["ratio_mean"] == pytest.approx(1.0)
        assert len(report.series["case1_small_ratio"]) == config.years - config.window + 1

    def test_case_two_large_entity_moves(self):
        config = build_config(Study.INSTABILITY, {"years": 300, "cases": {2: 2.8},
                                                  "entities": {"large": (14.0, 5e5)}})
        row = run_experiment(config).summary[0]
        assert row["max_over_min"] > 1.1
        assert row["seed"] > 0

    def test_default_study_matches_analytic_means(self):
        report = run_experiment(InstabilityConfig())
        assert len(report.summary) == 6
        for row in report.summary:
            assert abs(row["mean_annual_loss"] - row["analytic_mean_annual_loss"]) \
                <= 3 * row["analytic_standard_error"]
            assert 1 / 3 <= row["var_over_reference"] <= 3
        assert report.checks["means_within_3_se"]
        assert report.checks["var_within_reference_factor"]

    def test_default_study_heavy_tail_values(self):
        report = run_experiment(InstabilityConfig())
        rows = {f"case{row['case']}_{row['entity']}": row for row in report.summary}
        large = rows["case2_large"]
        assert large["mean_annual_loss"] == pytest.approx(950.55, abs=0.01)
        assert large["analytic_mean_annual_loss"] == pytest.approx(1101.12, abs=0.01)
        assert large["mean_standard_error"] == pytest.approx(48.44, abs=0.01)
        # sample deviation understates the heavy-tail error by a wide margin
        assert large["analytic_standard_error"] > 5 * large["mean_standard_error"]
        # the rolling capital moves by about 70%, short of doubling at this seed
        assert report.metrics["case2_large_max_over_min"] == pytest.approx(1.717, abs=1e-3)
        assert report.checks["case2_large_doubles"] is False

    def test_frequent_small_losses_give_stable_capital(self):
        model = CompoundModel.of((990, SeveritySpec.gamma(1.0, 1e4)), (10, SeveritySpec.degenerate(1e5)))
        path = capital_path(model, bi=2000, years=1000, window=10, seed=5)
        assert path.rolling_k.max() / path.rolling_k.min() < 1.02
        assert path.totals.mean() == pytest.approx(compound_mean(model), rel=0.01)

    def test_threads_do_not_change_results(self, tmp_path):
        overrides = {"years": 30, "cases": {1: 2.5}, "entities": SMALL_ONLY}
        first = run_experiment(build_config(Study.INSTABILITY, overrides), str(tmp_path / "a"))
        second = run_experiment(build_config(Study.INSTABILITY, {**overrides, "threads": 2}),
                                str(tmp_path / "b"))
        assert first.summary == second.summary
        assert sorted(os.listdir(tmp_path / "a")) == sorted(os.listdir(tmp_path / "b"))

    def test_stochastic_output_is_byte_identical(self, tmp_path):
        run_experiment(InstabilityConfig(seed=42), str(tmp_path / "a"))
        run_experiment(InstabilityConfig(seed=42, threads=3), str(tmp_path / "b"))
        names = sorted(os.listdir(tmp_path / "a"))
        assert names == sorted(os.listdir(tmp_path / "b"))
        assert all(name.startswith("instability_seed42_") for name in names)
        assert {name.rsplit("_", 1)[-1] for name in names} == {"summary.csv", "series.csv", "report.json"}
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestSigmaSensitivity:
    def test_dispersion_grows_with_sigma(self):
        config = build_config(Study.SIGMA_SENSITIVITY, {"years": 400, "sigmas": [2.0, 3.0]})
        report = run_experiment(config)
        assert [box.label for box in report.boxplots] == ["sigma=2", "sigma=3"]
        assert report.boxplots[1].iqr > report.boxplots[0].iqr
        assert report.checks["iqr_increasing_in_sigma"]
        # every sigma runs on the same simulation seed
        assert report.summary[0]["seed"] == report.summary[1]["seed"]

    def test_default_sigma_grid(self):
        report = run_experiment(build_config(Study.SIGMA_SENSITIVITY))
        iqrs = [box.iqr for box in report.boxplots]
        assert iqrs == pytest.approx([0.091, 0.125, 0.154, 0.181, 0.200], abs=6e-4)
        assert all(b > a for a, b in zip(iqrs, iqrs[1:]))
        assert iqrs[-1] > 2 * iqrs[0]
        assert report.checks["iqr_increasing_in_sigma"]
        assert report.checks["iqr_sigma3_over_2x_sigma2"]
        # the largest yearly ratio at sigma = 3 stays well below five times the median
        assert report.metrics["sigma_3_max_over_median"] == pytest.approx(1.70, abs=6e-3)
        assert report.checks["sigma3_quintuples"] is False


class TestSuperadditivity:
    def test_split_panel(self):
        rows = split_panel("left", 32000, 4000, 2)
        merged, line, total = rows[0], rows[1], rows[-1]
        assert merged["sma"] == pytest.approx(5771, abs=1)
        assert line["bi"] == 16000 and line["lc"] == 2000
        assert total["sma"] == pytest.approx(2 * 2694, abs=2)
        assert total["gap"] == pytest.approx(merged["sma"] - total["sma"])
        assert total["superadditive"]

    def test_report(self):
        report = run_experiment(SuperadditivityConfig())
        assert report.checks == {"left_superadditive": True, "right_superadditive": True,
                                 "model_superadditive": True}
        model = {row["entity"]: row for row in report.summary if row["panel"] == "model"}
        assert model["merged"]["implied_bi"] == pytest.approx(13_960, abs=30)
        assert model["line1"]["bi"] == pytest.approx(model["merged"]["implied_bi"] / 2)
        assert model["line1"]["sma"] == pytest.approx(983, abs=2)
        assert 11_000 < model["line1"]["implied_bi"] < 11_400
        assert model["merged"]["sma"] == pytest.approx(model["merged"]["lda"], rel=1e-6)

    def test_output_is_byte_identical(self, tmp_path):
        run_experiment(SuperadditivityConfig(), str(tmp_path / "a"))
        run_experiment(SuperadditivityConfig(), str(tmp_path / "b"))
        names = sorted(os.listdir(tmp_path / "a"))
        assert names == sorted(os.listdir(tmp_path / "b"))
        assert any(name.endswith("_report.json") for name in names)
        assert all(name.startswith("superadditivity_seed42_") for name in names)
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestImpliedBiGrid:
    def test_grid(self):
        report = run_experiment(build_config(Study.IMPLIED_BI_GRID))
        assert len(report.grid) == 21
        assert report.checks["all_converged"]
        assert report.checks["monotone_in_sigma"]
        assert report.checks["monotone_in_mu"]
        corner = next(row for row in report.grid if row["mu"] == 10.0 and row["sigma"] == 1.5)
        assert corner["bucket"] == 1
        assert corner["lda"] == pytest.approx(6.5, abs=0.2)
        reference = next(row for row in report.grid if row["mu"] == 14.0 and row["sigma"] == 2.0)
        assert reference["bi"] == pytest.approx(13_960, abs=30)

    def test_is_monotone(self):
        grid = [
            {"mu": 1, "sigma": 1, "bi": 10.0, "converged": True},
            {"mu": 2, "sigma": 1, "bi": 20.0, "converged": True},
            {"mu": 1, "sigma": 2, "bi": 30.0, "converged": True},
            {"mu": 2, "sigma": 2, "bi": 25.0, "converged": True},
        ]
        assert not is_monotone(grid, along="mu", across="sigma")
        assert is_monotone(grid, along="sigma", across="mu")
        grid[3]["converged"] = False
        assert is_monotone(grid, along="mu", across="sigma")
