import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st
from scipy import integrate, special, stats

from models.errors import ParameterDomainError
from models.risk_models import (
    AnnualLossRecord,
    CompoundModel,
    FrequencySpec,
    RngStream,
    SeverityFamily,
    SeveritySpec,
)
from services.distribution_service import (
    frozen_distribution,
    has_finite_mean,
    parameter_count,
    partial_expectation,
    poisson_sample,
    sample_severity,
    severity_cdf,
    severity_mean,
    severity_pdf,
    severity_quantile,
    severity_sf,
    support_lower_bound,
)

CONTINUOUS_SPECS = [
    SeveritySpec.lognormal(14.0, 2.0),
    SeveritySpec.gamma(2.0, 3e4),
    SeveritySpec.weibull(0.7, 1e5),
    SeveritySpec.pareto(3.0, 1e4),
    SeveritySpec.pareto(1.2, 1.0),
    SeveritySpec.loglogistic(1e5, 3.0),
    SeveritySpec.loggamma(20.0, 2.0),
    SeveritySpec.loggamma(2.0, 1.5),
    SeveritySpec.gengamma(2.0, 0.8, 1e4),
    SeveritySpec.gpd(0.3, 1e4, u=5e4),
    SeveritySpec.gpd(-0.2, 1e4),
]


def _lower_partial_expectation(spec, u):
    """E[X * 1{X <= u}] by quadrature over the bounded body"""
    dist = frozen_distribution(spec)
    start = support_lower_bound(spec)
    breaks = [start] + [float(x) for x in dist.ppf([0.01, 0.1, 0.3]) if start < x < u] + [u]
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        value, _ = integrate.quad(lambda x: x * dist.pdf(x), lo, hi, epsrel=1e-11, epsabs=0.0, limit=200)
        total += value
    return total


class TestSeveritySpec:
    @pytest.mark.parametrize("name,family", [
        ("lognormal", SeverityFamily.LOGNORMAL),
        ("Log-Normal", SeverityFamily.LOGNORMAL),
        ("log_logistic", SeverityFamily.LOG_LOGISTIC),
        ("GenGamma", SeverityFamily.GENERALIZED_GAMMA),
    ])
    def test_parse_family_names(self, name, family):
        assert SeverityFamily.parse(name) is family

    def test_unknown_family(self):
        with pytest.raises(ParameterDomainError):
            SeverityFamily.parse("cauchy")

    def test_parameter_validation(self):
        with pytest.raises(ParameterDomainError):
            SeveritySpec.lognormal(14, 0)
        with pytest.raises(ParameterDomainError):
            SeveritySpec(SeverityFamily.GAMMA, {"alpha": 1.0})
        with pytest.raises(ParameterDomainError):
            SeveritySpec(SeverityFamily.GAMMA, {"alpha": 1.0, "beta": 2.0, "theta": 3.0})
        with pytest.raises(ParameterDomainError):
            SeveritySpec.gpd(0.2, 1.0, u=-1)
        with pytest.raises(ParameterDomainError):
            SeveritySpec.lognormal(math.nan, 1)

    def test_gpd_location_defaults_to_zero(self):
        spec = SeveritySpec(SeverityFamily.GPD, {"xi": 0.2, "beta": 3.0})
        assert spec["u"] == 0.0
        assert spec.parameter_values == (0.2, 3.0, 0.0)

    def test_dict_round_trip_keeps_parameter_order(self):
        spec = SeveritySpec.gengamma(2.0, 0.5, 1e4)
        assert SeveritySpec.from_dict(spec.to_dict()) == spec
        assert spec.describe() == "gengamma(a=2, c=0.5, scale=10000)"

    def test_parameter_count_excludes_gpd_location(self):
        assert parameter_count(SeverityFamily.GPD) == 2
        assert parameter_count(SeverityFamily.LOGNORMAL) == 2
        assert parameter_count(SeverityFamily.GENERALIZED_GAMMA) == 3


class TestFrequencyAndModel:
    def test_frequency_domain(self):
        assert FrequencySpec(0).lam == 0
        with pytest.raises(ParameterDomainError):
            FrequencySpec(-0.5)
        with pytest.raises(ParameterDomainError):
            FrequencySpec(2, family="negbin")

    def test_compound_model_needs_a_cell(self):
        with pytest.raises(ParameterDomainError):
            CompoundModel(())

    def test_annual_record_rejects_negative_losses(self):
        with pytest.raises(ParameterDomainError):
            AnnualLossRecord.from_events(0, [1.0, -2.0])
        record = AnnualLossRecord.from_events(3, [1.5, 2.5])
        assert record.total == 4.0
        assert record.event_count == 2

    def test_poisson_counts(self):
        stream = RngStream(7, (1,))
        assert poisson_sample(FrequencySpec(0), stream) == 0
        counts = poisson_sample(FrequencySpec(4), stream, size=50_000)
        assert counts.shape == (50_000,)
        assert counts.mean() == pytest.approx(4, rel=0.02)


class TestRngStream:
    def test_same_label_same_draws(self, large_loss_severity):
        first = sample_severity(large_loss_severity, RngStream(42, (3, 1)), 100)
        second = sample_severity(large_loss_severity, RngStream(42, (3, 1)), 100)
        assert np.array_equal(first, second)

    def test_different_labels_differ(self, large_loss_severity):
        first = sample_severity(large_loss_severity, RngStream(42, (3, 1)), 100)
        second = sample_severity(large_loss_severity, RngStream(42, (3, 2)), 100)
        assert not np.array_equal(first, second)

    def test_child_appends_labels(self):
        assert RngStream(5, (1,)).child(2, 3) == RngStream(5, (1, 2, 3))

    def test_derived_seed(self):
        assert RngStream(42, (1, 0)).derived_seed() == RngStream(42, (1, 0)).derived_seed()
        assert RngStream(42, (1, 0)).derived_seed() != RngStream(42, (1, 1)).derived_seed()

    def test_sampling_edge_sizes(self, large_loss_severity, rng):
        assert sample_severity(large_loss_severity, rng, 0).size == 0
        assert np.all(sample_severity(SeveritySpec.degenerate(5.0), rng, 4) == 5.0)
        with pytest.raises(ParameterDomainError):
            sample_severity(large_loss_severity, rng, -1)


class TestSeverityFunctions:
    @pytest.mark.parametrize("spec", [
        SeveritySpec.gamma(2.0, 3e4),
        SeveritySpec.weibull(0.7, 1e5),
        SeveritySpec.pareto(3.0, 1e4),
        SeveritySpec.loglogistic(1e5, 3.0),
        SeveritySpec.gengamma(2.0, 0.8, 1e4),
        SeveritySpec.gpd(0.3, 1e4, u=5e4),
    ])
    def test_mean_matches_scipy(self, spec):
        assert severity_mean(spec) == pytest.approx(frozen_distribution(spec).mean(), rel=1e-8)

    def test_lognormal_mean(self, large_loss_severity):
        assert severity_mean(large_loss_severity) == pytest.approx(math.exp(16))

    @pytest.mark.parametrize("spec", [
        SeveritySpec.pareto(1.0, 1.0),
        SeveritySpec.gpd(1.0, 1.0),
        SeveritySpec.loglogistic(1.0, 1.0),
        SeveritySpec.loggamma(2.0, 1.0),
    ])
    def test_infinite_means(self, spec):
        assert not has_finite_mean(spec)
        assert math.isinf(partial_expectation(spec, 10.0))

    def test_loggamma_mean_by_simulation(self, rng):
        spec = SeveritySpec.loggamma(2.0, 5.0)
        draws = sample_severity(spec, rng, 200_000)
        assert draws.min() >= 1.0
        assert draws.mean() == pytest.approx((5 / 4) ** 2, rel=0.01)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(min_value=1e-4, max_value=1 - 1e-4))
    def test_lognormal_quantile_inverts_cdf(self, p):
        spec = SeveritySpec.lognormal(14.0, 2.0)
        assert severity_cdf(spec, severity_quantile(spec, p)) == pytest.approx(p, abs=1e-9)

    @pytest.mark.parametrize("p", [0.01, 0.5, 0.999])
    def test_loggamma_quantile_inverts_cdf(self, p):
        spec = SeveritySpec.loggamma(3.0, 2.0)
        assert severity_cdf(spec, severity_quantile(spec, p)) == pytest.approx(p, abs=1e-9)

    def test_lognormal_quantile_matches_scipy(self, large_loss_severity):
        expected = stats.lognorm(s=2.0, scale=math.exp(14.0)).ppf(0.999)
        assert severity_quantile(large_loss_severity, 0.999) == pytest.approx(expected, rel=1e-10)

    def test_quantile_level_domain(self, large_loss_severity):
        for p in (0.0, 1.0, -0.1, math.nan):
            with pytest.raises(ParameterDomainError):
                severity_quantile(large_loss_severity, p)

    def test_degenerate_functions(self):
        spec = SeveritySpec.degenerate(1e5)
        assert severity_cdf(spec, 99_999.0) == 0.0
        assert severity_cdf(spec, 1e5) == 1.0
        assert severity_quantile(spec, 0.3) == 1e5
        with pytest.raises(ParameterDomainError):
            severity_pdf(spec, 1.0)

    def test_support_lower_bounds(self, large_loss_severity):
        assert support_lower_bound(large_loss_severity) == 0.0
        assert support_lower_bound(SeveritySpec.pareto(2.0, 1e4)) == 1e4
        assert support_lower_bound(SeveritySpec.gpd(0.2, 1.0, u=3e5)) == 3e5
        assert support_lower_bound(SeveritySpec.loggamma(2.0, 3.0)) == 1.0


class TestPartialExpectation:
    def test_exponential_closed_form(self):
        theta, u = 1e6, 3e6
        expected = (u + theta) * math.exp(-u / theta)
        assert partial_expectation(SeveritySpec.gamma(1.0, theta), u) == pytest.approx(expected, rel=1e-7)

    def test_pareto_closed_form(self):
        # 3 * integral of x^-3 from 2 to infinity
        assert partial_expectation(SeveritySpec.pareto(3.0, 1.0), 2.0) == pytest.approx(0.375, rel=1e-6)

    def test_lognormal_matches_quadrature(self, large_loss_severity):
        # integrate e^y against the normal density of log X
        expected, _ = integrate.quad(lambda y: math.exp(y) * stats.norm.pdf(y, 14.0, 2.0),
                                     math.log(1e8), 42.0, epsrel=1e-10)
        assert partial_expectation(large_loss_severity, 1e8) == pytest.approx(expected, rel=1e-5)

    def test_threshold_below_support_gives_mean(self):
        spec = SeveritySpec.pareto(3.0, 10.0)
        assert partial_expectation(spec, 5.0) == pytest.approx(severity_mean(spec))

    def test_degenerate_strict_threshold(self):
        spec = SeveritySpec.degenerate(1e7)
        assert partial_expectation(spec, 1e7) == 0.0
        assert partial_expectation(spec, 9e6) == 1e7

    def test_negative_threshold(self, large_loss_severity):
        with pytest.raises(ParameterDomainError):
            partial_expectation(large_loss_severity, -1.0)

    @pytest.mark.parametrize("spec", CONTINUOUS_SPECS, ids=lambda s: s.describe())
    @pytest.mark.parametrize("level", [0.5, 0.99])
    def test_splits_the_mean_at_any_threshold(self, spec, level):
        u = float(severity_quantile(spec, level))
        total = partial_expectation(spec, u) + _lower_partial_expectation(spec, u)
        assert total == pytest.approx(severity_mean(spec), rel=1e-6)

    @pytest.mark.parametrize("a, b", [(20.0, 2.0), (2.0, 1.5)])
    @pytest.mark.parametrize("level", [0.5, 0.99])
    def test_loggamma_incomplete_gamma_form(self, a, b, level):
        spec = SeveritySpec.loggamma(a, b)
        u = float(severity_quantile(spec, level))
        expected = (b / (b - 1.0)) ** a * special.gammaincc(a, (b - 1.0) * math.log(u))
        assert partial_expectation(spec, u) == pytest.approx(expected, rel=1e-10)

    def test_heavy_pareto_keeps_far_tail(self):
        # alpha = 1.2: the mass beyond q_{1 - 1e-12} is about 1% of the mean
        spec = SeveritySpec.pareto(1.2, 1.0)
        assert partial_expectation(spec, 10.0) == pytest.approx(6.0 * 10.0 ** -0.2, rel=1e-12)

    def test_gpd_beyond_finite_endpoint(self):
        spec = SeveritySpec.gpd(-0.2, 1e4)
        assert partial_expectation(spec, 5e4) == 0.0
        assert partial_expectation(spec, 6e4) == 0.0


class TestFamilyConsistency:
    @pytest.mark.slow
    @pytest.mark.parametrize("spec", CONTINUOUS_SPECS, ids=lambda s: s.describe())
    def test_draws_follow_cdf(self, spec):
        draws = sample_severity(spec, RngStream(20240, (7,)), 100_000)
        statistic = stats.kstest(draws, lambda x: severity_cdf(spec, x)).statistic
        assert statistic < 0.01

    @pytest.mark.parametrize("spec", CONTINUOUS_SPECS, ids=lambda s: s.describe())
    def test_quantile_inverts_cdf_on_interior_grid(self, spec):
        levels = np.linspace(0.005, 0.995, 100)
        assert np.allclose(severity_cdf(spec, severity_quantile(spec, levels)), levels, rtol=0, atol=1e-8)

    @pytest.mark.parametrize("spec", CONTINUOUS_SPECS, ids=lambda s: s.describe())
    def test_survival_complements_cdf(self, spec):
        x = severity_quantile(spec, np.array([0.1, 0.5, 0.9]))
        assert np.allclose(severity_sf(spec, x) + severity_cdf(spec, x), 1.0, atol=1e-12)

    def test_degenerate_survival_is_strict(self):
        spec = SeveritySpec.degenerate(1e5)
        assert severity_sf(spec, 99_999.0) == 1.0
        assert severity_sf(spec, 1e5) == 0.0
