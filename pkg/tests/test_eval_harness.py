import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2_contingency

from conftest import pmf, pmf_vectors
from wmlimits.bounds import excess_mass, tv_closed_form
from wmlimits.errors import ConfigError
from wmlimits.eval_harness import (
    binomial_interval,
    brute_force_bound_oracle,
    monte_carlo_errors,
    perturb_embedding,
    sample_watermarked,
    secrecy_audit,
    with_constant_decoder,
    worst_case_false_alarm_exact,
)
from wmlimits.scheme_deterministic import build_deterministic_scheme, optimize_grouping
from wmlimits.scheme_randomized import build_randomized_scheme


@pytest.fixture
def uniform_scheme(uniform4):
    return build_randomized_scheme(uniform4, 0.2, 2)


@pytest.fixture
def merge_scheme(merge_example):
    grouping = optimize_grouping(merge_example, 0.4, 2)
    return build_deterministic_scheme(grouping, merge_example, 0.4, 2)


class TestSampling:
    def test_point_mass(self):
        scheme = build_randomized_scheme(pmf([0.0, 1.0, 0.0]), 0.5, 1)
        x, _ = sample_watermarked(scheme, 1, np.random.default_rng(0), size=500)
        assert set(x.tolist()) == {1}

    def test_sequence_law_matches(self, uniform_scheme):
        n = 100_000
        x, _ = sample_watermarked(uniform_scheme, 2, np.random.default_rng(1), size=n)
        counts = np.bincount(x, minlength=4)
        sigma = math.sqrt(n * 0.25 * 0.75)
        assert np.all(np.abs(counts - n * 0.25) <= 3 * sigma)

    @pytest.mark.parametrize("seed", [11, 12, 13])
    def test_side_information_law_independent_of_message(self, merge_scheme, seed):
        rng = np.random.default_rng(seed)
        _, z1 = sample_watermarked(merge_scheme, 1, rng, size=20_000)
        _, z2 = sample_watermarked(merge_scheme, 2, rng, size=20_000)
        size = merge_scheme.aux_size
        table = np.array([np.bincount(z1, minlength=size), np.bincount(z2, minlength=size)])
        table = table[:, table.sum(axis=0) > 0]
        assert chi2_contingency(table).pvalue > 0.001

    def test_single_draw_and_message_check(self, uniform_scheme):
        x, zeta = sample_watermarked(uniform_scheme, 1, np.random.default_rng(0))
        assert isinstance(x, int) and isinstance(zeta, int)
        with pytest.raises(ConfigError):
            sample_watermarked(uniform_scheme, 3, np.random.default_rng(0))


class TestMonteCarlo:
    def test_uniform_half_width(self, uniform_scheme):
        report = monte_carlo_errors(uniform_scheme, 100_000, seed=5)
        for estimate in report.beta_per_message:
            assert estimate.analytic == pytest.approx(0.6, abs=1e-15)
            assert estimate.half_width == pytest.approx(1.96 * math.sqrt(0.24 / 1e5), abs=2e-4)
        assert report.analytic_beta == [pytest.approx(0.6)] * 2

    def test_deterministic_example_bracketed(self, merge_scheme):
        report = monte_carlo_errors(merge_scheme, 100_000, seed=6)
        assert report.consistent
        for estimate in report.beta_per_message:
            assert estimate.lower <= 0.43 <= estimate.upper

    def test_trials_must_be_positive(self, uniform_scheme):
        with pytest.raises(ConfigError):
            monte_carlo_errors(uniform_scheme, 0, seed=1)
        with pytest.raises(ConfigError):
            monte_carlo_errors(uniform_scheme, 10, seed=-1)

    def test_same_seed_identical_json(self, merge_scheme):
        first = monte_carlo_errors(merge_scheme, 5_000, seed=2**63 + 7).to_json()
        second = monte_carlo_errors(merge_scheme, 5_000, seed=2**63 + 7).to_json()
        assert first == second
        assert first != monte_carlo_errors(merge_scheme, 5_000, seed=8).to_json()

    def test_clopper_pearson(self):
        half, low, high = binomial_interval(0, 20, 0.95, "clopper-pearson")
        assert low == 0.0 and high == pytest.approx(0.16843, abs=1e-5)
        with pytest.raises(ConfigError):
            binomial_interval(1, 2, 0.95, "wald")

    def test_flags_discrepancy(self, uniform_scheme):
        class DrawSensitive(type(uniform_scheme)):
            """Tables see the honest decoder; simulation draws silence half the answers."""

            def decode_many(self, x, zeta, draws=None):
                out = super().decode_many(x, zeta)
                return out if draws is None else np.where(np.asarray(draws) < 0.5, 0, out)

        lying = DrawSensitive(**{k: getattr(uniform_scheme, k) for k in
                                 ("alpha", "m", "p_star", "grouping", "pairing", "embedding")})
        report = monte_carlo_errors(lying, 20_000, seed=3)
        assert not report.consistent
        assert any(line.startswith("message 1") for line in report.discrepancies)
        assert monte_carlo_errors(with_constant_decoder(uniform_scheme, 1), 2_000, seed=3).consistent


class TestFalseAlarm:
    def test_constructed_schemes_hit_alpha(self, uniform_scheme, merge_scheme):
        assert worst_case_false_alarm_exact(uniform_scheme) == pytest.approx(0.2, abs=1e-12)
        assert worst_case_false_alarm_exact(merge_scheme) == pytest.approx(0.4, abs=1e-12)

    def test_constant_decoders(self, uniform_scheme):
        assert worst_case_false_alarm_exact(with_constant_decoder(uniform_scheme, 0)) == 0.0
        assert worst_case_false_alarm_exact(with_constant_decoder(uniform_scheme, 1)) == 1.0


class TestSecrecy:
    def test_constructed_schemes_pass(self, uniform_scheme, merge_scheme):
        for scheme in (uniform_scheme, merge_scheme):
            audit = secrecy_audit(scheme)
            assert audit and audit.max_zeta_gap <= 1e-12 and audit.max_x_gap <= 1e-12

    def test_corrupted_row_fails(self, merge_scheme):
        corrupted = perturb_embedding(merge_scheme, 2, 0, amount=0.01)
        audit = secrecy_audit(corrupted)
        assert not audit
        # moving 0.01 of the row of x = 0 shifts zeta mass by P*(x) * 0.01
        assert audit.max_zeta_gap == pytest.approx(0.5 * 0.01, abs=1e-12)

    def test_single_message(self, skewed3):
        audit = secrecy_audit(build_randomized_scheme(skewed3, 0.3, 1))
        assert audit.max_zeta_gap == 0.0 and audit.max_x_gap <= 1e-15


class TestOracle:
    def test_examples(self, skewed3):
        assert brute_force_bound_oracle(skewed3, 0.25, 0.1) == pytest.approx(0.25, abs=0.001)
        assert brute_force_bound_oracle(skewed3, 0.25, 0.0) == excess_mass(skewed3.probs, 0.25)
        assert brute_force_bound_oracle(skewed3, 0.5, 0.3) == 0.0

    def test_support_cap(self):
        with pytest.raises(ConfigError):
            brute_force_bound_oracle(pmf(np.full(7, 1 / 7)), 0.1, 0.1)

    @settings(max_examples=25)
    @given(pmf_vectors(max_size=4), st.floats(0.05, 0.9), st.floats(0.0, 0.8))
    def test_never_below_closed_form_and_close_to_it(self, probs, t, d):
        q = pmf(probs)
        grid = brute_force_bound_oracle(q, t, d)
        exact = tv_closed_form(q, t, d)
        assert exact - 1e-12 <= grid <= exact + 0.002
