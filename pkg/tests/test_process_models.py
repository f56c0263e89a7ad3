import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import pmf, pmf_vectors
from wmlimits.errors import CapacityError, ConfigError
from wmlimits.process_models import (
    Alphabet,
    MarkovSource,
    SequencePmf,
    absolutely_continuous,
    entropy,
    entropy_rate,
    enumerate_sequence_pmf,
    kl_divergence,
    period,
    stationary_distribution,
    tv_distance,
)

# Frozen values, recomputed at 30 digits with mpmath.
H_FLIP_01 = 0.325082973391448239506550028224
H_FLIP_01_PAIR = 1.01823015395139354892378214968


class TestSequencePmf:
    def test_mixed_radix_most_significant_first(self):
        law = SequencePmf(Alphabet(2), 3, np.full(8, 0.125))
        assert law.index_of((1, 0, 1)) == 5
        assert law.symbols(5) == (1, 0, 1)
        assert law.symbols(1) == (0, 0, 1)

    def test_rejects_bad_sums_and_negatives(self):
        with pytest.raises(ConfigError):
            pmf([0.5, 0.6])
        with pytest.raises(ConfigError):
            pmf([1.5, -0.5])
        with pytest.raises(ConfigError):
            SequencePmf(Alphabet(2), 2, np.full(3, 1 / 3))

    def test_sum_tolerance_is_absolute_1e12(self):
        pmf([0.5, 0.5 + 5e-13])
        with pytest.raises(ConfigError):
            pmf([0.5, 0.5 + 5e-12])

    def test_enumeration_cap(self):
        with pytest.raises(CapacityError):
            SequencePmf(Alphabet(2), 21, np.zeros(1))
        with pytest.raises(CapacityError):
            enumerate_sequence_pmf(MarkovSource.symmetric_binary(0.1), 5, cap=16)

    def test_probs_are_read_only(self):
        law = pmf([0.5, 0.5])
        with pytest.raises(ValueError):
            law.probs[0] = 1.0

    def test_csv_round_trip(self, tmp_path):
        law = enumerate_sequence_pmf(MarkovSource.symmetric_binary(0.1), 3)
        path = tmp_path / "law.csv"
        law.to_csv(path)
        header, first = path.read_text().splitlines()[:2]
        assert header == "sequence_index,sequence_symbols,probability"
        assert first.startswith("0,0 0 0,")
        back = SequencePmf.from_csv(path, 2)
        assert back.length == 3
        np.testing.assert_array_equal(back.probs, law.probs)


class TestEnumeration:
    def test_fair_coin_chain_is_uniform(self):
        law = enumerate_sequence_pmf(MarkovSource.symmetric_binary(0.5), 3)
        np.testing.assert_allclose(law.probs, np.full(8, 0.125), atol=1e-15)

    def test_deterministic_chain(self):
        source = MarkovSource(Alphabet(2), np.array([1.0, 0.0]), np.eye(2))
        law = enumerate_sequence_pmf(source, 2)
        np.testing.assert_array_equal(law.probs, [1.0, 0.0, 0.0, 0.0])

    def test_flip_chain_pairs(self):
        law = enumerate_sequence_pmf(MarkovSource.symmetric_binary(0.1), 2)
        np.testing.assert_allclose(law.probs, [0.45, 0.05, 0.05, 0.45], atol=1e-15)

    def test_product_formula(self):
        transition = np.array([[0.2, 0.8, 0.0], [0.3, 0.3, 0.4], [0.5, 0.0, 0.5]])
        source = MarkovSource(Alphabet(3), np.array([0.1, 0.6, 0.3]), transition)
        law = enumerate_sequence_pmf(source, 3)
        symbols = (1, 2, 0)
        expected = 0.6 * 0.4 * 0.5
        assert law.probs[law.index_of(symbols)] == pytest.approx(expected, abs=1e-15)

    @given(st.integers(2, 4), st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_sums_to_one(self, k, length, seed):
        rng = np.random.default_rng(seed)
        transition = rng.dirichlet(np.ones(k), size=k)
        transition /= transition.sum(axis=1, keepdims=True)
        initial = rng.dirichlet(np.ones(k))
        initial /= initial.sum()
        source = MarkovSource(Alphabet(k), initial, transition)
        law = enumerate_sequence_pmf(source, length)
        assert abs(math.fsum(law.probs) - 1.0) <= 1e-12


class TestMarkovSource:
    def test_rejects_non_stochastic_rows(self):
        with pytest.raises(ConfigError):
            MarkovSource(Alphabet(2), np.array([0.5, 0.5]), np.array([[0.5, 0.6], [0.5, 0.5]]))

    def test_stationary_ergodic_flag(self):
        MarkovSource(Alphabet(2), np.array([0.5, 0.5]), np.array([[0.9, 0.1], [0.1, 0.9]]), True)
        with pytest.raises(ConfigError, match="periodic"):
            MarkovSource(Alphabet(2), np.array([0.5, 0.5]), np.array([[0.0, 1.0], [1.0, 0.0]]), True)
        with pytest.raises(ConfigError, match="reducible"):
            MarkovSource(Alphabet(2), np.array([1.0, 0.0]), np.eye(2), True)
        with pytest.raises(ConfigError, match="stationary"):
            MarkovSource(Alphabet(2), np.array([0.6, 0.4]), np.array([[0.9, 0.1], [0.1, 0.9]]), True)

    def test_period(self):
        assert period(np.array([[0.0, 1.0], [1.0, 0.0]])) == 2
        assert period(np.array([[0.5, 0.5], [1.0, 0.0]])) == 1

    def test_json_round_trip(self, tmp_path):
        source = MarkovSource.stationary([[0.5, 0.5], [0.25, 0.75]])
        path = tmp_path / "source.json"
        path.write_text(json.dumps(source.to_dict()))
        back = MarkovSource.from_json(path)
        np.testing.assert_array_equal(back.transition, source.transition)
        np.testing.assert_array_equal(back.initial, source.initial)

    def test_iid_flag(self):
        assert MarkovSource.iid([0.3, 0.7]).is_iid
        assert not MarkovSource.symmetric_binary(0.1).is_iid


class TestStationary:
    @pytest.mark.parametrize(
        "transition, expected",
        [
            ([[0.0, 1.0], [1.0, 0.0]], [0.5, 0.5]),
            ([[0.9, 0.1], [0.1, 0.9]], [0.5, 0.5]),
            ([[0.5, 0.5], [0.25, 0.75]], [1 / 3, 2 / 3]),
        ],
    )
    def test_examples(self, transition, expected):
        np.testing.assert_allclose(stationary_distribution(transition), expected, atol=1e-12)

    def test_reducible_rejected(self):
        with pytest.raises(ConfigError):
            stationary_distribution(np.eye(2))


class TestEntropy:
    def test_examples(self):
        assert entropy([0.25] * 4) == pytest.approx(math.log(4), abs=1e-15)
        assert entropy([1.0, 0.0]) == 0.0
        assert entropy([0.45, 0.05, 0.05, 0.45]) == pytest.approx(H_FLIP_01_PAIR, abs=1e-12)

    def test_base_two(self):
        assert entropy([0.25] * 4, base=2) == pytest.approx(2.0, abs=1e-15)

    def test_rates(self):
        assert entropy_rate(MarkovSource.iid([0.5, 0.5])) == pytest.approx(math.log(2), abs=1e-15)
        cycle = MarkovSource.stationary([[0.0, 1.0], [1.0, 0.0]])
        assert entropy_rate(cycle) == 0.0
        assert entropy_rate(MarkovSource.symmetric_binary(0.1)) == pytest.approx(H_FLIP_01, abs=1e-14)

    def test_block_entropy_per_symbol_decreases_to_rate(self):
        source = MarkovSource.symmetric_binary(0.1)
        per_symbol = [entropy(enumerate_sequence_pmf(source, t)) / t for t in range(1, 13)]
        assert all(b <= a + 1e-12 for a, b in zip(per_symbol, per_symbol[1:]))
        assert all(v >= H_FLIP_01 - 1e-12 for v in per_symbol)
        increments = [
            entropy(enumerate_sequence_pmf(source, t + 1)) - entropy(enumerate_sequence_pmf(source, t))
            for t in range(1, 12)
        ]
        np.testing.assert_allclose(increments, H_FLIP_01, atol=1e-12)


class TestDistances:
    def test_tv_examples(self):
        assert tv_distance(pmf([0.5, 0.5]), pmf([0.5, 0.5])) == 0.0
        assert tv_distance(pmf([1.0, 0.0]), pmf([0.0, 1.0])) == 1.0
        assert tv_distance(pmf([0.5, 0.3, 0.2]), pmf([0.45, 0.3, 0.25])) == pytest.approx(0.05, abs=1e-15)

    def test_tv_shape_mismatch(self):
        with pytest.raises(ConfigError):
            tv_distance(pmf([0.5, 0.5]), pmf([0.2, 0.3, 0.5]))

    def test_kl_examples(self):
        assert kl_divergence(pmf([0.3, 0.7]), pmf([0.3, 0.7])) == 0.0
        assert kl_divergence(pmf([1.0, 0.0]), pmf([0.5, 0.5])) == pytest.approx(math.log(2), abs=1e-15)
        assert kl_divergence(pmf([0.5, 0.5]), pmf([1.0, 0.0])) == math.inf
        assert not absolutely_continuous(pmf([0.5, 0.5]), pmf([1.0, 0.0]))

    def test_kl_is_asymmetric(self):
        p, q = pmf([0.8, 0.2]), pmf([0.5, 0.5])
        assert kl_divergence(p, q) != pytest.approx(kl_divergence(q, p), abs=1e-3)

    @given(pmf_vectors(max_size=6), pmf_vectors(max_size=6))
    def test_tv_symmetric_and_zero_iff_equal(self, a, b):
        if len(a) != len(b):
            b = a[::-1].copy()
        p, q = pmf(a), pmf(b)
        assert tv_distance(p, q) == pytest.approx(tv_distance(q, p), abs=1e-15)
        assert tv_distance(p, p) == 0.0
        assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-15)
        if np.max(np.abs(a - b)) > 1e-9:
            assert tv_distance(p, q) > 0
            assert kl_divergence(p, q) > 0
