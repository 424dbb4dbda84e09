import math
import time

import numpy as np
import pytest
from pydantic import ValidationError

from conftest import random_model
from core.complexity import (DEFAULT_GAMMAS, estimate_theta, exhaustive_theta, gamma_sweep,
                             report_theta, subset_masses)
from core.corpus import Vocabulary
from core.errors import EmptySubsetError, EnumerationLimitError, SamplingError
from core.noise import Alphabet, interpolate, uniform_noise
from core.reports import write_sweep
from core.state_models import ComplexityEstimate, Subset, SweepReport


SYMMETRIC = Vocabulary({"a": 5, "b": 5})
SKEWED = Vocabulary({"a": 9, "b": 1})


def _within(estimate: ComplexityEstimate, expected: float, n_sigma: float = 3.0) -> bool:
    sigma = math.sqrt(expected * (1 - expected) / estimate.n_samples)
    return abs(estimate.theta - expected) <= n_sigma * sigma


class TestExhaustiveTheta:

    def test_symmetric_pair(self, ab_model):
        assert exhaustive_theta(SYMMETRIC, ab_model) == pytest.approx(0.2, abs=1e-12)

    def test_skewed_pair(self, ab_model):
        assert exhaustive_theta(SKEWED, ab_model) == pytest.approx(0.1, abs=1e-12)

    def test_singleton(self, ab_model):
        assert exhaustive_theta(Vocabulary({"ab": 3}), ab_model) == 0.0

    def test_enumeration_guard(self, ab_model):
        vocab = Vocabulary({"a" * 30: 1, "b" * 30: 1})
        with pytest.raises(EnumerationLimitError):
            exhaustive_theta(vocab, ab_model)

    def test_subset_decomposition(self):
        rng = np.random.default_rng(0)
        vocab = Vocabulary({"a1": 3, "ab": 5, "b": 2, "1": 4, "-": 1, "a-": 2, "11": 6, "ba": 1})
        model = random_model(rng, "-1ab", diagonal_boost=1.0)
        masses = subset_masses(vocab)
        parts = sum(masses[s] * exhaustive_theta(vocab, model, s) for s in (Subset.NUMERIC, Subset.ALPHA, Subset.OTHER))
        assert exhaustive_theta(vocab, model, Subset.ALL) == pytest.approx(parts, abs=1e-12)

    def test_monotone_on_digit_strings(self):
        rng = np.random.default_rng(1)
        words = rng.choice([f"{i:02d}" for i in range(100)], size=10, replace=False)
        vocab = Vocabulary({str(w): 1 for w in words})
        base = uniform_noise(Alphabet(tuple("0123456789")), 0.07)
        thetas = [exhaustive_theta(vocab, interpolate(base, g)) for g in DEFAULT_GAMMAS]
        assert thetas[0] > 0.0
        assert all(a < b for a, b in zip(thetas, thetas[1:]))


class TestEstimateTheta:

    def test_symmetric_pair(self, ab_model):
        estimate = estimate_theta(SYMMETRIC, ab_model, n_samples=100_000, seed=1)
        assert _within(estimate, 0.2)
        assert estimate.std_error == pytest.approx(math.sqrt(estimate.theta * (1 - estimate.theta) / 100_000))

    def test_skewed_pair(self, ab_model):
        assert _within(estimate_theta(SKEWED, ab_model, n_samples=100_000, seed=2), 0.1)

    def test_singleton(self, ab_model):
        assert estimate_theta(Vocabulary({"ba": 1}), ab_model, n_samples=10_000, seed=3).theta == 0.0

    def test_zero_noise(self):
        rng = np.random.default_rng(4)
        vocab = Vocabulary({"ab": 3, "ba": 2, "a": 1, "bb": 7})
        silent = interpolate(random_model(rng, "ab"), 0.0)
        estimate = estimate_theta(vocab, silent, n_samples=20_000, seed=4)
        assert estimate.theta == 0.0
        assert estimate.std_error == 0.0

    def test_empty_subset(self, ab_model):
        with pytest.raises(EmptySubsetError):
            estimate_theta(SYMMETRIC, ab_model, Subset.NUMERIC, n_samples=10)

    def test_needs_samples(self, ab_model):
        with pytest.raises(SamplingError):
            estimate_theta(SYMMETRIC, ab_model, n_samples=0)

    def test_deterministic_given_seed(self, ab_model):
        first = estimate_theta(SKEWED, ab_model, n_samples=30_000, seed=7)
        second = estimate_theta(SKEWED, ab_model, n_samples=30_000, seed=7)
        assert first == second

    def test_shard_count_invariance(self):
        rng = np.random.default_rng(5)
        vocab = Vocabulary({"ab": 4, "ba": 3, "aa": 2, "abc": 5, "cab": 1, "c": 2})
        model = random_model(rng, "abc", diagonal_boost=1.0)
        results = [estimate_theta(vocab, model, n_samples=50_000, seed=42, shards=s, block_size=1000)
                   for s in (1, 4, 16)]
        assert results[0] == results[1] == results[2]

    def test_real_word_share(self, ab_model):
        # every error on {a, b} turns one vocabulary word into the other
        estimate = estimate_theta(SYMMETRIC, ab_model, n_samples=20_000, seed=8)
        assert estimate.real_word_share == 1.0
        vocab = Vocabulary({"aa": 1, "bb": 1})
        assert estimate_theta(vocab, ab_model, n_samples=20_000, seed=8).real_word_share < 1.0

    def test_unknown_characters_never_change(self, ab_model):
        vocab = Vocabulary({"x": 1, "y": 1})
        assert estimate_theta(vocab, ab_model, n_samples=5_000, seed=9).theta == 0.0

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(2024)
        n_samples = 100_000
        for instance in range(20):
            chars = "abcde"[:int(rng.integers(2, 6))]
            n_words = int(rng.integers(2, 11))
            words = set()
            while len(words) < n_words:
                words.add("".join(rng.choice(list(chars), size=int(rng.integers(1, 4)))))
            vocab = Vocabulary({w: int(rng.integers(1, 50)) for w in sorted(words)})
            model = random_model(rng, chars, diagonal_boost=float(rng.uniform(0.5, 4.0)))

            exact = exhaustive_theta(vocab, model)
            estimate = estimate_theta(vocab, model, n_samples=n_samples, seed=instance)
            sigma = math.sqrt(exact * (1 - exact) / n_samples)
            assert abs(estimate.theta - exact) <= 4 * sigma + 5 / n_samples, (instance, exact, estimate.theta)


class TestGammaSweep:

    def test_gamma_zero(self, ab_model):
        report = gamma_sweep(SKEWED, ab_model, [0.0], [Subset.ALL], n_samples=5_000, seed=0)
        assert [row.theta for row in report.rows] == [0.0]

    def test_half_gamma(self, ab_model):
        report = gamma_sweep(SYMMETRIC, ab_model, [0.5], [Subset.ALL], n_samples=50_000, seed=1)
        assert _within(report.rows[0], 0.1)

    def test_linear_in_gamma(self, ab_model):
        report = gamma_sweep(SYMMETRIC, ab_model, DEFAULT_GAMMAS, [Subset.ALL], n_samples=20_000, seed=2)
        assert [row.gamma for row in report.rows] == DEFAULT_GAMMAS
        for row in report.rows:
            assert _within(row, 0.2 * row.gamma, n_sigma=4.0), row

    def test_rows_grouped_by_subset(self):
        vocab = Vocabulary({"ab": 2, "12": 3, "a": 1})
        model = uniform_noise(Alphabet(tuple("12ab")), 0.1)
        report = gamma_sweep(vocab, model, [1.0, 0.5], [Subset.NUMERIC, Subset.ALPHA],
                             n_samples=2_000, seed=3, corpus="toy", model_label="uniform")
        assert [(r.subset, r.gamma) for r in report.rows] == [(Subset.NUMERIC, 0.5), (Subset.NUMERIC, 1.0),
                                                               (Subset.ALPHA, 0.5), (Subset.ALPHA, 1.0)]
        assert report_theta(report, Subset.ALPHA, 1.0) is report.rows[3]
        assert report_theta(report, Subset.ALL, 1.0) is None

    def test_common_random_numbers_are_monotone(self, ab_model):
        report = gamma_sweep(SYMMETRIC, ab_model, DEFAULT_GAMMAS, [Subset.ALL],
                             n_samples=10_000, seed=4, common_random_numbers=True)
        thetas = [row.theta for row in report.rows]
        assert all(a <= b for a, b in zip(thetas, thetas[1:]))

    def test_csv_identical_across_shards(self, tmp_path, ab_model):
        contents = []
        for shards in (1, 4, 16):
            report = gamma_sweep(SKEWED, ab_model, [0.5, 1.0], [Subset.ALL], n_samples=40_000, seed=42,
                                 shards=shards, block_size=2048)
            path = tmp_path / f"sweep_{shards}.csv"
            write_sweep(report, str(path))
            contents.append(path.read_bytes())
        assert contents[0] == contents[1] == contents[2]

    def test_report_rejects_duplicates(self):
        row = ComplexityEstimate(theta=0.1, std_error=0.01, n_samples=10, gamma=0.5, subset=Subset.ALL, seed=0)
        with pytest.raises(ValidationError):
            SweepReport(corpus="c", model="m", rows=[row, row])


class TestCorpusRanking:

    def _corpus(self, rng, letters, length):
        words = set()
        while len(words) < 200:
            words.add("".join(rng.choice(list(letters), size=length)))
        words = sorted(words)
        tokens = rng.choice(words, size=2000)
        counts = {}
        for token in tokens:
            counts[str(token)] = counts.get(str(token), 0) + 1
        return Vocabulary(counts)

    def test_numeric_corpus_is_harder(self):
        rng = np.random.default_rng(11)
        numeric = self._corpus(rng, "0123456789", 4)
        alpha = self._corpus(rng, "abcdefghijklmnopqrstuvwxyz", 6)
        estimates = []
        for vocab in (numeric, alpha):
            model = uniform_noise(Alphabet.from_text(vocab.entries), 0.07)
            report = gamma_sweep(vocab, model, [1.0], [Subset.ALL], n_samples=100_000, seed=3)
            estimates.append(report.rows[0])
        num, alp = estimates
        assert num.theta - alp.theta > 5 * math.hypot(num.std_error, alp.std_error)


@pytest.mark.slow
class TestPerformance:

    def test_default_sample_count_on_large_vocabulary(self):
        rng = np.random.default_rng(0)
        letters = list("abcdefghijklmnopqrstuvwxyz0123456789")
        words = set()
        while len(words) < 10_000:
            words.add("".join(rng.choice(letters, size=int(rng.integers(2, 10)))))
        vocab = Vocabulary({w: int(rng.zipf(1.5)) % 10_000 + 1 for w in words})
        model = uniform_noise(Alphabet(tuple(sorted(letters))), 0.07)
        started = time.perf_counter()
        estimate = estimate_theta(vocab, model, n_samples=1_000_000, seed=0, shards=4, workers=4)
        assert time.perf_counter() - started < 300
        assert 0.0 <= estimate.theta <= 1.0

    def test_workers_do_not_change_results(self, ab_model):
        serial = estimate_theta(SKEWED, ab_model, n_samples=50_000, seed=5, shards=4, workers=1)
        parallel = estimate_theta(SKEWED, ab_model, n_samples=50_000, seed=5, shards=4, workers=2)
        assert serial == parallel
