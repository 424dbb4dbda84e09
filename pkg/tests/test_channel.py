import itertools

import numpy as np
import pytest

from conftest import identity_model, random_model
from core.channel import (BeamConfig, BeamDenoiser, BigramPrior, CandidateIndex, UnigramDenoiser,
                          build_bigram_prior, build_candidate_index, denoise_sequence_beam,
                          denoise_sequence_unigram, denoise_word, score_path)
from core.corpus import TokenSequence, Vocabulary
from core.noise import Alphabet, ConfusionModel, uniform_noise, word_likelihood
from core.state_models import Document


def _random_words(rng, chars, count, max_length):
    words = set()
    while len(words) < count:
        words.add("".join(rng.choice(list(chars), size=int(rng.integers(1, max_length + 1)))))
    return sorted(words)


def _scan(o, priors, model):
    """Full-vocabulary argmax without length buckets."""
    best, best_key = o, None
    for word, prior in priors.items():
        score = word_likelihood(o, word, model) * prior
        if score == 0.0:
            continue
        key = (score, prior, [-ord(ch) for ch in word])
        if best_key is None or key > best_key:
            best, best_key = word, key
    return best


class TestCandidateIndex:

    def test_buckets_sorted_by_prior(self):
        index = build_candidate_index(Vocabulary({"a": 1, "bb": 2, "cc": 1}))
        assert [w for w, _ in index.lookup(1)] == ["a"]
        assert [w for w, _ in index.lookup(2)] == ["bb", "cc"]
        assert index.lookup(3) == ()

    def test_empty_vocabulary(self):
        assert len(build_candidate_index(Vocabulary({}))) == 0

    def test_equal_priors_are_lexicographic(self):
        index = build_candidate_index(Vocabulary({"zz": 1, "ab": 1, "mm": 1}))
        assert [w for w, _ in index.lookup(2)] == ["ab", "mm", "zz"]

    def test_every_word_in_one_bucket(self):
        words = _random_words(np.random.default_rng(0), "abc", 40, 5)
        index = build_candidate_index(Vocabulary({w: 1 for w in words}))
        assert sorted(w for bucket in index.by_length.values() for w, _ in bucket) == words


class TestDenoiseWord:

    @pytest.fixture
    def cat_cot(self):
        index = build_candidate_index(Vocabulary({"cat": 9, "cot": 1}))
        return index, uniform_noise(Alphabet(("a", "c", "o", "t")), 0.1)

    def test_exact_match_wins(self, cat_cot):
        assert denoise_word("cat", *cat_cot) == "cat"

    def test_rare_exact_match_wins(self, cat_cot):
        assert denoise_word("cot", *cat_cot) == "cot"

    def test_prior_beats_exact_match(self, ab_model):
        index = build_candidate_index(Vocabulary({"a": 9, "b": 1}))
        assert denoise_word("b", index, ab_model) == "a"

    def test_no_candidate_keeps_observation(self, cat_cot):
        assert denoise_word("zzz", *cat_cot) == "zzz"
        assert denoise_word("toolong", *cat_cot) == "toolong"

    def test_tie_resolves_lexicographically(self):
        index = build_candidate_index(Vocabulary({"ba": 1, "ab": 1}))
        assert denoise_word("aa", index, uniform_noise(Alphabet(("a", "b")), 0.3)) == "ab"

    def test_sequence(self, cat_cot, ab_model):
        assert denoise_sequence_unigram(TokenSequence(()), *cat_cot).tokens == ()
        assert denoise_sequence_unigram(TokenSequence(("cat", "cot")), *cat_cot).tokens == ("cat", "cot")
        index = build_candidate_index(Vocabulary({"a": 9, "b": 1}))
        assert denoise_sequence_unigram(TokenSequence(("b",)), index, ab_model).tokens == ("a",)


class TestDenoiserProperties:

    def test_zero_noise_consistency(self):
        rng = np.random.default_rng(1)
        words = _random_words(rng, "abcde", 1000, 7)
        vocab = Vocabulary({w: int(rng.integers(1, 100)) for w in words})
        denoiser = UnigramDenoiser(build_candidate_index(vocab), identity_model("abcde"))
        assert all(denoiser.denoise(w) == w for w in words)

    def test_index_matches_full_scan(self):
        rng = np.random.default_rng(2)
        model = random_model(rng, "abc", diagonal_boost=0.5)
        words = _random_words(rng, "abc", 30, 3)
        priors = {w: float(rng.uniform(0.01, 1.0)) for w in words}
        denoiser = UnigramDenoiser(CandidateIndex.from_priors(priors), model)
        for _ in range(10_000):
            o = "".join(rng.choice(list("abcz"), size=int(rng.integers(1, 5)), p=[0.32, 0.32, 0.32, 0.04]))
            assert denoiser.denoise(o) == _scan(o, priors, model), o

    def test_prior_scaling_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            model = random_model(rng, "ab", diagonal_boost=0.3)
            words = _random_words(rng, "ab", int(rng.integers(2, 7)), 3)
            priors = {w: float(rng.uniform(0.01, 1.0)) for w in words}
            scale = float(rng.uniform(0.01, 100.0))
            o = "".join(rng.choice(["a", "b"], size=int(rng.integers(1, 4))))
            plain = denoise_word(o, CandidateIndex.from_priors(priors), model)
            scaled = denoise_word(o, CandidateIndex.from_priors({w: p * scale for w, p in priors.items()}), model)
            assert plain == scaled

    def test_deterministic(self):
        index = build_candidate_index(Vocabulary({"ab": 2, "ba": 2, "aa": 1}))
        model = uniform_noise(Alphabet(("a", "b")), 0.4)
        assert {denoise_word("bb", index, model) for _ in range(5)} == {"ab"}


class TestBigramPrior:

    def test_conditional_distribution_sums_to_one(self):
        docs = [Document(id="1", text="new york is not new jersey"), Document(id="2", text="new york")]
        prior = build_bigram_prior(docs, backoff_weight=0.7)
        words = list(prior.unigram.entries)
        for prev in words + ["unseen", None]:
            assert sum(prior.probability(w, prev) for w in words) == pytest.approx(1.0, abs=1e-6)

    def test_interpolation(self):
        prior = BigramPrior(Vocabulary({"new": 5, "york": 3, "fork": 2}), {("new", "york"): 10}, 0.7)
        assert prior.probability("york", "new") == pytest.approx(0.7 + 0.3 * 0.3)
        assert prior.probability("fork", "new") == pytest.approx(0.3 * 0.2)
        assert prior.probability("fork", "york") == pytest.approx(0.2)

    def test_rejects_bad_weight(self):
        with pytest.raises(ValueError):
            BigramPrior(Vocabulary({"a": 1}), {}, 1.0)

    def test_beam_width_validated(self):
        with pytest.raises(ValueError):
            BeamConfig(0)


class TestBeamSearch:

    @pytest.fixture
    def new_york(self):
        vocab = Vocabulary({"new": 5, "york": 3, "fork": 2})
        model = uniform_noise(Alphabet.from_text(vocab.entries), 0.15)
        return vocab, build_candidate_index(vocab), model

    def _prior(self, vocab, weight):
        return BigramPrior(vocab, {("new", "york"): 10}, weight)

    def test_strong_bigram_corrects_context(self, new_york):
        vocab, index, model = new_york
        out = denoise_sequence_beam(TokenSequence(("new", "fork")), index, model, self._prior(vocab, 0.95), BeamConfig(4))
        assert out.tokens == ("new", "york")

    def test_weak_bigram_keeps_observation(self, new_york):
        vocab, index, model = new_york
        out = denoise_sequence_beam(TokenSequence(("new", "fork")), index, model, self._prior(vocab, 0.7), BeamConfig(4))
        assert out.tokens == ("new", "fork")

    @pytest.mark.parametrize("weight", [0.5, 0.88, 0.89, 0.95])
    def test_matches_brute_force_paths(self, new_york, weight):
        vocab, index, model = new_york
        prior = self._prior(vocab, weight)
        observed = TokenSequence(("new", "fork"))
        paths = [("new", "york"), ("new", "fork")]
        best = max(paths, key=lambda p: score_path(observed, p, index, model, prior))
        assert denoise_sequence_beam(observed, index, model, prior, BeamConfig(4)).tokens == best

    def test_empty_sequence(self, new_york):
        vocab, index, model = new_york
        assert denoise_sequence_beam(TokenSequence(()), index, model, self._prior(vocab, 0.7)).tokens == ()

    def test_impossible_path_scores_minus_infinity(self, new_york):
        vocab, index, model = new_york
        assert score_path(TokenSequence(("new",)), ("york",), index, model, self._prior(vocab, 0.7)) == float("-inf")

    def test_width_one_without_bigrams_is_unigram(self):
        rng = np.random.default_rng(4)
        words = _random_words(rng, "abcd", 25, 3)
        vocab = Vocabulary({w: int(rng.integers(1, 30)) for w in words})
        index = build_candidate_index(vocab)
        model = random_model(rng, "abcd", diagonal_boost=1.0)
        beam = BeamDenoiser(index, model, BigramPrior(vocab, {}, 0.5), BeamConfig(1))
        unigram = UnigramDenoiser(index, model)
        for _ in range(100):
            seq = TokenSequence(tuple("".join(rng.choice(list("abcd"), size=int(rng.integers(1, 4))))
                                      for _ in range(int(rng.integers(1, 9)))))
            assert beam.search(seq).tokens == tuple(unigram.denoise(o) for o in seq)

    def test_score_non_decreasing_in_width(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            # at most two words per length, so width 2 already searches exactly
            words = [w for length in range(1, 4)
                     for w in rng.choice(["".join(p) for p in itertools.product("ab", repeat=length)],
                                         size=2, replace=False)]
            vocab = Vocabulary({str(w): int(rng.integers(1, 20)) for w in words})
            bigrams = {(str(a), str(b)): int(rng.integers(1, 5))
                       for a in words for b in words if rng.random() < 0.3}
            prior = BigramPrior(vocab, bigrams, 0.6)
            index = build_candidate_index(vocab)
            model = random_model(rng, "ab", diagonal_boost=0.5)
            seq = TokenSequence(tuple("".join(rng.choice(["a", "b"], size=int(rng.integers(1, 4))))
                                      for _ in range(5)))

            options = []
            for o in seq:
                same_length = [w for w in vocab.entries if len(w) == len(o)]
                options.append([w for w in same_length if word_likelihood(o, w, model) > 0] or [o])
            exact = max(score_path(seq, path, index, model, prior) for path in itertools.product(*options))

            scores = [BeamDenoiser(index, model, prior, BeamConfig(width)).search(seq).log_score
                      for width in range(1, 9)]
            assert all(a <= b for a, b in zip(scores, scores[1:]))
            assert scores[1] == pytest.approx(exact, abs=1e-6)
