"""
Noisy channel denoisers.

Candidates are scored in the log domain, p(o|w) * prior(w) becoming a sum of
log-probabilities. Log-probabilities are floored at -745 and quantised to
integer multiples of 2**-32 nats before summation, so scores are exact and
independent of summation order: two candidates whose factors form the same
multiset tie exactly, and ties resolve by bucket order (higher prior, then
lexicographically smaller word).
"""
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import DEFAULT_BACKOFF_WEIGHT, DEFAULT_BEAM_WIDTH
from core.corpus import TokenSequence, Vocabulary, tokenize
from core.noise import ConfusionModel
from core.state_models import Document


logger = logging.getLogger(__name__)

LOG_FLOOR = -745.0
LOG_SCALE = float(2 ** 32)
NO_SCORE = np.iinfo(np.int64).min
SCORE_CELLS = 2 ** 22


def quantized_log(probabilities) -> Tuple[np.ndarray, np.ndarray]:
    """Integer log-probabilities (units of 2**-32 nats) and the mask of non-zero entries."""
    p = np.asarray(probabilities, dtype=np.float64)
    with np.errstate(divide="ignore"):
        logs = np.maximum(np.log(p), LOG_FLOOR)
    return np.round(logs * LOG_SCALE).astype(np.int64), p > 0


@dataclass(frozen=True)
class CandidateIndex:
    """Vocabulary words bucketed by length, each bucket sorted by (-prior, word)."""
    by_length: Dict[int, Tuple[Tuple[str, float], ...]] = field(default_factory=dict)

    @classmethod
    def from_priors(cls, priors: Mapping[str, float]) -> "CandidateIndex":
        buckets: Dict[int, List[Tuple[str, float]]] = defaultdict(list)
        for word, prior in priors.items():
            if prior <= 0:
                raise ValueError(f"Prior of {word!r} must be positive")
            buckets[len(word)].append((word, float(prior)))
        return cls({length: tuple(sorted(words, key=lambda wp: (-wp[1], wp[0])))
                    for length, words in sorted(buckets.items())})

    def __len__(self) -> int:
        return sum(len(bucket) for bucket in self.by_length.values())

    def lookup(self, length: int) -> Tuple[Tuple[str, float], ...]:
        return self.by_length.get(length, ())


def build_candidate_index(vocab: Vocabulary) -> CandidateIndex:
    return CandidateIndex.from_priors({word: vocab.frequency(word) for word in vocab.entries})


@dataclass(frozen=True, eq=False)
class _Bucket:
    words: Tuple[str, ...]
    codes: np.ndarray
    priors: np.ndarray
    log_priors: np.ndarray
    position: Dict[str, int]


class UnigramDenoiser:
    """
    Optimal unigram noisy channel decoder: argmax over w of p(o|w) * prior(w).

    Characters outside the model alphabet get a dedicated code whose
    substitution probabilities are all zero, so any candidate or observation
    containing them scores zero.
    """

    def __init__(self, index: CandidateIndex, model: ConfusionModel):
        self.index = index
        self.model = model
        size = len(model.alphabet)
        self.unknown_code = size
        log_sub, allowed = quantized_log(model.sub)
        self.log_sub = np.zeros((size + 1, size + 1), dtype=np.int64)
        self.log_sub[:size, :size] = log_sub
        self.allowed = np.zeros((size + 1, size + 1), dtype=bool)
        self.allowed[:size, :size] = allowed
        self.buckets: Dict[int, _Bucket] = {}
        for length, entries in index.by_length.items():
            words = tuple(word for word, _ in entries)
            priors = np.array([prior for _, prior in entries], dtype=np.float64)
            codes = np.array([self.encode(word) for word in words], dtype=np.int64).reshape(len(words), length)
            self.buckets[length] = _Bucket(words=words,
                                           codes=codes,
                                           priors=priors,
                                           log_priors=quantized_log(priors)[0],
                                           position={word: i for i, word in enumerate(words)})

    def encode(self, word: str) -> np.ndarray:
        index = self.model.alphabet.index
        return np.array([index.get(ch, self.unknown_code) for ch in word], dtype=np.int64)

    def emission_scores(self, bucket: _Bucket, observed_codes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Quantised log p(o|w) for every bucket word, and whether p(o|w) > 0."""
        scores = np.zeros(len(bucket.words), dtype=np.int64)
        possible = np.ones(len(bucket.words), dtype=bool)
        for position, seen in enumerate(observed_codes):
            column = bucket.codes[:, position]
            scores += self.log_sub[column, seen]
            possible &= self.allowed[column, seen]
        return scores, possible

    def denoise(self, o: str) -> str:
        bucket = self.buckets.get(len(o))
        if bucket is None:
            return o
        emissions, possible = self.emission_scores(bucket, self.encode(o))
        scores = np.where(possible, emissions + bucket.log_priors, NO_SCORE)
        best = int(np.argmax(scores))
        return bucket.words[best] if possible[best] else o

    def decode_codes(self, length: int, observed: np.ndarray) -> np.ndarray:
        """
        Decode a batch of encoded observations of one length (shape m x length).
        Returns bucket positions of the decoded words, -1 where every
        candidate scores zero and the observation is kept.
        """
        result = np.full(observed.shape[0], -1, dtype=np.int64)
        bucket = self.buckets.get(length)
        if bucket is None or observed.shape[0] == 0:
            return result
        n_words = len(bucket.words)
        step = max(1, SCORE_CELLS // max(1, n_words))
        for start in range(0, observed.shape[0], step):
            block = observed[start:start + step]
            scores = np.repeat(bucket.log_priors[:, None], block.shape[0], axis=1)
            emissions = np.zeros_like(scores)
            possible = np.ones(scores.shape, dtype=bool)
            for position in range(length):
                rows = bucket.codes[:, position][:, None]
                cols = block[:, position][None, :]
                emissions += self.log_sub[rows, cols]
                possible &= self.allowed[rows, cols]
            scores = np.where(possible, emissions + scores, NO_SCORE)
            best = np.argmax(scores, axis=0)
            found = possible[best, np.arange(block.shape[0])]
            result[start:start + block.shape[0]] = np.where(found, best, -1)
        return result


def denoise_word(o: str, index: CandidateIndex, model: ConfusionModel) -> str:
    return UnigramDenoiser(index, model).denoise(o)


def denoise_sequence_unigram(seq: TokenSequence, index: CandidateIndex, model: ConfusionModel) -> TokenSequence:
    denoiser = UnigramDenoiser(index, model)
    return TokenSequence(tuple(denoiser.denoise(token) for token in seq))


# Bigram prior and beam search

@dataclass(frozen=True, eq=False)
class BigramPrior:
    """
    Interpolated bigram prior
        p(w | prev) = backoff_weight * p_ML(w | prev) + (1 - backoff_weight) * p(w)
    falling back to the unigram p(w) when prev was never seen as a history.
    """
    unigram: Vocabulary
    bigram: Dict[Tuple[str, str], int] = field(default_factory=dict)
    backoff_weight: float = DEFAULT_BACKOFF_WEIGHT
    successors: Dict[str, Dict[str, int]] = field(init=False, repr=False)
    history_totals: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.backoff_weight < 1.0:
            raise ValueError(f"backoff_weight must lie in (0, 1), got {self.backoff_weight}")
        successors: Dict[str, Dict[str, int]] = defaultdict(dict)
        for (prev, word), count in self.bigram.items():
            if count <= 0:
                raise ValueError("Bigram counts must be positive")
            successors[prev][word] = count
        object.__setattr__(self, "successors", dict(successors))
        object.__setattr__(self, "history_totals",
                           {prev: sum(words.values()) for prev, words in successors.items()})

    def probability(self, word: str, prev: Optional[str]) -> float:
        unigram = self.unigram.frequency(word)
        if prev not in self.successors:
            return unigram
        ml = self.successors[prev].get(word, 0) / self.history_totals[prev]
        return self.backoff_weight * ml + (1.0 - self.backoff_weight) * unigram


def build_bigram_prior(docs: Sequence[Document], backoff_weight: float = DEFAULT_BACKOFF_WEIGHT) -> BigramPrior:
    unigram: Counter = Counter()
    pairs: Counter = Counter()
    for doc in sorted(docs, key=lambda d: d.id):
        tokens = tokenize(doc.text).tokens
        unigram.update(tokens)
        pairs.update(zip(tokens, tokens[1:]))
    return BigramPrior(Vocabulary(dict(unigram)), dict(pairs), backoff_weight)


@dataclass(frozen=True)
class BeamConfig:
    width: int = DEFAULT_BEAM_WIDTH

    def __post_init__(self):
        if self.width < 1:
            raise ValueError(f"Beam width must be at least 1, got {self.width}")


@dataclass(frozen=True)
class BeamHypothesis:
    tokens: Tuple[str, ...]
    score: int

    @property
    def log_score(self) -> float:
        return self.score / LOG_SCALE


FALLBACK_STEP = int(round(LOG_FLOOR * LOG_SCALE))


class BeamDenoiser:
    """
    Left-to-right beam search maximising the sum of log p(o_i|w_i) + log p(w_i|w_{i-1}).

    Hypotheses ending in the same word are recombined (the bigram prior only
    sees the last word), keeping the higher score.
    """

    def __init__(self, index: CandidateIndex, model: ConfusionModel, prior: BigramPrior, cfg: BeamConfig):
        self.scorer = UnigramDenoiser(index, model)
        self.prior = prior
        self.cfg = cfg
        self._unigram = {length: np.array([prior.unigram.frequency(w) for w in bucket.words])
                         for length, bucket in self.scorer.buckets.items()}
        self._unigram_log = {length: quantized_log(p)[0] for length, p in self._unigram.items()}

    def prior_scores(self, length: int, prev: Optional[str]) -> np.ndarray:
        if prev not in self.prior.successors:
            return self._unigram_log[length]
        bucket = self.scorer.buckets[length]
        following = self.prior.successors[prev]
        ml = np.array([following.get(word, 0) for word in bucket.words], dtype=np.float64)
        ml /= self.prior.history_totals[prev]
        weight = self.prior.backoff_weight
        return quantized_log(weight * ml + (1.0 - weight) * self._unigram[length])[0]

    def candidates(self, o: str) -> Tuple[List[str], np.ndarray, np.ndarray]:
        """Same-length words with non-zero p(o|w): words, bucket positions, emission scores."""
        bucket = self.scorer.buckets.get(len(o))
        if bucket is None:
            return [], np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        emissions, possible = self.scorer.emission_scores(bucket, self.scorer.encode(o))
        positions = np.flatnonzero(possible)
        return [bucket.words[i] for i in positions], positions, emissions[positions]

    def search(self, seq: TokenSequence) -> BeamHypothesis:
        beam = [BeamHypothesis((), 0)]
        for o in seq:
            words, positions, emissions = self.candidates(o)
            extensions = []
            for rank, hyp in enumerate(beam):
                prev = hyp.tokens[-1] if hyp.tokens else None
                if not words:
                    extensions.append((hyp.score + FALLBACK_STEP, FALLBACK_STEP, rank, 0, o, hyp))
                    continue
                steps = emissions + self.prior_scores(len(o), prev)[positions]
                for k, word in enumerate(words):
                    step = int(steps[k])
                    extensions.append((hyp.score + step, step, rank, k, word, hyp))
            extensions.sort(key=lambda e: (-e[0], -e[1], e[2], e[3]))

            beam, kept_words = [], set()
            for total, _, _, _, word, hyp in extensions:
                if word in kept_words:
                    continue
                kept_words.add(word)
                beam.append(BeamHypothesis(hyp.tokens + (word,), total))
                if len(beam) == self.cfg.width:
                    break
        return beam[0]

    def score_path(self, observed: TokenSequence, hypothesis: Sequence[str]) -> Optional[int]:
        """Total quantised log-score of a complete hypothesis, None if it is impossible."""
        if len(observed) != len(hypothesis):
            return None
        total, prev = 0, None
        for o, word in zip(observed, hypothesis):
            words, positions, emissions = self.candidates(o)
            if not words:
                if word != o:
                    return None
                total += FALLBACK_STEP
            elif word in words:
                k = words.index(word)
                total += int(emissions[k] + self.prior_scores(len(o), prev)[positions[k]])
            else:
                return None
            prev = word
        return total


def denoise_sequence_beam(seq: TokenSequence,
                          index: CandidateIndex,
                          model: ConfusionModel,
                          prior: BigramPrior,
                          cfg: BeamConfig = BeamConfig()) -> TokenSequence:
    return TokenSequence(BeamDenoiser(index, model, prior, cfg).search(seq).tokens)


def score_path(observed: TokenSequence,
               hypothesis: Sequence[str],
               index: CandidateIndex,
               model: ConfusionModel,
               prior: BigramPrior) -> float:
    """Total log-score of a hypothesis under the beam objective (-inf if impossible)."""
    score = BeamDenoiser(index, model, prior, BeamConfig(1)).score_path(observed, hypothesis)
    return float("-inf") if score is None else score / LOG_SCALE
