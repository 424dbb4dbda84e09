import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import DEFAULT_SHARDS, DEFAULT_WORKERS, EXHAUSTIVE_TERM_LIMIT, MC_BLOCK_SIZE
from core.channel import UnigramDenoiser, build_candidate_index
from core.corpus import Vocabulary, WordSampler, classify_word
from core.errors import EnumerationLimitError, SamplingError
from core.noise import ConfusionModel, corrupt_codes, interpolate
from core.rng import block_generator, block_sizes, shard_plan
from core.state_models import ComplexityEstimate, Subset, SweepReport


logger = logging.getLogger(__name__)

DEFAULT_GAMMAS = [round(0.1 * k, 1) for k in range(1, 11)]
DEFAULT_SUBSETS = [Subset.ALL, Subset.NUMERIC, Subset.ALPHA]


@dataclass(frozen=True, eq=False)
class _SampleSpace:
    """Everything a worker needs to simulate blocks of (w, o) pairs."""
    sampler: WordSampler
    denoiser: UnigramDenoiser
    corruption: np.ndarray
    lengths: np.ndarray
    rows: np.ndarray
    codes_by_length: Dict[int, np.ndarray]
    positions_by_length: Dict[int, np.ndarray]
    vocab_keys: Dict[int, set]


def _sample_space(vocab: Vocabulary, model: ConfusionModel, subset: Subset) -> _SampleSpace:
    sampler = WordSampler(vocab, subset)
    denoiser = UnigramDenoiser(build_candidate_index(vocab), model)

    # Unknown characters never change under corruption.
    size = len(model.alphabet)
    corruption = np.zeros((size + 1, size + 1))
    corruption[:size, :size] = model.cumulative
    corruption[:size, size] = 1.0
    corruption[size, size:] = 1.0

    lengths = np.array([len(w) for w in sampler.words], dtype=np.int64)
    rows = np.zeros(len(sampler.words), dtype=np.int64)
    grouped: Dict[int, List[np.ndarray]] = {}
    positions: Dict[int, List[int]] = {}
    for i, word in enumerate(sampler.words):
        group = grouped.setdefault(len(word), [])
        rows[i] = len(group)
        group.append(denoiser.encode(word))
        positions.setdefault(len(word), []).append(denoiser.buckets[len(word)].position[word])

    vocab_keys = {}
    for length, bucket in denoiser.buckets.items():
        known = ~np.any(bucket.codes == denoiser.unknown_code, axis=1)
        vocab_keys[length] = {row.tobytes() for row in bucket.codes[known]}

    return _SampleSpace(sampler=sampler,
                        denoiser=denoiser,
                        corruption=corruption,
                        lengths=lengths,
                        rows=rows,
                        codes_by_length={L: np.array(g, dtype=np.int64).reshape(len(g), L) for L, g in grouped.items()},
                        positions_by_length={L: np.array(p, dtype=np.int64) for L, p in positions.items()},
                        vocab_keys=vocab_keys)


def _simulate_block(space: _SampleSpace, rng: np.random.Generator, size: int) -> Tuple[int, int]:
    """Errors and real-word errors among `size` simulated samples."""
    drawn = space.sampler.sample_indices(rng, size)
    errors = real_word = 0
    drawn_lengths = space.lengths[drawn]
    for length in np.unique(drawn_lengths):
        length = int(length)
        selected = drawn[drawn_lengths == length]
        rows = space.rows[selected]
        truth = space.codes_by_length[length][rows]
        truth_positions = space.positions_by_length[length][rows]
        observed = corrupt_codes(truth, space.corruption, rng)

        unique, inverse = np.unique(observed, axis=0, return_inverse=True)
        decoded = space.denoiser.decode_codes(length, unique)[inverse.reshape(-1)]
        changed = np.any(observed != truth, axis=1)
        wrong = np.where(decoded >= 0, decoded != truth_positions, changed)

        errors += int(wrong.sum())
        keys = space.vocab_keys.get(length, set())
        real_word += sum(1 for row in observed[wrong] if row.tobytes() in keys)
    return errors, real_word


def _simulate_shard(space: _SampleSpace,
                    seed: int,
                    stream_slot: int,
                    sizes: Sequence[int],
                    first_block: int) -> Tuple[int, int]:
    errors = real_word = 0
    for offset, size in enumerate(sizes):
        rng = block_generator(seed, stream_slot, first_block + offset)
        e, r = _simulate_block(space, rng, size)
        errors += e
        real_word += r
    logger.debug(f"Shard starting at block {first_block}: {errors} errors in {sum(sizes)} samples")
    return errors, real_word


def estimate_theta(vocab: Vocabulary,
                   model: ConfusionModel,
                   subset: Subset = Subset.ALL,
                   n_samples: int = 10 ** 6,
                   seed: int = 0,
                   *,
                   gamma: float = 1.0,
                   shards: int = DEFAULT_SHARDS,
                   workers: int = DEFAULT_WORKERS,
                   block_size: int = MC_BLOCK_SIZE,
                   stream_slot: int = 0) -> ComplexityEstimate:
    """
    Monte Carlo estimate of the denoising complexity: the error rate of the
    optimal unigram decoder over the whole vocabulary when w is drawn from the
    (subset-renormalised) prior and o from the substitution channel.
    """
    if n_samples < 1:
        raise SamplingError(f"n_samples must be at least 1, got {n_samples}")
    space = _sample_space(vocab, model, subset)

    sizes = block_sizes(n_samples, block_size)
    plan = shard_plan(len(sizes), shards)
    jobs = [(space, seed, stream_slot, sizes[start:stop], start) for start, stop in plan]

    started = time.perf_counter()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate_shard, *zip(*jobs)))
    else:
        results = [_simulate_shard(*job) for job in jobs]
    elapsed = time.perf_counter() - started

    errors = sum(e for e, _ in results)
    real_word = sum(r for _, r in results)
    theta = errors / n_samples
    logger.info(f"Estimated theta={theta:.5f} (subset={subset.value}, gamma={gamma}, n={n_samples}, "
                f"shards={len(jobs)}) at {n_samples / max(elapsed, 1e-9):,.0f} samples/s")
    return ComplexityEstimate(theta=theta,
                              std_error=math.sqrt(theta * (1.0 - theta) / n_samples),
                              n_samples=n_samples,
                              gamma=gamma,
                              subset=subset,
                              seed=seed,
                              real_word_share=real_word / errors if errors else 0.0)


def _outcomes(codes: np.ndarray, size: int, unknown: int) -> np.ndarray:
    choices = [np.array([unknown]) if c == unknown else np.arange(size) for c in codes]
    return np.array(list(itertools.product(*choices)), dtype=np.int64).reshape(-1, len(codes))


def exhaustive_theta(vocab: Vocabulary,
                     model: ConfusionModel,
                     subset: Subset = Subset.ALL,
                     term_limit: int = EXHAUSTIVE_TERM_LIMIT) -> float:
    """Exact complexity by enumerating every observation of every subset word."""
    sampler = WordSampler(vocab, subset)
    denoiser = UnigramDenoiser(build_candidate_index(vocab), model)
    size = len(model.alphabet)
    unknown = denoiser.unknown_code

    encoded = [denoiser.encode(word) for word in sampler.words]
    terms = sum(size ** int(np.sum(codes != unknown)) for codes in encoded)
    if terms > term_limit:
        raise EnumerationLimitError(f"Exhaustive enumeration needs {terms} terms, limit is {term_limit}")

    channel = np.zeros((size + 1, size + 1))
    channel[:size, :size] = model.sub
    channel[unknown, unknown] = 1.0

    decoded_cache: Dict[Tuple[int, bytes], Tuple[np.ndarray, np.ndarray]] = {}
    theta = 0.0
    for word, codes, count in zip(sampler.words, encoded, sampler.counts):
        pattern = (len(codes), (codes == unknown).tobytes())
        if pattern not in decoded_cache:
            outcomes = _outcomes(codes, size, unknown)
            decoded_cache[pattern] = (outcomes, denoiser.decode_codes(len(codes), outcomes))
        outcomes, decoded = decoded_cache[pattern]

        likelihood = np.ones(outcomes.shape[0])
        for position, true_code in enumerate(codes):
            likelihood *= channel[true_code, outcomes[:, position]]
        target = denoiser.buckets[len(word)].position[word]
        changed = np.any(outcomes != codes, axis=1)
        wrong = np.where(decoded >= 0, decoded != target, changed)
        theta += (count / sampler.total) * float(likelihood[wrong].sum())
    return theta


def subset_masses(vocab: Vocabulary) -> Dict[Subset, float]:
    masses = {Subset.NUMERIC: 0, Subset.ALPHA: 0, Subset.OTHER: 0}
    for word, count in vocab.entries.items():
        masses[classify_word(word)] += count
    return {subset: mass / vocab.total for subset, mass in masses.items()}


def gamma_sweep(vocab: Vocabulary,
                base_model: ConfusionModel,
                gammas: Sequence[float] = DEFAULT_GAMMAS,
                subsets: Sequence[Subset] = DEFAULT_SUBSETS,
                n_samples: int = 10 ** 6,
                seed: int = 0,
                *,
                corpus: str = "corpus",
                model_label: str = "model",
                shards: int = DEFAULT_SHARDS,
                workers: int = DEFAULT_WORKERS,
                block_size: int = MC_BLOCK_SIZE,
                common_random_numbers: bool = False) -> SweepReport:
    """
    One estimate per (gamma, subset) on the interpolated model. Each pair gets
    its own random stream unless `common_random_numbers` reuses one stream per
    subset across the gamma grid.
    """
    grid = sorted(set(float(g) for g in gammas))
    rows: List[ComplexityEstimate] = []
    for subset_slot, subset in enumerate(subsets):
        for gamma_slot, gamma in enumerate(grid):
            stream_slot = 1 + subset_slot if common_random_numbers else 1 + subset_slot + 16 * (gamma_slot + 1)
            rows.append(estimate_theta(vocab,
                                       interpolate(base_model, gamma),
                                       subset,
                                       n_samples,
                                       seed,
                                       gamma=gamma,
                                       shards=shards,
                                       workers=workers,
                                       block_size=block_size,
                                       stream_slot=stream_slot))
    return SweepReport(corpus=corpus, model=model_label, rows=rows)


def report_theta(report: SweepReport, subset: Subset, gamma: float) -> Optional[ComplexityEstimate]:
    for row in report.rows:
        if row.subset == subset and math.isclose(row.gamma, gamma):
            return row
    return None
