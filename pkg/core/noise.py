import logging
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from core.errors import CorpusError, ModelValidationError
from core.state_models import AlignedPair, ConfusionModelSchema, ConfusionSummary, CorruptionMode, RunConfig


logger = logging.getLogger(__name__)

ROW_TOLERANCE = 1e-9
LOAD_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of characters; `index` maps a character to its position."""
    chars: Tuple[str, ...]
    index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        chars = tuple(self.chars)
        if any(len(ch) != 1 for ch in chars):
            raise ModelValidationError("Alphabet entries must be single characters")
        if len(set(chars)) != len(chars):
            raise ModelValidationError("Alphabet contains duplicate characters")
        object.__setattr__(self, "chars", chars)
        object.__setattr__(self, "index", {ch: i for i, ch in enumerate(chars)})

    @classmethod
    def from_text(cls, symbols: Iterable[str]) -> "Alphabet":
        """Sorted alphabet of every character occurring in `symbols`."""
        return cls(tuple(sorted({ch for s in symbols for ch in s})))

    def __len__(self) -> int:
        return len(self.chars)

    def __contains__(self, ch: str) -> bool:
        return ch in self.index


@dataclass(frozen=True)
class NoiseLevel:
    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ModelValidationError(f"gamma must lie in [0, 1], got {self.gamma}")


@dataclass(frozen=True, eq=False)
class ConfusionModel:
    """
    Character noise model: a row-stochastic substitution matrix,
    sub[i][j] = p(observe chars[j] | true chars[i]), plus insertion and
    deletion probabilities used when corrupting in full mode.
    """
    alphabet: Alphabet
    sub: np.ndarray
    p_insert: float = 0.0
    p_delete: float = 0.0
    insert_dist: Optional[np.ndarray] = None
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        size = len(self.alphabet)
        sub = np.array(self.sub, dtype=np.float64)
        if sub.shape != (size, size):
            raise ModelValidationError(f"Substitution matrix must be {size}x{size}, got {sub.shape}")
        if np.any(sub < 0.0) or np.any(sub > 1.0):
            raise ModelValidationError("Substitution probabilities must lie in [0, 1]")
        if size and np.max(np.abs(sub.sum(axis=1) - 1.0)) > ROW_TOLERANCE:
            raise ModelValidationError("Every substitution row must sum to 1")

        if self.insert_dist is None:
            insert_dist = np.full(size, 1.0 / size) if size else np.zeros(0)
        else:
            insert_dist = np.array(self.insert_dist, dtype=np.float64)
        if insert_dist.shape != (size,):
            raise ModelValidationError("insert_dist must have one entry per alphabet character")
        if size and (np.any(insert_dist < 0.0) or abs(insert_dist.sum() - 1.0) > ROW_TOLERANCE):
            raise ModelValidationError("insert_dist must be a probability vector")

        if not (0.0 <= self.p_insert <= 1.0 and 0.0 <= self.p_delete <= 1.0):
            raise ModelValidationError("Insertion and deletion probabilities must lie in [0, 1]")
        if self.p_insert + self.p_delete > 1.0 + ROW_TOLERANCE:
            raise ModelValidationError("p_insert + p_delete must not exceed 1")

        sub.setflags(write=False)
        insert_dist.setflags(write=False)
        cumulative = np.cumsum(sub, axis=1)
        if size:
            cumulative[:, -1] = 1.0
        cumulative.setflags(write=False)
        object.__setattr__(self, "sub", sub)
        object.__setattr__(self, "insert_dist", insert_dist)
        object.__setattr__(self, "p_insert", float(self.p_insert))
        object.__setattr__(self, "p_delete", float(self.p_delete))
        object.__setattr__(self, "cumulative", cumulative)

    def to_schema(self) -> ConfusionModelSchema:
        return ConfusionModelSchema(alphabet=list(self.alphabet.chars),
                                    sub=self.sub.tolist(),
                                    p_insert=self.p_insert,
                                    p_delete=self.p_delete,
                                    insert_dist=self.insert_dist.tolist())

    @classmethod
    def from_schema(cls, schema: ConfusionModelSchema) -> "ConfusionModel":
        sub = np.array(schema.sub, dtype=np.float64)
        sums = sub.sum(axis=1)
        if sub.size and np.max(np.abs(sums - 1.0)) > LOAD_TOLERANCE:
            worst = int(np.argmax(np.abs(sums - 1.0)))
            raise ModelValidationError(
                f"Row for {schema.alphabet[worst]!r} sums to {sums[worst]:.8f}, expected 1")
        insert_dist = np.array(schema.insert_dist, dtype=np.float64)
        if insert_dist.size and abs(insert_dist.sum() - 1.0) > LOAD_TOLERANCE:
            raise ModelValidationError("insert_dist must sum to 1")
        return cls(alphabet=Alphabet(tuple(schema.alphabet)),
                   sub=sub / sums[:, None] if sub.size else sub,
                   p_insert=schema.p_insert,
                   p_delete=schema.p_delete,
                   insert_dist=insert_dist / insert_dist.sum() if insert_dist.size else insert_dist)


def save_model(model: ConfusionModel, path: str, config: Optional[RunConfig] = None) -> None:
    schema = model.to_schema()
    schema.config = config
    Path(path).write_text(schema.model_dump_json(indent=2, exclude_none=True), encoding="utf-8")
    logger.info(f"Noise model with {len(model.alphabet)} characters written to {path}")


def load_model(path: str) -> ConfusionModel:
    try:
        payload = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ModelValidationError(f"Cannot read noise model {path}: {e}") from e
    try:
        schema = ConfusionModelSchema.model_validate_json(payload)
    except ValidationError as e:
        raise ModelValidationError(f"Malformed noise model {path}: {e}") from e
    return ConfusionModel.from_schema(schema)


def uniform_noise(alphabet: Alphabet,
                  epsilon: float,
                  p_insert: float = 0.0,
                  p_delete: float = 0.0) -> ConfusionModel:
    """Keep a character with probability 1 - epsilon, else replace it uniformly."""
    size = len(alphabet)
    if size < 2:
        raise ModelValidationError(f"Uniform noise needs at least 2 characters, got {size}")
    if not 0.0 <= epsilon < 1.0:
        raise ModelValidationError(f"epsilon must lie in [0, 1), got {epsilon}")
    sub = np.full((size, size), epsilon / (size - 1))
    np.fill_diagonal(sub, 1.0 - epsilon)
    return ConfusionModel(alphabet, sub, p_insert=p_insert, p_delete=p_delete)


def interpolate(model: ConfusionModel, level: Union[NoiseLevel, float]) -> ConfusionModel:
    """Blend the model with the noiseless channel: gamma * M + (1 - gamma) * I."""
    if not isinstance(level, NoiseLevel):
        level = NoiseLevel(float(level))
    gamma = level.gamma
    size = len(model.alphabet)
    sub = gamma * model.sub + (1.0 - gamma) * np.eye(size)
    return ConfusionModel(model.alphabet,
                          sub,
                          p_insert=gamma * model.p_insert,
                          p_delete=gamma * model.p_delete,
                          insert_dist=model.insert_dist)


# Alignment and estimation

MATCH, SUBSTITUTE, DELETE, INSERT = "match", "substitute", "delete", "insert"


@dataclass(frozen=True)
class EditOp:
    op: str
    gt: Optional[str]
    ocr: Optional[str]


def align(gt: str, ocr: str) -> List[EditOp]:
    """
    Minimal unit-cost edit script turning `gt` into `ocr`. The backtrace
    prefers match, then substitution, then deletion, then insertion.
    """
    n, m = len(gt), len(ocr)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        g = gt[i - 1]
        for j in range(1, m + 1):
            cost = 0 if g == ocr[j - 1] else 1
            row[j] = min(prev[j - 1] + cost, prev[j] + 1, row[j - 1] + 1)

    ops: List[EditOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        here = dist[i][j]
        if i > 0 and j > 0 and gt[i - 1] == ocr[j - 1] and dist[i - 1][j - 1] == here:
            ops.append(EditOp(MATCH, gt[i - 1], ocr[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and gt[i - 1] != ocr[j - 1] and dist[i - 1][j - 1] + 1 == here:
            ops.append(EditOp(SUBSTITUTE, gt[i - 1], ocr[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and dist[i - 1][j] + 1 == here:
            ops.append(EditOp(DELETE, gt[i - 1], None))
            i -= 1
        else:
            ops.append(EditOp(INSERT, None, ocr[j - 1]))
            j -= 1
    ops.reverse()
    return ops


@dataclass
class AlignmentCounts:
    substitutions: Dict[Tuple[str, str], int] = field(default_factory=dict)
    deletions: Dict[str, int] = field(default_factory=dict)
    insertions: Dict[str, int] = field(default_factory=dict)
    gt_chars: int = 0

    def add(self, ops: Iterable[EditOp]) -> None:
        for op in ops:
            if op.op in (MATCH, SUBSTITUTE):
                key = (op.gt, op.ocr)
                self.substitutions[key] = self.substitutions.get(key, 0) + 1
                self.gt_chars += 1
            elif op.op == DELETE:
                self.deletions[op.gt] = self.deletions.get(op.gt, 0) + 1
                self.gt_chars += 1
            else:
                self.insertions[op.ocr] = self.insertions.get(op.ocr, 0) + 1


def estimate_from_aligned(pairs: Sequence[Tuple[str, str]], smoothing: float = 0.1) -> ConfusionModel:
    """Estimate a confusion model from ground-truth / OCR string pairs."""
    if not pairs:
        raise ModelValidationError("Cannot estimate a noise model from an empty pair list")
    if smoothing < 0:
        raise ModelValidationError(f"smoothing must be non-negative, got {smoothing}")

    counts = AlignmentCounts()
    for gt, ocr in pairs:
        counts.add(align(gt, ocr))
    if counts.gt_chars == 0:
        raise ModelValidationError("Aligned pairs contain no ground-truth characters")

    alphabet = Alphabet.from_text(s for pair in pairs for s in pair)
    size = len(alphabet)
    matrix = np.zeros((size, size))
    for (g, o), n in counts.substitutions.items():
        matrix[alphabet.index[g], alphabet.index[o]] += n

    sub = matrix + smoothing
    totals = sub.sum(axis=1)
    unseen = totals == 0
    if np.any(unseen):
        logger.warning(f"{int(unseen.sum())} characters never observed on the ground-truth side; "
                       f"using identity rows for them")
        sub[unseen] = np.eye(size)[unseen]
        totals[unseen] = 1.0
    sub = sub / totals[:, None]

    inserted = np.zeros(size)
    for ch, n in counts.insertions.items():
        inserted[alphabet.index[ch]] += n
    inserted += smoothing
    insert_dist = inserted / inserted.sum() if inserted.sum() > 0 else np.full(size, 1.0 / size)

    n_deleted = sum(counts.deletions.values())
    n_inserted = sum(counts.insertions.values())
    p_delete = n_deleted / counts.gt_chars
    # one insertion opportunity before each word and after every emitted character
    chances = counts.gt_chars - n_deleted + len(pairs)
    p_insert = n_inserted / chances
    if p_insert > 1.0 - p_delete:
        logger.warning(f"Insertion rate {p_insert:.4f} leaves no room for deletion rate {p_delete:.4f}; "
                       f"capping it at {1.0 - p_delete:.4f}")
        p_insert = 1.0 - p_delete
    logger.info(f"Estimated noise model from {len(pairs)} pairs, {counts.gt_chars} ground-truth characters, "
                f"{n_deleted} deletions, {n_inserted} insertions")
    return ConfusionModel(alphabet,
                          sub,
                          p_insert=p_insert,
                          p_delete=p_delete,
                          insert_dist=insert_dist)


def load_aligned_pairs(path: str) -> List[Tuple[str, str]]:
    pairs = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise CorpusError(f"Cannot read aligned pairs {path}: {e}") from e
    for line_number, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            record = AlignedPair.model_validate_json(line)
        except ValidationError as e:
            raise CorpusError(f"{path}:{line_number}: malformed pair record: {e}") from e
        pairs.append((record.gt, record.ocr))
    return pairs


# Likelihood and corruption

def word_likelihood(o: str, w: str, model: ConfusionModel) -> float:
    """p(o | w) as the product of per-character substitution probabilities."""
    if len(o) != len(w):
        return 0.0
    index = model.alphabet.index
    probability = 1.0
    for true_ch, seen_ch in zip(w, o):
        i, j = index.get(true_ch), index.get(seen_ch)
        if i is None or j is None:
            return 0.0
        probability *= model.sub[i, j]
    return float(probability)


def _draw(cumulative_row: np.ndarray, u: float) -> int:
    return int(np.searchsorted(cumulative_row, u, side="right"))


def corrupt_word(w: str,
                 model: ConfusionModel,
                 mode: CorruptionMode,
                 rng: np.random.Generator) -> str:
    """
    Apply the noise model to one word. Characters outside the alphabet pass
    through unchanged. In full mode every position may be deleted, and one
    insertion opportunity precedes the word and follows every emitted character.
    """
    chars = model.alphabet.chars
    index = model.alphabet.index
    if mode == CorruptionMode.SUBSTITUTION:
        draws = rng.random(len(w))
        return "".join(chars[_draw(model.cumulative[index[ch]], u)] if ch in index else ch
                       for ch, u in zip(w, draws))

    insert_cumulative = np.cumsum(model.insert_dist)
    insert_cumulative[-1] = 1.0
    out: List[str] = []

    def maybe_insert():
        if rng.random() < model.p_insert:
            out.append(chars[_draw(insert_cumulative, rng.random())])

    maybe_insert()
    for ch in w:
        if ch not in index:
            out.append(ch)
        elif rng.random() < model.p_delete:
            continue
        else:
            out.append(chars[_draw(model.cumulative[index[ch]], rng.random())])
        maybe_insert()
    return "".join(out)


def corrupt_codes(codes: np.ndarray, cumulative: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Substitution-only corruption of a batch of encoded words of equal length
    (shape samples x length), drawing one uniform per character.
    """
    draws = rng.random(codes.shape)
    noisy = np.empty_like(codes)
    for position in range(codes.shape[1]):
        rows = cumulative[codes[:, position]]
        noisy[:, position] = (rows <= draws[:, position, None]).sum(axis=1)
    return noisy


def describe_model(model: ConfusionModel, char_counts: Optional[Mapping[str, int]] = None) -> ConfusionSummary:
    """Average confusion probability (1 - diagonal), overall and on digits."""
    confusion = 1.0 - np.diag(model.sub)
    chars = model.alphabet.chars
    digits = np.array([unicodedata.category(ch) == "Nd" for ch in chars], dtype=bool)
    weights = None
    if char_counts is not None:
        weights = np.array([char_counts.get(ch, 0) for ch in chars], dtype=np.float64)

    def weighted(mask: np.ndarray) -> Optional[float]:
        if weights is None or weights[mask].sum() == 0:
            return None
        return float(np.average(confusion[mask], weights=weights[mask]))

    everything = np.ones(len(chars), dtype=bool)
    return ConfusionSummary(mean_confusion=float(confusion.mean()) if len(chars) else 0.0,
                            weighted_confusion=weighted(everything),
                            digit_mean_confusion=float(confusion[digits].mean()) if digits.any() else None,
                            digit_weighted_confusion=weighted(digits) if digits.any() else None,
                            p_insert=model.p_insert,
                            p_delete=model.p_delete)
