import json
import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from config import DEFAULT_MAX_CHARS
from core.errors import CorpusError, EmptySubsetError
from core.state_models import CorpusStatistics, Document, Subset


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TokenSequence:
    """Ordered tokens of a document or chunk."""
    tokens: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        for token in self.tokens:
            if not token or any(ch.isspace() for ch in token):
                raise ValueError(f"Invalid token {token!r}: tokens are non-empty and contain no whitespace")

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __getitem__(self, item):
        return self.tokens[item]

    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class Vocabulary:
    """Word counts of a corpus; frequencies form the unigram prior p(w)."""
    entries: Dict[str, int] = field(default_factory=dict)
    total: int = field(init=False)

    def __post_init__(self):
        if any(count <= 0 for count in self.entries.values()):
            raise ValueError("Vocabulary counts must be positive")
        object.__setattr__(self, "entries", dict(sorted(self.entries.items())))
        object.__setattr__(self, "total", sum(self.entries.values()))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def count(self, word: str) -> int:
        return self.entries.get(word, 0)

    def frequency(self, word: str) -> float:
        total = self.total
        return self.entries.get(word, 0) / total if total else 0.0

    def characters(self) -> List[str]:
        """Sorted set of characters occurring in vocabulary words."""
        return sorted({ch for word in self.entries for ch in word})


@dataclass(frozen=True)
class VocabPartition:
    numeric: FrozenSet[str]
    alpha: FrozenSet[str]
    other: FrozenSet[str]
    p_numeric: float
    p_alpha: float
    p_other: float

    def words(self, subset: Subset) -> FrozenSet[str]:
        return {Subset.NUMERIC: self.numeric,
                Subset.ALPHA: self.alpha,
                Subset.OTHER: self.other}[subset]

    def mass(self, subset: Subset) -> float:
        if subset == Subset.ALL:
            return 1.0
        return {Subset.NUMERIC: self.p_numeric,
                Subset.ALPHA: self.p_alpha,
                Subset.OTHER: self.p_other}[subset]


def _is_punctuation(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> TokenSequence:
    """
    Split on Unicode whitespace, then peel leading and trailing punctuation
    characters off each piece as one-character tokens. Interior punctuation
    (decimal points, separators, hyphens, slashes) stays attached.
    """
    tokens: List[str] = []
    for piece in text.split():
        start, stop = 0, len(piece)
        while start < stop and _is_punctuation(piece[start]):
            start += 1
        while stop > start and _is_punctuation(piece[stop - 1]):
            stop -= 1
        tokens.extend(piece[:start])
        if start < stop:
            tokens.append(piece[start:stop])
        tokens.extend(piece[stop:])
    return TokenSequence(tuple(tokens))


def is_numeric_word(word: str) -> bool:
    """Contains at least one decimal digit (Unicode category Nd)."""
    return any(unicodedata.category(ch) == "Nd" for ch in word)


def is_alpha_word(word: str) -> bool:
    """Consists solely of letters (Unicode categories L*)."""
    return bool(word) and all(unicodedata.category(ch).startswith("L") for ch in word)


def classify_word(word: str) -> Subset:
    if is_numeric_word(word):
        return Subset.NUMERIC
    if is_alpha_word(word):
        return Subset.ALPHA
    return Subset.OTHER


def _sorted_documents(docs: Iterable[Document]) -> List[Document]:
    return sorted(docs, key=lambda doc: doc.id)


def build_vocabulary(docs: Sequence[Document]) -> Vocabulary:
    counts: Counter = Counter()
    for doc in _sorted_documents(docs):
        counts.update(tokenize(doc.text).tokens)
    return Vocabulary(dict(counts))


def partition_vocabulary(vocab: Vocabulary) -> VocabPartition:
    groups: Dict[Subset, set] = {Subset.NUMERIC: set(), Subset.ALPHA: set(), Subset.OTHER: set()}
    mass: Dict[Subset, int] = {Subset.NUMERIC: 0, Subset.ALPHA: 0, Subset.OTHER: 0}
    for word, count in vocab.entries.items():
        kind = classify_word(word)
        groups[kind].add(word)
        mass[kind] += count

    total = vocab.total
    p_numeric = mass[Subset.NUMERIC] / total if total else 0.0
    p_alpha = mass[Subset.ALPHA] / total if total else 0.0
    p_other = mass[Subset.OTHER] / total if total else 0.0
    return VocabPartition(numeric=frozenset(groups[Subset.NUMERIC]),
                          alpha=frozenset(groups[Subset.ALPHA]),
                          other=frozenset(groups[Subset.OTHER]),
                          p_numeric=p_numeric,
                          p_alpha=p_alpha,
                          p_other=p_other)


class WordSampler:
    """
    Draws words proportionally to their counts, renormalised within a subset.

    Sampling works on exact integer cumulative counts: an integer in
    [0, subset total) is drawn and located by binary search.
    """

    def __init__(self, vocab: Vocabulary, subset: Subset = Subset.ALL):
        if subset == Subset.ALL:
            words = list(vocab.entries)
        else:
            words = [w for w in vocab.entries if classify_word(w) == subset]
        if not words:
            raise EmptySubsetError(f"No vocabulary words in subset '{subset.value}'")
        self.subset = subset
        self.words = words
        self.counts = np.array([vocab.entries[w] for w in words], dtype=np.int64)
        self.cumulative = np.cumsum(self.counts)
        self.total = int(self.cumulative[-1])

    def sample_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        draws = rng.integers(0, self.total, size=size)
        return np.searchsorted(self.cumulative, draws, side="right")

    def sample(self, rng: np.random.Generator) -> str:
        return self.words[int(self.sample_indices(rng, 1)[0])]


def sample_word(vocab: Vocabulary, subset: Subset, rng: np.random.Generator) -> str:
    return WordSampler(vocab, subset).sample(rng)


def chunk_tokens(tokens: Sequence[str], max_chars: int = DEFAULT_MAX_CHARS) -> List[TokenSequence]:
    """Greedy left-to-right packing; a token longer than max_chars gets its own chunk."""
    chunks: List[TokenSequence] = []
    current: List[str] = []
    length = 0
    for token in tokens:
        extended = length + len(token) + (1 if current else 0)
        if current and extended > max_chars:
            chunks.append(TokenSequence(tuple(current)))
            current, length = [], 0
            extended = len(token)
        current.append(token)
        length = extended
    if current:
        chunks.append(TokenSequence(tuple(current)))
    return chunks


def chunk_sequences(docs: Sequence[Document], max_chars: int = DEFAULT_MAX_CHARS) -> List[TokenSequence]:
    chunks: List[TokenSequence] = []
    for doc in _sorted_documents(docs):
        chunks.extend(chunk_tokens(tokenize(doc.text).tokens, max_chars))
    return chunks


def load_corpus(path: str) -> List[Document]:
    """
    Load a corpus from a directory of `.txt` files (id = file name) or from a
    JSONL file of {"id", "text"} objects. Documents are returned sorted by id.
    """
    source = Path(path)
    if source.is_dir():
        docs = []
        for file in sorted(source.glob("*.txt")):
            try:
                docs.append(Document(id=file.name, text=file.read_text(encoding="utf-8")))
            except (OSError, UnicodeDecodeError) as e:
                raise CorpusError(f"Cannot read {file}: {e}") from e
    elif source.is_file():
        docs = []
        try:
            lines = source.read_text(encoding="utf-8").splitlines()
        except (OSError, UnicodeDecodeError) as e:
            raise CorpusError(f"Cannot read {source}: {e}") from e
        for line_number, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                docs.append(Document.model_validate_json(line))
            except ValidationError as e:
                raise CorpusError(f"{source}:{line_number}: malformed document record: {e}") from e
    else:
        raise CorpusError(f"Corpus path {path} does not exist")

    ids = Counter(doc.id for doc in docs)
    duplicates = [doc_id for doc_id, n in ids.items() if n > 1]
    if duplicates:
        raise CorpusError(f"Duplicate document ids in {path}: {sorted(duplicates)[:5]}")
    if not docs:
        logger.warning(f"Corpus {path} contains no documents")
    logger.info(f"Loaded {len(docs)} documents from {path}")
    return _sorted_documents(docs)


def corpus_statistics(label: str, docs: Sequence[Document]) -> CorpusStatistics:
    vocab = build_vocabulary(docs)
    partition = partition_vocabulary(vocab)
    return CorpusStatistics(corpus=label,
                            documents=len(docs),
                            tokens=vocab.total,
                            vocabulary=len(vocab),
                            numeric=len(partition.numeric),
                            alpha=len(partition.alpha),
                            p_numeric=partition.p_numeric,
                            p_alpha=partition.p_alpha,
                            status="ok" if vocab.total else "empty")


def vocabulary_to_json(vocab: Vocabulary) -> str:
    return json.dumps({"total": vocab.total, "entries": vocab.entries},
                      ensure_ascii=False, sort_keys=True, indent=2)


def vocabulary_from_json(payload: str) -> Vocabulary:
    try:
        data = json.loads(payload)
        vocab = Vocabulary({str(w): int(c) for w, c in data["entries"].items()})
    except (ValueError, KeyError, TypeError, AttributeError) as e:
        raise CorpusError(f"Malformed vocabulary: {e}") from e
    if "total" in data and int(data["total"]) != vocab.total:
        raise CorpusError(f"Vocabulary total {data['total']} does not match counts ({vocab.total})")
    return vocab


def save_vocabulary(vocab: Vocabulary, path: str) -> None:
    Path(path).write_text(vocabulary_to_json(vocab) + "\n", encoding="utf-8")
    logger.info(f"Vocabulary of {len(vocab)} words written to {path}")


def load_vocabulary(path: str) -> Vocabulary:
    try:
        payload = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise CorpusError(f"Cannot read vocabulary {path}: {e}") from e
    vocab = vocabulary_from_json(payload)
    logger.info(f"Loaded vocabulary of {len(vocab)} words from {path}")
    return vocab
