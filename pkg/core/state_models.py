from enum import Enum
from typing import Any, Dict, List, Optional, TypedDict

from pydantic import BaseModel, Field, model_validator


class Subset(str, Enum):
    """Vocabulary population a word is sampled from."""
    ALL = "all"
    NUMERIC = "numeric"
    ALPHA = "alpha"
    OTHER = "other"


class CorruptionMode(str, Enum):
    SUBSTITUTION = "substitution"
    FULL = "full"


class Document(BaseModel):
    """Schema for one corpus document."""
    id: str = Field(description="Identifier, unique within a corpus.")
    text: str = Field(description="UTF-8 document text.")


class AlignedPair(BaseModel):
    """Schema for a ground-truth / OCR output line pair."""
    gt: str
    ocr: str


class RunConfig(BaseModel):
    """Resolved configuration of a command run, embedded in every report."""
    command: str
    arguments: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    tool_version: str


class ConfusionModelSchema(BaseModel):
    """Schema for a serialized character noise model."""
    alphabet: List[str] = Field(description="Single-character strings, no duplicates.")
    sub: List[List[float]] = Field(description="Row-stochastic substitution matrix, sub[i][j] = p(observe j | true i).")
    p_insert: float = Field(ge=0.0, le=1.0)
    p_delete: float = Field(ge=0.0, le=1.0)
    insert_dist: List[float] = Field(description="Distribution of inserted characters over the alphabet.")
    config: Optional[RunConfig] = None

    @model_validator(mode="after")
    def check_shapes(self) -> "ConfusionModelSchema":
        size = len(self.alphabet)
        if any(len(ch) != 1 for ch in self.alphabet):
            raise ValueError("alphabet entries must be single characters")
        if len(self.sub) != size or any(len(row) != size for row in self.sub):
            raise ValueError(f"sub must be a {size}x{size} matrix")
        if len(self.insert_dist) != size:
            raise ValueError(f"insert_dist must have {size} entries")
        return self


class CorruptionRecord(BaseModel):
    """One reference chunk and its corrupted rendition."""
    id: str
    chunk_index: int = Field(ge=0)
    ref: str
    noisy: str


class HypothesisRecord(BaseModel):
    """One denoised chunk."""
    id: str
    chunk_index: int = Field(ge=0)
    hyp: str


class CorpusStatistics(BaseModel):
    """Vocabulary statistics of a corpus (documents, |V|, |V#|, |Va|, p(V#), p(Va))."""
    corpus: str
    documents: int = Field(ge=0)
    tokens: int = Field(ge=0)
    vocabulary: int = Field(ge=0)
    numeric: int = Field(ge=0)
    alpha: int = Field(ge=0)
    p_numeric: float = Field(ge=0.0, le=1.0)
    p_alpha: float = Field(ge=0.0, le=1.0)
    status: str = "ok"


class ComplexityEstimate(BaseModel):
    """Denoising complexity of a corpus under one noise level and subset."""
    theta: float = Field(ge=0.0, le=1.0)
    std_error: float = Field(ge=0.0)
    n_samples: int = Field(ge=1)
    gamma: float = Field(ge=0.0, le=1.0)
    subset: Subset
    seed: int
    real_word_share: Optional[float] = Field(
        default=None, ge=0.0, le=1.0,
        description="Fraction of errors whose corrupted observation is itself a vocabulary word.")


class SweepReport(BaseModel):
    """Complexity estimates over a gamma grid and a set of subsets."""
    corpus: str
    model: str
    rows: List[ComplexityEstimate]
    config: Optional[RunConfig] = None

    @model_validator(mode="after")
    def check_grid(self) -> "SweepReport":
        seen = set()
        last_gamma: Dict[Subset, float] = {}
        for row in self.rows:
            key = (row.gamma, row.subset)
            if key in seen:
                raise ValueError(f"duplicate estimate for gamma={row.gamma}, subset={row.subset.value}")
            seen.add(key)
            if row.subset in last_gamma and row.gamma <= last_gamma[row.subset]:
                raise ValueError("gamma values must be strictly increasing per subset")
            last_gamma[row.subset] = row.gamma
        return self


class EvalRow(BaseModel):
    system: str
    wer: float = Field(ge=0.0)
    ref_tokens: int = Field(ge=0)
    edit_ops: int = Field(ge=0)


class EvalReport(BaseModel):
    """Word error rates of the baseline and the denoiser on one corpus."""
    corpus: str
    averaging: str = "micro"
    rows: List[EvalRow]
    config: Optional[RunConfig] = None


class ConfusionSummary(BaseModel):
    """Average confusion probabilities of a model, overall and on digits."""
    mean_confusion: float
    weighted_confusion: Optional[float] = None
    digit_mean_confusion: Optional[float] = None
    digit_weighted_confusion: Optional[float] = None
    p_insert: float
    p_delete: float


class GraphState(TypedDict):
    """Represents the state of the corrupt -> denoise -> evaluate workflow."""
    corpus_label: str
    documents: List[Document]
    train_documents: List[Document]
    model_payload: Dict[str, Any]
    gamma: float
    mode: str
    decoder: str
    beam_width: int
    backoff_weight: float
    max_chars: int
    seed: int
    corruption: List[CorruptionRecord]
    hypotheses: List[HypothesisRecord]
    report: Optional[EvalReport]
    error_message: Optional[str]
