import logging
from typing import Sequence

from core.corpus import TokenSequence, tokenize
from core.errors import EvaluationError
from core.state_models import EvalReport, EvalRow


logger = logging.getLogger(__name__)

BASELINE = "baseline"


def token_edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Minimal number of token insertions, deletions and substitutions between two sequences."""
    a, b = list(a), list(b)
    if len(a) > len(b):
        a, b = b, a
    distances = list(range(len(a) + 1))
    for i, token_b in enumerate(b):
        current = [i + 1]
        for j, token_a in enumerate(a):
            if token_a == token_b:
                current.append(distances[j])
            else:
                current.append(1 + min(distances[j], distances[j + 1], current[-1]))
        distances = current
    return distances[-1]


def wer(hyp: TokenSequence, ref: TokenSequence) -> float:
    """Non-normalised word error rate: edit distance over reference length (may exceed 1)."""
    if len(ref) == 0:
        raise EvaluationError("Word error rate is undefined for an empty reference")
    return token_edit_distance(hyp, ref) / len(ref)


def baseline_wer(noisy: TokenSequence, ref: TokenSequence) -> float:
    return wer(noisy, ref)


def _row(system: str, hyps: Sequence[TokenSequence], refs: Sequence[TokenSequence], macro: bool) -> EvalRow:
    ops = [token_edit_distance(h, r) for h, r in zip(hyps, refs)]
    ref_tokens = sum(len(r) for r in refs)
    if macro:
        scored = [(o, len(r)) for o, r in zip(ops, refs) if len(r)]
        rate = sum(o / n for o, n in scored) / len(scored) if scored else 0.0
    else:
        rate = sum(ops) / ref_tokens if ref_tokens else 0.0
    return EvalRow(system=system, wer=rate, ref_tokens=ref_tokens, edit_ops=sum(ops))


def evaluate_documents(refs: Sequence[str],
                       noisy: Sequence[str],
                       hyps: Sequence[str],
                       corpus: str = "corpus",
                       system: str = "denoiser",
                       macro: bool = False) -> EvalReport:
    """
    Score document texts against references. Every side is re-tokenised with
    the corpus tokenizer; the baseline row scores the noisy text itself.
    Micro averaging pools edit operations over documents, macro averages
    per-document rates.
    """
    if not (len(refs) == len(noisy) == len(hyps)):
        raise EvaluationError("References, noisy texts and hypotheses must align one-to-one")
    ref_tokens = [tokenize(text) for text in refs]
    if sum(len(r) for r in ref_tokens) == 0:
        raise EvaluationError("Word error rate is undefined for an empty reference corpus")
    noisy_tokens = [tokenize(text) for text in noisy]
    hyp_tokens = [tokenize(text) for text in hyps]
    rows = [_row(BASELINE, noisy_tokens, ref_tokens, macro),
            _row(system, hyp_tokens, ref_tokens, macro)]
    logger.info(f"Evaluated {len(refs)} documents of {corpus}: baseline WER {rows[0].wer:.4f}, "
                f"{system} WER {rows[1].wer:.4f}")
    return EvalReport(corpus=corpus, averaging="macro" if macro else "micro", rows=rows)
