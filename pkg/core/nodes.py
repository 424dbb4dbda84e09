import logging
from collections import defaultdict
from typing import Dict, List, Sequence, Tuple

from config import DEFAULT_BACKOFF_WEIGHT, DEFAULT_BEAM_WIDTH, DEFAULT_MAX_CHARS
from core.channel import (BeamConfig, BeamDenoiser, UnigramDenoiser,
                          build_bigram_prior, build_candidate_index)
from core.corpus import TokenSequence, build_vocabulary, chunk_tokens, tokenize
from core.errors import DenoisingToolkitError, EvaluationError
from core.metrics import evaluate_documents
from core.noise import ConfusionModel, corrupt_word, interpolate
from core.rng import document_generator
from core.state_models import (ConfusionModelSchema, CorruptionMode, CorruptionRecord,
                               Document, EvalReport, GraphState, HypothesisRecord)


logger = logging.getLogger(__name__)

UNIGRAM = "unigram"
BEAM = "beam"


def corrupt_documents(docs: Sequence[Document],
                      model: ConfusionModel,
                      gamma: float = 1.0,
                      mode: CorruptionMode = CorruptionMode.SUBSTITUTION,
                      seed: int = 0,
                      max_chars: int = DEFAULT_MAX_CHARS) -> List[CorruptionRecord]:
    """
    Chunk every document and corrupt each token with the interpolated model.
    Document i (in id order) draws from its own substream, so the output
    does not depend on how documents are scheduled.
    """
    noisy_model = interpolate(model, gamma)
    records: List[CorruptionRecord] = []
    for doc_index, doc in enumerate(sorted(docs, key=lambda d: d.id)):
        rng = document_generator(seed, doc_index)
        for chunk_index, chunk in enumerate(chunk_tokens(tokenize(doc.text).tokens, max_chars)):
            noisy = " ".join(corrupt_word(token, noisy_model, mode, rng) for token in chunk)
            records.append(CorruptionRecord(id=doc.id, chunk_index=chunk_index, ref=chunk.text(), noisy=noisy))
    logger.info(f"Corrupted {len(docs)} documents into {len(records)} chunks (gamma={gamma}, mode={mode.value})")
    return records


def _observed(record: CorruptionRecord) -> TokenSequence:
    # Tokens deleted entirely in full mode leave no observation.
    return TokenSequence(tuple(record.noisy.split()))


def denoise_records(records: Sequence[CorruptionRecord],
                    train_docs: Sequence[Document],
                    model: ConfusionModel,
                    decoder: str = UNIGRAM,
                    beam_width: int = DEFAULT_BEAM_WIDTH,
                    backoff_weight: float = DEFAULT_BACKOFF_WEIGHT) -> List[HypothesisRecord]:
    """Denoise every noisy chunk with priors built from the training documents."""
    if not train_docs:
        raise DenoisingToolkitError("Denoising needs a non-empty training corpus for its vocabulary")
    vocab = build_vocabulary(train_docs)
    index = build_candidate_index(vocab)

    if decoder == UNIGRAM:
        unigram = UnigramDenoiser(index, model)

        def decode(seq: TokenSequence) -> Tuple[str, ...]:
            return tuple(unigram.denoise(token) for token in seq)
    elif decoder == BEAM:
        beam = BeamDenoiser(index, model, build_bigram_prior(train_docs, backoff_weight), BeamConfig(beam_width))

        def decode(seq: TokenSequence) -> Tuple[str, ...]:
            return beam.search(seq).tokens
    else:
        raise DenoisingToolkitError(f"Unknown decoder {decoder!r}, expected '{UNIGRAM}' or '{BEAM}'")

    hypotheses = [HypothesisRecord(id=record.id,
                                   chunk_index=record.chunk_index,
                                   hyp=" ".join(decode(_observed(record))))
                  for record in records]
    logger.info(f"Denoised {len(hypotheses)} chunks with the {decoder} decoder (|V|={len(vocab)})")
    return hypotheses


def _documents(records, field_name: str) -> Dict[str, List[Tuple[int, str]]]:
    grouped: Dict[str, List[Tuple[int, str]]] = defaultdict(list)
    for record in records:
        grouped[record.id].append((record.chunk_index, getattr(record, field_name)))
    return grouped


def evaluate_records(corruption: Sequence[CorruptionRecord],
                     hypotheses: Sequence[HypothesisRecord],
                     corpus: str = "corpus",
                     system: str = "denoiser",
                     macro: bool = False) -> EvalReport:
    """Join hypotheses to their chunks on (id, chunk_index) and score whole documents."""
    expected = {(r.id, r.chunk_index) for r in corruption}
    produced = {(h.id, h.chunk_index) for h in hypotheses}
    if len(produced) != len(hypotheses):
        raise EvaluationError("Hypothesis file repeats an (id, chunk_index) pair")
    if expected != produced:
        missing = sorted(expected - produced)[:5]
        extra = sorted(produced - expected)[:5]
        raise EvaluationError(f"Hypotheses do not match the corruption file (missing {missing}, unmatched {extra})")

    refs, noisy, hyps = _documents(corruption, "ref"), _documents(corruption, "noisy"), _documents(hypotheses, "hyp")
    ids = sorted(refs)

    def joined(grouped, doc_id):
        return " ".join(text for _, text in sorted(grouped[doc_id]))

    return evaluate_documents([joined(refs, i) for i in ids],
                              [joined(noisy, i) for i in ids],
                              [joined(hyps, i) for i in ids],
                              corpus=corpus, system=system, macro=macro)


def corrupt_corpus(state: GraphState) -> GraphState:
    """Corrupts the reference documents with the configured noise model."""
    logger.info("NODE: corrupt_corpus")
    try:
        model = ConfusionModel.from_schema(ConfusionModelSchema.model_validate(state["model_payload"]))
        records = corrupt_documents(state["documents"],
                                    model,
                                    gamma=state["gamma"],
                                    mode=CorruptionMode(state["mode"]),
                                    seed=state["seed"],
                                    max_chars=state["max_chars"])
    except (DenoisingToolkitError, ValueError) as e:
        logger.error(f"Corruption failed: {e}")
        return {**state, "error_message": str(e)}
    if not records:
        logger.error("Corpus produced no chunks to corrupt.")
        return {**state, "error_message": "Corpus produced no chunks to corrupt."}
    return {**state, "corruption": records, "error_message": None}


def denoise_corpus(state: GraphState) -> GraphState:
    """Runs the selected decoder over every noisy chunk."""
    logger.info(f"NODE: denoise_corpus ({state['decoder']})")
    train = state.get("train_documents") or state["documents"]
    try:
        model = ConfusionModel.from_schema(ConfusionModelSchema.model_validate(state["model_payload"]))
        hypotheses = denoise_records(state["corruption"],
                                     train,
                                     model,
                                     decoder=state["decoder"],
                                     beam_width=state["beam_width"],
                                     backoff_weight=state["backoff_weight"])
    except (DenoisingToolkitError, ValueError) as e:
        logger.error(f"Denoising failed: {e}")
        return {**state, "error_message": str(e)}
    return {**state, "hypotheses": hypotheses, "error_message": None}


def evaluate_corpus(state: GraphState) -> GraphState:
    """Scores baseline and denoiser output against the references."""
    logger.info("NODE: evaluate_corpus")
    try:
        report = evaluate_records(state["corruption"],
                                  state["hypotheses"],
                                  corpus=state["corpus_label"],
                                  system=state["decoder"])
    except DenoisingToolkitError as e:
        logger.error(f"Evaluation failed: {e}")
        return {**state, "error_message": str(e)}
    return {**state, "report": report, "error_message": None}


def should_continue(state: GraphState) -> str:
    """
    Decides the next step based on the current state. Router node.
    """
    logger.info("ROUTER: should_continue")
    if state.get("error_message"):
        logger.info(f"Conclusion: Error detected ({state['error_message']}). Ending workflow.")
        return "end"
    return "continue"
