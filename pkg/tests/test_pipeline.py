import math

import numpy as np
import pytest

from conftest import identity_model
from core.errors import DenoisingToolkitError, EvaluationError
from core.metrics import BASELINE
from core.noise import Alphabet, ConfusionModel
from core.nodes import (BEAM, UNIGRAM, corrupt_documents, denoise_records, evaluate_records,
                        should_continue)
from core.pipeline import PipelineRunner
from core.reports import read_records, read_run_config
from core.state_models import (CorruptionMode, CorruptionRecord, Document, HypothesisRecord,
                               RunConfig)


@pytest.fixture
def two_word_corpus():
    return [Document(id="d", text=("a " * 9 + "b ") * 1000)]


class TestPipelineRunner:

    def test_zero_noise_with_identity_model(self):
        docs = [Document(id="1", text="the cat sat on the mat."), Document(id="2", text="12 cats, 3 mats")]
        model = identity_model("".join(d.text for d in docs).replace(" ", ""))
        result = PipelineRunner().run(docs, model, gamma=0.0, seed=1)
        assert result.success
        assert result.wer(BASELINE) == 0.0
        assert result.wer(UNIGRAM) == 0.0
        assert result.completed_nodes == ["corrupt_corpus", "denoise_corpus", "evaluate_corpus"]

    def test_denoiser_beats_baseline(self, two_word_corpus, ab_model):
        result = PipelineRunner().run(two_word_corpus, ab_model, gamma=1.0, seed=7)
        assert result.success
        n_tokens = 10_000
        baseline, system = result.wer(BASELINE), result.wer(UNIGRAM)
        # the prior makes every observation decode to "a"
        assert system == pytest.approx(0.1)
        assert baseline - system >= 5 * math.sqrt(0.2 * 0.8 / n_tokens)

    def test_beam_decoder(self, two_word_corpus, ab_model):
        result = PipelineRunner(decoder=BEAM, beam_width=4).run(two_word_corpus, ab_model, seed=7)
        assert result.success
        assert result.wer(BEAM) < result.wer(BASELINE)

    def test_empty_corpus_stops_after_corruption(self, ab_model):
        result = PipelineRunner().run([], ab_model)
        assert not result.success
        assert result.completed_nodes == ["corrupt_corpus"]
        assert result.error_message

    def test_unknown_decoder_fails(self, ab_model):
        result = PipelineRunner(decoder="trigram").run([Document(id="1", text="a b")], ab_model)
        assert not result.success
        assert "trigram" in result.error_message
        assert result.completed_nodes == ["corrupt_corpus", "denoise_corpus"]

    def test_separate_training_corpus(self, ab_model):
        docs = [Document(id="1", text="b b b")]
        train = [Document(id="t", text="a")]
        result = PipelineRunner().run(docs, ab_model, gamma=0.0, train_documents=train)
        assert result.success
        # the training vocabulary only knows "a"
        assert [h.hyp for h in result.hypotheses] == ["a a a"]
        assert result.wer(UNIGRAM) == 1.0

    def test_save(self, tmp_path, ab_model):
        runner = PipelineRunner()
        result = runner.run([Document(id="1", text="a b a")], ab_model, seed=3)
        config = RunConfig(command="pipeline", arguments={"gamma": 1.0}, seed=3, tool_version="test")
        runner.save(result, str(tmp_path / "run"), config)
        assert read_records(str(tmp_path / "run" / "corruption.jsonl"), CorruptionRecord) == result.corruption
        assert read_records(str(tmp_path / "run" / "hypotheses.jsonl"), HypothesisRecord) == result.hypotheses
        assert read_run_config(str(tmp_path / "run" / "eval.csv")) == config


class TestNodes:

    def test_should_continue(self):
        assert should_continue({"error_message": None}) == "continue"
        assert should_continue({"error_message": "boom"}) == "end"

    def test_corruption_is_deterministic(self, ab_model):
        docs = [Document(id=str(i), text="a b ab ba " * 20) for i in range(3)]
        first = corrupt_documents(docs, ab_model, seed=11)
        assert first == corrupt_documents(docs, ab_model, seed=11)
        assert first != corrupt_documents(docs, ab_model, seed=12)

    def test_document_order_does_not_matter(self, ab_model):
        docs = [Document(id="x", text="a b " * 30), Document(id="y", text="b a " * 30)]
        assert corrupt_documents(docs, ab_model, seed=2) == corrupt_documents(docs[::-1], ab_model, seed=2)

    def test_full_deletion_empties_chunks(self):
        model = ConfusionModel(Alphabet(("a", "b")), np.eye(2), p_insert=0.0, p_delete=1.0)
        records = corrupt_documents([Document(id="1", text="ab ba")], model, mode=CorruptionMode.FULL)
        assert [r.noisy.strip() for r in records] == [""]
        hypotheses = denoise_records(records, [Document(id="t", text="ab")], model)
        assert [h.hyp for h in hypotheses] == [""]

    def test_denoise_needs_training_corpus(self, ab_model):
        records = corrupt_documents([Document(id="1", text="a")], ab_model)
        with pytest.raises(DenoisingToolkitError, match="training corpus"):
            denoise_records(records, [], ab_model)

    def test_evaluate_rejects_unmatched_hypotheses(self):
        corruption = [CorruptionRecord(id="1", chunk_index=0, ref="a b", noisy="a a")]
        with pytest.raises(EvaluationError):
            evaluate_records(corruption, [HypothesisRecord(id="2", chunk_index=0, hyp="a b")])
        with pytest.raises(EvaluationError):
            evaluate_records(corruption, [HypothesisRecord(id="1", chunk_index=0, hyp="a b")] * 2)

    def test_evaluate_joins_chunks_in_order(self):
        corruption = [CorruptionRecord(id="1", chunk_index=1, ref="c", noisy="c"),
                      CorruptionRecord(id="1", chunk_index=0, ref="a b", noisy="a x")]
        hypotheses = [HypothesisRecord(id="1", chunk_index=0, hyp="a b"),
                      HypothesisRecord(id="1", chunk_index=1, hyp="c")]
        report = evaluate_records(corruption, hypotheses, corpus="toy")
        assert report.rows[0].wer == pytest.approx(1 / 3)
        assert report.rows[1].wer == 0.0
