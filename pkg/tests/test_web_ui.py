import pytest

pytest.importorskip("gradio")

from web_ui.gradio_app import ComplexityLabUI  # noqa: E402


@pytest.fixture
def ui():
    return ComplexityLabUI()


@pytest.fixture
def corpus(write_jsonl):
    return write_jsonl("toy.jsonl", [("1", "a b a b a 12"), ("2", "b a 7")])


class TestComplexityLabUI:

    def test_stats_needs_a_path(self, ui):
        status, frame = ui.compute_stats("  ")
        assert "status-error" in status
        assert frame.empty

    def test_stats(self, ui, corpus):
        status, frame = ui.compute_stats(corpus)
        assert "status-success" in status
        assert frame.loc[0, "documents"] == 2

    def test_sweep(self, ui, corpus):
        status, frame, figure = ui.run_sweep(corpus, "", 0.2, "0.5,1.0", 2000, 0)
        assert "status-success" in status
        assert set(frame["subset"]) == {"all", "numeric", "alpha"}
        assert figure is not None

    def test_sweep_reports_bad_input(self, ui, corpus):
        status, frame, figure = ui.run_sweep(corpus, "", 0.2, "2.0", 100, 0)
        assert "status-error" in status
        assert figure is None

    def test_pipeline(self, ui, corpus):
        status, info, frame = ui.run_pipeline(corpus, "", 0.07, 0.0, "substitution", "unigram", 1)
        assert "status-success" in status
        assert "Denoised WER" in info
        assert list(frame["wer"]) == [0.0, 0.0]

    def test_pipeline_missing_corpus(self, ui, tmp_path):
        status, _, _ = ui.run_pipeline(str(tmp_path / "missing"), "", 0.07, 1.0, "full", "beam", 0)
        assert "status-error" in status
