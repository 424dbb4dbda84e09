import gradio as gr
import os
from typing import Optional, Tuple

import pandas as pd

os.environ["GRADIO_ANALYTICS_ENABLED"] = "False"

from config import (DEFAULT_EPSILON, DEFAULT_MAX_CHARS, GRADIO_HOST, GRADIO_PORT)
from core.complexity import DEFAULT_SUBSETS, gamma_sweep
from core.corpus import build_vocabulary, corpus_statistics, load_corpus, partition_vocabulary
from core.errors import DenoisingToolkitError
from core.noise import Alphabet, ConfusionModel, load_model, uniform_noise
from core.nodes import BEAM, UNIGRAM
from core.pipeline import PipelineResult, PipelineRunner
from core.reports import eval_frame, stats_frame, sweep_figure, sweep_frame
from core.rng import resolve_seed
from core.state_models import CorruptionMode, Subset


class ComplexityLabUI:
    """UI wrapper over corpus statistics, complexity sweeps and the denoising pipeline."""

    def compute_stats(self, corpus_path: str) -> Tuple[str, pd.DataFrame]:
        if not corpus_path or not corpus_path.strip():
            return self._create_status_html("error", "❌ Error", "Please enter a corpus path"), pd.DataFrame()
        try:
            row = corpus_statistics(os.path.basename(corpus_path.rstrip("/")), load_corpus(corpus_path.strip()))
        except DenoisingToolkitError as e:
            return self._create_status_html("error", "❌ Failed", str(e)), pd.DataFrame()
        return self._create_status_html("success", "✅ Statistics", f"{row.documents} documents loaded"), stats_frame([row])

    def run_sweep(self,
                  corpus_path: str,
                  model_path: str,
                  epsilon: float,
                  gammas_text: str,
                  samples: int,
                  seed: Optional[float]):
        """
        Returns:
            Tuple of (status_html, sweep table, theta-vs-gamma figure)
        """
        try:
            gammas = [float(g) for g in gammas_text.split(",") if g.strip()]
            vocab = build_vocabulary(load_corpus(corpus_path.strip()))
            model = self._model(vocab, model_path, epsilon)
            partition = partition_vocabulary(vocab)
            subsets = [s for s in DEFAULT_SUBSETS if s == Subset.ALL or partition.words(s)]
            resolved = resolve_seed(None if seed is None else int(seed))
            report = gamma_sweep(vocab, model, gammas, subsets, int(samples), resolved,
                                 corpus=os.path.basename(corpus_path.rstrip("/")))
        except (DenoisingToolkitError, ValueError) as e:
            return self._create_status_html("error", "❌ Failed", str(e)), pd.DataFrame(), None
        status = self._create_status_html("success", "✅ Sweep finished",
                                          f"{len(report.rows)} estimates, seed {resolved}")
        return status, sweep_frame(report), sweep_figure(report)

    def run_pipeline(self,
                     corpus_path: str,
                     model_path: str,
                     epsilon: float,
                     gamma: float,
                     mode: str,
                     decoder: str,
                     seed: Optional[float]) -> Tuple[str, str, pd.DataFrame]:
        try:
            docs = load_corpus(corpus_path.strip())
            model = self._model(build_vocabulary(docs), model_path, epsilon)
        except DenoisingToolkitError as e:
            return self._create_status_html("error", "❌ Failed", str(e)), "", pd.DataFrame()

        runner = PipelineRunner(decoder=decoder, max_chars=DEFAULT_MAX_CHARS)
        result = runner.run(docs, model, float(gamma), CorruptionMode(mode),
                            resolve_seed(None if seed is None else int(seed)),
                            corpus_label=os.path.basename(corpus_path.rstrip("/")))
        if not result.success:
            return self._create_status_html("error", "❌ Failed", result.error_message or "Unknown error occurred"), "", pd.DataFrame()
        status = self._create_status_html("success", "✅ Success", "Corpus corrupted, denoised and evaluated")
        return status, self._create_execution_info(result, decoder), eval_frame(result.report)

    def _model(self, vocab, model_path: str, epsilon: float) -> ConfusionModel:
        if model_path and model_path.strip():
            return load_model(model_path.strip())
        return uniform_noise(Alphabet.from_text(vocab.entries), float(epsilon))

    def _create_status_html(self, status_type: str, title: str, message: str) -> str:
        """Create HTML for status display."""
        return f"""
        <div class="status-card status-{status_type}">
            <h3 style="margin: 0 0 10px 0; font-size: 1.3rem; font-weight: 600;">{title}</h3>
            <p style="margin: 0; font-size: 1rem; opacity: 0.95;">{message}</p>
        </div>
        """

    def _create_execution_info(self, result: PipelineResult, decoder: str) -> str:
        """Create pipeline metrics HTML."""
        return f"""
        <div class="metrics-container">
            <div class="metric-card">
                <div class="metric-value">{result.wer("baseline"):.4f}</div>
                <div class="metric-label">Baseline WER</div>
            </div>
            <div class="metric-card">
                <div class="metric-value">{result.wer(decoder):.4f}</div>
                <div class="metric-label">Denoised WER</div>
            </div>
            <div class="metric-card">
                <div class="metric-value">{result.execution_time:.2f}s</div>
                <div class="metric-label">Execution Time</div>
            </div>
        </div>
        """


def load_custom_css() -> str:
    """Load custom CSS styles."""
    return """
    .gradio-container {
        max-width: 1400px !important;
        margin: 0 auto !important;
        background: #f8fafc !important;
        padding: 20px;
    }

    .header-container {
        background: linear-gradient(135deg, #2b6cb0 0%, #2c7a7b 100%) !important;
        border-radius: 20px !important;
        padding: 30px !important;
        margin-bottom: 25px !important;
        text-align: center !important;
    }

    .header-title {
        color: white !important;
        font-size: 2.4rem !important;
        font-weight: 700 !important;
        margin-bottom: 10px !important;
    }

    .header-subtitle {
        color: rgba(255, 255, 255, 0.9) !important;
        font-size: 1.1rem !important;
        margin: 0 !important;
    }

    .status-card {
        border-radius: 15px !important;
        padding: 20px !important;
        margin: 15px 0 !important;
    }

    .status-success {
        background: linear-gradient(135deg, #48bb78 0%, #38a169 100%) !important;
        color: white !important;
    }

    .status-error {
        background: linear-gradient(135deg, #f56565 0%, #e53e3e 100%) !important;
        color: white !important;
    }

    .metrics-container {
        display: flex !important;
        gap: 20px !important;
        flex-wrap: wrap !important;
    }

    .metric-card {
        background: white !important;
        border: 2px solid #e2e8f0 !important;
        border-radius: 15px !important;
        padding: 15px 25px !important;
        text-align: center !important;
        min-width: 150px !important;
    }

    .metric-value {
        font-size: 1.8rem !important;
        font-weight: 700 !important;
        color: #2b6cb0 !important;
    }

    .metric-label {
        font-size: 0.9rem !important;
        color: #718096 !important;
    }
    """


def create_gradio_interface():
    """Create and configure the Gradio interface."""

    ui = ComplexityLabUI()

    with gr.Blocks(css=load_custom_css(), title="Denoising Complexity Lab") as interface:

        gr.HTML("""
        <div class="header-container">
            <h1 class="header-title">Denoising Complexity Lab</h1>
            <p class="header-subtitle">How hard is your corpus to denoise after OCR?</p>
        </div>
        """)

        with gr.Row():
            corpus_path = gr.Textbox(label="Corpus path", placeholder="directory of .txt files or a .jsonl file", scale=3)
            model_path = gr.Textbox(label="Noise model (optional)", placeholder="model.json", scale=2)
            epsilon = gr.Number(label="Uniform epsilon", value=DEFAULT_EPSILON, scale=1)
            seed = gr.Number(label="Seed", value=0, precision=0, scale=1)

        with gr.Tabs():

            with gr.TabItem("Corpus statistics"):
                stats_btn = gr.Button("Compute statistics", variant="primary")
                stats_status = gr.HTML()
                stats_table = gr.Dataframe(interactive=False)

            with gr.TabItem("Complexity sweep"):
                with gr.Row():
                    gammas = gr.Textbox(label="Gamma values", value="0.2,0.4,0.6,0.8,1.0")
                    samples = gr.Number(label="Samples per estimate", value=100000, precision=0)
                sweep_btn = gr.Button("Estimate complexity", variant="primary")
                sweep_status = gr.HTML()
                sweep_plot = gr.Plot()
                sweep_table = gr.Dataframe(interactive=False)

            with gr.TabItem("Denoising pipeline"):
                with gr.Row():
                    gamma = gr.Slider(label="Gamma", minimum=0.0, maximum=1.0, value=1.0, step=0.05)
                    mode = gr.Radio(label="Corruption", choices=[m.value for m in CorruptionMode],
                                    value=CorruptionMode.SUBSTITUTION.value)
                    decoder = gr.Radio(label="Decoder", choices=[UNIGRAM, BEAM], value=UNIGRAM)
                pipeline_btn = gr.Button("Corrupt, denoise and evaluate", variant="primary")
                pipeline_status = gr.HTML()
                pipeline_info = gr.HTML()
                pipeline_table = gr.Dataframe(interactive=False)

        stats_btn.click(fn=ui.compute_stats,
                        inputs=[corpus_path],
                        outputs=[stats_status, stats_table],
                        show_progress=True)

        sweep_btn.click(fn=ui.run_sweep,
                        inputs=[corpus_path, model_path, epsilon, gammas, samples, seed],
                        outputs=[sweep_status, sweep_table, sweep_plot],
                        show_progress=True)

        pipeline_btn.click(fn=ui.run_pipeline,
                           inputs=[corpus_path, model_path, epsilon, gamma, mode, decoder, seed],
                           outputs=[pipeline_status, pipeline_info, pipeline_table],
                           show_progress=True)

    return interface


def launch_app(
    server_name: str = GRADIO_HOST,
    server_port: int = GRADIO_PORT,
    share: bool = False,
    debug: bool = False
):
    """Launch the Gradio application."""

    gr.analytics_enabled = False

    interface = create_gradio_interface()

    print("Starting Denoising Complexity Lab...")
    print(f"Server will be available at: http://{server_name}:{server_port}")

    interface.launch(
        server_name=server_name,
        server_port=server_port,
        share=share,
        debug=debug,
        show_error=True,
        quiet=False
    )
