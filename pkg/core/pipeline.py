from dataclasses import dataclass, field
from pathlib import Path
import time
from typing import Any, Dict, List, Optional, Sequence

from config import DEFAULT_BACKOFF_WEIGHT, DEFAULT_BEAM_WIDTH, DEFAULT_MAX_CHARS
from core.graph_flow import create_graph_flow
from core.noise import ConfusionModel
from core.nodes import UNIGRAM
from core.reports import write_eval, write_records
from core.state_models import (CorruptionMode, CorruptionRecord, Document,
                               EvalReport, HypothesisRecord, RunConfig)


pipeline_app = create_graph_flow()


@dataclass
class PipelineResult:
    success: bool
    report: Optional[EvalReport] = None
    corruption: List[CorruptionRecord] = field(default_factory=list)
    hypotheses: List[HypothesisRecord] = field(default_factory=list)
    error_message: Optional[str] = None
    completed_nodes: List[str] = field(default_factory=list)
    execution_time: float = 0.0

    def wer(self, system: str) -> Optional[float]:
        if self.report is None:
            return None
        for row in self.report.rows:
            if row.system == system:
                return row.wer
        return None


class PipelineRunner:
    """
    A high-level wrapper for the corrupt -> denoise -> evaluate workflow.

    The runner owns the decoding settings; each call to `run` corrupts a
    corpus with a noise model, denoises it and scores both the noisy
    baseline and the denoiser against the references.
    """

    def __init__(self,
                 decoder: str = UNIGRAM,
                 beam_width: int = DEFAULT_BEAM_WIDTH,
                 backoff_weight: float = DEFAULT_BACKOFF_WEIGHT,
                 max_chars: int = DEFAULT_MAX_CHARS,
                 verbose: bool = False):
        """
        Initialize the PipelineRunner.

        Args:
            decoder: 'unigram' or 'beam'
            beam_width: Beam width for the beam decoder
            backoff_weight: Weight of the bigram estimate in the beam prior
            max_chars: Maximum chunk length in characters
            verbose: Whether to print progress to stdout
        """
        self.decoder = decoder
        self.beam_width = beam_width
        self.backoff_weight = backoff_weight
        self.max_chars = max_chars
        self.verbose = verbose
        self._app = pipeline_app

    def run(self,
            documents: Sequence[Document],
            model: ConfusionModel,
            gamma: float = 1.0,
            mode: CorruptionMode = CorruptionMode.SUBSTITUTION,
            seed: int = 0,
            train_documents: Optional[Sequence[Document]] = None,
            corpus_label: str = "corpus") -> PipelineResult:
        """
        Run the full workflow on one corpus.

        Args:
            documents: Reference documents to corrupt
            model: Base noise model, interpolated to `gamma` for corruption
            gamma: Noise level in [0, 1]
            mode: Corruption mode
            seed: Master seed of the corruption streams
            train_documents: Corpus the decoder priors come from (defaults to `documents`)
            corpus_label: Label written into the report

        Returns:
            PipelineResult containing the report and intermediate records
        """
        start_time = time.time()
        initial_state = {
            "corpus_label": corpus_label,
            "documents": list(documents),
            "train_documents": list(train_documents or []),
            "model_payload": model.to_schema().model_dump(),
            "gamma": gamma,
            "mode": CorruptionMode(mode).value,
            "decoder": self.decoder,
            "beam_width": self.beam_width,
            "backoff_weight": self.backoff_weight,
            "max_chars": self.max_chars,
            "seed": seed,
            "corruption": [],
            "hypotheses": [],
            "report": None,
            "error_message": None
        }

        try:
            final_state, completed = self._run_workflow(initial_state)
        except Exception as e:
            return PipelineResult(success=False,
                                  error_message=f"Workflow execution failed: {e}",
                                  execution_time=time.time() - start_time)

        result = PipelineResult(success=final_state.get("error_message") is None and final_state.get("report") is not None,
                                report=final_state.get("report"),
                                corruption=final_state.get("corruption", []),
                                hypotheses=final_state.get("hypotheses", []),
                                error_message=final_state.get("error_message"),
                                completed_nodes=completed,
                                execution_time=time.time() - start_time)
        if self.verbose:
            self._print_summary(result)
        return result

    def _run_workflow(self, initial_state: Dict[str, Any]):
        """Execute the complete workflow and return the final state and visited nodes."""
        final_state = initial_state.copy()
        completed = []
        for event in self._app.stream(initial_state):
            for node_name, node_data in event.items():
                final_state.update(node_data)
                completed.append(node_name)
                if self.verbose:
                    print(f"✓ Completed: {node_name}")
        return final_state, completed

    def _print_summary(self, result: PipelineResult) -> None:
        print("=" * 60)
        if result.success:
            for row in result.report.rows:
                print(f"{row.system:>10}: WER {row.wer:.4f} ({row.edit_ops} edits / {row.ref_tokens} tokens)")
            print(f"Execution time: {result.execution_time:.2f} seconds")
        else:
            print(f"FAILED: {result.error_message}")

    def save(self, result: PipelineResult, out_dir: str, config: Optional[RunConfig] = None, fmt: str = "csv") -> None:
        """Write corruption, hypothesis and report files of a run into `out_dir`."""
        target = Path(out_dir)
        target.mkdir(parents=True, exist_ok=True)
        write_records(result.corruption, str(target / "corruption.jsonl"), config)
        write_records(result.hypotheses, str(target / "hypotheses.jsonl"), config)
        if result.report is not None:
            report = result.report.model_copy(update={"config": config})
            write_eval(report, str(target / f"eval.{fmt}"), fmt)
