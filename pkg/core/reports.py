"""
Report files. Every file carries the resolved RunConfig of the run that made it:
CSV files as a leading `# run_config: {...}` comment line, JSON files under a
`config` key, JSONL files as a first `{"run_config": {...}}` record.
"""
import json
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Type, TypeVar

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd
from pydantic import BaseModel, ValidationError

from core.errors import CorpusError
from core.state_models import CorpusStatistics, EvalReport, RunConfig, SweepReport


logger = logging.getLogger(__name__)

CONFIG_PREFIX = "# run_config: "
SWEEP_COLUMNS = ["corpus", "model", "subset", "gamma", "theta", "std_error", "n_samples", "seed"]
EVAL_COLUMNS = ["corpus", "system", "wer", "ref_tokens", "edit_ops"]
STATS_COLUMNS = ["corpus", "documents", "tokens", "vocabulary", "numeric", "alpha", "p_numeric", "p_alpha", "status"]

Record = TypeVar("Record", bound=BaseModel)


def _config_line(config: Optional[RunConfig]) -> str:
    if config is None:
        return ""
    return CONFIG_PREFIX + config.model_dump_json() + "\n"


def _write_frame(frame: pd.DataFrame, path: str, config: Optional[RunConfig]) -> None:
    body = frame.to_csv(index=False, lineterminator="\n")
    Path(path).write_text(_config_line(config) + body, encoding="utf-8")


def _write_json(payload: dict, path: str) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def sweep_frame(report: SweepReport) -> pd.DataFrame:
    return pd.DataFrame([{"corpus": report.corpus,
                          "model": report.model,
                          "subset": row.subset.value,
                          "gamma": row.gamma,
                          "theta": row.theta,
                          "std_error": row.std_error,
                          "n_samples": row.n_samples,
                          "seed": row.seed} for row in report.rows], columns=SWEEP_COLUMNS)


def write_sweep(report: SweepReport, path: str, fmt: str = "csv") -> None:
    if fmt == "json":
        _write_json(report.model_dump(mode="json"), path)
    else:
        _write_frame(sweep_frame(report), path, report.config)
    logger.info(f"Sweep report with {len(report.rows)} rows written to {path}")


def sweep_figure(report: SweepReport):
    """Line chart of theta against gamma, one line per subset."""
    fig, ax = plt.subplots(figsize=(8, 5), dpi=100)
    subsets = []
    for row in report.rows:
        if row.subset not in subsets:
            subsets.append(row.subset)
    for subset in subsets:
        rows = [row for row in report.rows if row.subset == subset]
        ax.plot([row.gamma for row in rows], [row.theta for row in rows], marker="o", label=subset.value)
    ax.set_xlabel("γ")
    ax.set_ylabel("θ")
    ax.set_title(f"{report.corpus} / {report.model}")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return fig


def write_sweep_svg(report: SweepReport, path: str) -> None:
    plt.rcParams["svg.hashsalt"] = "theta-sweep"
    fig = sweep_figure(report)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Sweep chart written to {path}")


def eval_frame(report: EvalReport) -> pd.DataFrame:
    return pd.DataFrame([{"corpus": report.corpus,
                          "system": row.system,
                          "wer": row.wer,
                          "ref_tokens": row.ref_tokens,
                          "edit_ops": row.edit_ops} for row in report.rows], columns=EVAL_COLUMNS)


def write_eval(report: EvalReport, path: str, fmt: str = "csv") -> None:
    if fmt == "json":
        _write_json(report.model_dump(mode="json"), path)
    else:
        _write_frame(eval_frame(report), path, report.config)
    logger.info(f"Evaluation report written to {path}")


def stats_frame(rows: Sequence[CorpusStatistics]) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in rows], columns=STATS_COLUMNS)


def write_stats(rows: Sequence[CorpusStatistics], path: str, fmt: str = "csv",
                config: Optional[RunConfig] = None) -> None:
    if fmt == "json":
        _write_json({"rows": [row.model_dump() for row in rows],
                     "config": config.model_dump(mode="json") if config else None}, path)
    else:
        _write_frame(stats_frame(rows), path, config)
    logger.info(f"Statistics for {len(rows)} corpora written to {path}")


def write_records(records: Iterable[BaseModel], path: str, config: Optional[RunConfig] = None) -> None:
    lines = []
    if config is not None:
        lines.append(json.dumps({"run_config": config.model_dump(mode="json")}, ensure_ascii=False))
    lines.extend(record.model_dump_json() for record in records)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_records(path: str, record_type: Type[Record]) -> List[Record]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise CorpusError(f"Cannot read {path}: {e}") from e
    records = []
    for line_number, line in enumerate(lines, 1):
        if not line.strip() or line.startswith('{"run_config"'):
            continue
        try:
            records.append(record_type.model_validate_json(line))
        except ValidationError as e:
            raise CorpusError(f"{path}:{line_number}: malformed {record_type.__name__} record: {e}") from e
    return records


def read_run_config(path: str) -> RunConfig:
    """Recover the RunConfig embedded in any report written by this module."""
    try:
        text = Path(path).read_text(encoding="utf-8")
        first = text.split("\n", 1)[0]
        if first.startswith(CONFIG_PREFIX):
            return RunConfig.model_validate_json(first[len(CONFIG_PREFIX):])
        if first.startswith('{"run_config"'):
            return RunConfig.model_validate(json.loads(first)["run_config"])
        payload = json.loads(text)
        if isinstance(payload, dict) and payload.get("config"):
            return RunConfig.model_validate(payload["config"])
    except (ValueError, KeyError, TypeError, ValidationError) as e:
        raise CorpusError(f"{path}: malformed run configuration: {e}") from e
    raise CorpusError(f"{path} does not embed a run configuration")
