import argparse
import json
import logging
import math
import sys
from collections import Counter
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from pydantic import ValidationError

from config import (DEFAULT_BACKOFF_WEIGHT, DEFAULT_BEAM_WIDTH, DEFAULT_EPSILON,
                    DEFAULT_MAX_CHARS, DEFAULT_P_DELETE, DEFAULT_P_INSERT,
                    DEFAULT_SAMPLES, DEFAULT_SHARDS, DEFAULT_SMOOTHING,
                    DEFAULT_WORKERS, GRADIO_HOST, GRADIO_PORT, LOG_LEVEL, TOOL_VERSION)
from core.complexity import DEFAULT_GAMMAS, DEFAULT_SUBSETS, gamma_sweep
from core.corpus import (Vocabulary, build_vocabulary, corpus_statistics, load_corpus, load_vocabulary,
                         partition_vocabulary, save_vocabulary)
from core.errors import DenoisingToolkitError
from core.nodes import BEAM, UNIGRAM, corrupt_documents, denoise_records, evaluate_records
from core.noise import (Alphabet, ConfusionModel, describe_model, estimate_from_aligned,
                        load_aligned_pairs, load_model, save_model, uniform_noise)
from core.pipeline import PipelineRunner
from core.reports import (read_records, read_run_config, write_eval, write_records,
                          write_stats, write_sweep, write_sweep_svg)
from core.rng import resolve_seed
from core.state_models import CorruptionMode, CorruptionRecord, HypothesisRecord, RunConfig, Subset


logging.basicConfig(level=LOG_LEVEL)
logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# Execution-only arguments and output paths never change results and stay out of RunConfig.
UNRECORDED = {"command", "noise_command", "handler", "seed", "shards", "workers", "out", "svg", "vocab_dir"}


class ToolkitArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_gammas(value: str) -> List[float]:
    """`A:B:STEP` (inclusive, never past B) or a comma separated list, every value in [0, 1]."""
    try:
        if ":" in value:
            start, stop, step = (float(part) for part in value.split(":"))
            if step <= 0:
                raise ValueError
            count = math.floor((stop - start) / step + 1e-9)
            gammas = [round(start + k * step, 10) for k in range(count + 1)]
        else:
            gammas = [float(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid gamma grid {value!r}, expected A:B:STEP or a comma list")
    if not gammas or any(not 0.0 <= g <= 1.0 for g in gammas):
        raise argparse.ArgumentTypeError(f"gamma values must lie in [0, 1], got {value!r}")
    return gammas


def positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}")
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {number}")
    return number


def backoff_weight(value: str) -> float:
    try:
        weight = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {value!r}")
    if not 0.0 < weight < 1.0:
        raise argparse.ArgumentTypeError(f"backoff weight must lie in (0, 1), got {weight}")
    return weight


def _label(path: str) -> str:
    return Path(path).stem or Path(path).name


def _run_config(command: str, args: argparse.Namespace, seed: Optional[int] = None) -> RunConfig:
    arguments = {key: value for key, value in sorted(vars(args).items()) if key not in UNRECORDED}
    return RunConfig(command=command, arguments=arguments, seed=seed, tool_version=TOOL_VERSION)


def _corpus_model(vocab: Vocabulary, args: argparse.Namespace) -> ConfusionModel:
    if getattr(args, "model", None):
        return load_model(args.model)
    return uniform_noise(Alphabet.from_text(vocab.entries), args.epsilon)


def _char_counts(vocab: Vocabulary) -> Dict[str, int]:
    counts: Counter = Counter()
    for word, count in vocab.entries.items():
        for ch in word:
            counts[ch] += count
    return dict(counts)


def cmd_stats(args: argparse.Namespace) -> int:
    rows = []
    for path in args.corpus:
        docs = load_corpus(path)
        rows.append(corpus_statistics(_label(path), docs))
        if args.vocab_dir:
            Path(args.vocab_dir).mkdir(parents=True, exist_ok=True)
            save_vocabulary(build_vocabulary(docs), str(Path(args.vocab_dir) / f"{_label(path)}.vocab.json"))
    for row in rows:
        if row.status != "ok":
            logger.warning(f"Corpus {row.corpus} has no tokens")
        print(f"{row.corpus}: documents={row.documents} |V|={row.vocabulary} |V#|={row.numeric} "
              f"|Va|={row.alpha} p(V#)={row.p_numeric:.3f} p(Va)={row.p_alpha:.3f}")
    if args.out:
        write_stats(rows, args.out, args.format, _run_config("stats", args))
    return EXIT_OK


def cmd_noise_uniform(args: argparse.Namespace) -> int:
    if args.alphabet:
        alphabet = Alphabet.from_text([args.alphabet])
    elif args.corpus:
        alphabet = Alphabet.from_text(build_vocabulary(load_corpus(args.corpus)).entries)
    else:
        raise DenoisingToolkitError("noise uniform needs --corpus or --alphabet")
    model = uniform_noise(alphabet, args.epsilon, p_insert=args.p_insert, p_delete=args.p_delete)
    save_model(model, args.out, _run_config("noise uniform", args))
    print(f"Uniform model over {len(alphabet)} characters, epsilon={args.epsilon}, written to {args.out}")
    return EXIT_OK


def cmd_noise_estimate(args: argparse.Namespace) -> int:
    model = estimate_from_aligned(load_aligned_pairs(args.pairs), args.smoothing)
    if args.p_insert is not None or args.p_delete is not None:
        model = ConfusionModel(model.alphabet,
                               model.sub,
                               p_insert=model.p_insert if args.p_insert is None else args.p_insert,
                               p_delete=model.p_delete if args.p_delete is None else args.p_delete,
                               insert_dist=model.insert_dist)
    save_model(model, args.out, _run_config("noise estimate", args))
    print(f"Estimated model over {len(model.alphabet)} characters "
          f"(p_insert={model.p_insert:.4f}, p_delete={model.p_delete:.4f}) written to {args.out}")
    return EXIT_OK


def cmd_noise_describe(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    counts = _char_counts(build_vocabulary(load_corpus(args.corpus))) if args.corpus else None
    summary = describe_model(model, counts)
    for key, value in summary.model_dump().items():
        print(f"{key}: {'n/a' if value is None else f'{value:.4f}'}")
    if args.out:
        payload = summary.model_dump(mode="json")
        payload["config"] = _run_config("noise describe", args).model_dump(mode="json")
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_complexity(args: argparse.Namespace) -> int:
    seed = resolve_seed(args.seed)
    source = args.corpus or args.vocab
    vocab = build_vocabulary(load_corpus(args.corpus)) if args.corpus else load_vocabulary(args.vocab)
    model = _corpus_model(vocab, args)

    if args.subset:
        subsets = [Subset(s) for s in args.subset]
    else:
        partition = partition_vocabulary(vocab)
        subsets = [s for s in DEFAULT_SUBSETS if s == Subset.ALL or partition.words(s)]
        for skipped in [s for s in DEFAULT_SUBSETS if s not in subsets]:
            logger.warning(f"Subset {skipped.value} is empty in {source}, skipping it")

    report = gamma_sweep(vocab,
                         model,
                         args.gammas,
                         subsets,
                         args.samples,
                         seed,
                         corpus=_label(source),
                         model_label=_label(args.model) if args.model else f"uniform-{args.epsilon}",
                         shards=args.shards,
                         workers=args.workers,
                         common_random_numbers=args.common_random_numbers)
    report = report.model_copy(update={"config": _run_config("complexity", args, seed)})

    for row in report.rows:
        print(f"{row.subset.value:>8} gamma={row.gamma:.2f} theta={row.theta:.5f} ± {row.std_error:.5f}")
    if args.out:
        write_sweep(report, args.out, args.format)
    if args.svg:
        write_sweep_svg(report, args.svg)
    return EXIT_OK


def cmd_corrupt(args: argparse.Namespace) -> int:
    seed = resolve_seed(args.seed)
    docs = load_corpus(args.corpus)
    model = _corpus_model(build_vocabulary(docs), args)
    records = corrupt_documents(docs, model, args.gamma, CorruptionMode(args.mode), seed, args.max_chars)
    write_records(records, args.out, _run_config("corrupt", args, seed))
    print(f"{len(records)} chunks from {len(docs)} documents written to {args.out} (seed {seed})")
    return EXIT_OK


def cmd_denoise(args: argparse.Namespace) -> int:
    records = read_records(args.input, CorruptionRecord)
    train = load_corpus(args.train)
    model = _corpus_model(build_vocabulary(train), args)
    hypotheses = denoise_records(records, train, model, args.mode, args.beam_width, args.backoff)
    write_records(hypotheses, args.out, _run_config("denoise", args))
    print(f"{len(hypotheses)} chunks denoised with the {args.mode} decoder, written to {args.out}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    corruption = read_records(args.corruption, CorruptionRecord)
    hypotheses = read_records(args.hyp, HypothesisRecord)
    report = evaluate_records(corruption, hypotheses, corpus=_label(args.corruption), macro=args.macro)
    report = report.model_copy(update={"config": _run_config("evaluate", args)})
    for row in report.rows:
        print(f"{row.system:>10}: WER {row.wer:.4f} ({row.edit_ops} edits / {row.ref_tokens} tokens)")
    if args.out:
        write_eval(report, args.out, args.format)
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    seed = resolve_seed(args.seed)
    docs = load_corpus(args.corpus)
    train = load_corpus(args.train) if args.train else docs
    model = _corpus_model(build_vocabulary(train), args)
    runner = PipelineRunner(decoder=args.decoder,
                            beam_width=args.beam_width,
                            backoff_weight=args.backoff,
                            max_chars=args.max_chars,
                            verbose=True)
    result = runner.run(docs, model, args.gamma, CorruptionMode(args.mode), seed, train, _label(args.corpus))
    if not result.success:
        raise DenoisingToolkitError(result.error_message or "Pipeline failed")
    if args.out:
        runner.save(result, args.out, _run_config("pipeline", args, seed), args.format)
    return EXIT_OK


def cmd_rerun(args: argparse.Namespace) -> int:
    config = read_run_config(args.report)
    handler = COMMANDS.get(config.command)
    if handler is None:
        raise DenoisingToolkitError(f"{args.report} records unknown command {config.command!r}")
    replay = argparse.Namespace(**config.arguments)
    replay.seed = config.seed
    replay.shards, replay.workers = args.shards, args.workers
    replay.out, replay.svg = args.out, None
    if config.tool_version != TOOL_VERSION:
        logger.warning(f"Report was written by version {config.tool_version}, running {TOOL_VERSION}")
    logger.info(f"Re-running '{config.command}' from {args.report}")
    return handler(replay)


def cmd_ui(args: argparse.Namespace) -> int:
    from web_ui.gradio_app import launch_app

    logger.info("Launching Gradio app...")
    launch_app(server_name=args.host, server_port=args.port)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "stats": cmd_stats,
    "noise uniform": cmd_noise_uniform,
    "noise estimate": cmd_noise_estimate,
    "noise describe": cmd_noise_describe,
    "complexity": cmd_complexity,
    "corrupt": cmd_corrupt,
    "denoise": cmd_denoise,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
}


def _add_format(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", help="Report file to write")
    parser.add_argument("--format", choices=["csv", "json"], default="csv")


def _add_noise_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", help="Noise model JSON (default: uniform noise over the corpus alphabet)")
    parser.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON,
                        help="Uniform noise level used when no --model is given")


def _add_corruption(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--gamma", type=float, default=1.0, help="Noise level in [0, 1]")
    parser.add_argument("--mode", choices=[m.value for m in CorruptionMode], default=CorruptionMode.SUBSTITUTION.value)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--max-chars", type=int, default=DEFAULT_MAX_CHARS)


def _add_decoder(parser: argparse.ArgumentParser, flag: str) -> None:
    parser.add_argument(flag, choices=[UNIGRAM, BEAM], default=UNIGRAM)
    parser.add_argument("--beam-width", type=positive_int, default=DEFAULT_BEAM_WIDTH)
    parser.add_argument("--backoff", type=backoff_weight, default=DEFAULT_BACKOFF_WEIGHT,
                        help="Weight of the bigram estimate in the interpolated prior")


def build_parser() -> argparse.ArgumentParser:
    parser = ToolkitArgumentParser(prog="denoise-complexity",
                                   description="Post-OCR denoising complexity toolkit")
    parser.add_argument("--version", action="version", version=TOOL_VERSION)
    commands = parser.add_subparsers(dest="command", required=True)

    stats = commands.add_parser("stats", help="Vocabulary statistics of one or more corpora")
    stats.add_argument("--corpus", action="append", required=True)
    stats.add_argument("--vocab-dir", help="Directory receiving one exported vocabulary file per corpus")
    _add_format(stats)
    stats.set_defaults(handler=cmd_stats)

    noise = commands.add_parser("noise", help="Build, estimate or describe noise models")
    noise_commands = noise.add_subparsers(dest="noise_command", required=True)

    uniform = noise_commands.add_parser("uniform", help="Uniform substitution noise")
    uniform.add_argument("--corpus", help="Corpus whose characters form the alphabet")
    uniform.add_argument("--alphabet", help="Explicit alphabet as a string of characters")
    uniform.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    uniform.add_argument("--p-insert", type=float, default=DEFAULT_P_INSERT)
    uniform.add_argument("--p-delete", type=float, default=DEFAULT_P_DELETE)
    uniform.add_argument("--out", required=True)
    uniform.set_defaults(handler=cmd_noise_uniform)

    estimate = noise_commands.add_parser("estimate", help="Estimate a model from aligned gt/ocr pairs")
    estimate.add_argument("--pairs", required=True, help='JSONL of {"gt", "ocr"} records')
    estimate.add_argument("--smoothing", type=float, default=DEFAULT_SMOOTHING)
    estimate.add_argument("--p-insert", type=float)
    estimate.add_argument("--p-delete", type=float)
    estimate.add_argument("--out", required=True)
    estimate.set_defaults(handler=cmd_noise_estimate)

    describe = noise_commands.add_parser("describe", help="Average confusion diagnostics of a model")
    describe.add_argument("--model", required=True)
    describe.add_argument("--corpus", help="Corpus used to weight characters by frequency")
    describe.add_argument("--out", help="JSON file to write")
    describe.set_defaults(handler=cmd_noise_describe)

    complexity = commands.add_parser("complexity", help="Monte Carlo denoising complexity over a gamma grid")
    source = complexity.add_mutually_exclusive_group(required=True)
    source.add_argument("--corpus")
    source.add_argument("--vocab", help="Vocabulary file exported by stats --vocab-dir")
    _add_noise_source(complexity)
    complexity.add_argument("--gammas", type=parse_gammas, default=DEFAULT_GAMMAS, help="A:B:STEP or comma list")
    complexity.add_argument("--subset", action="append", choices=[s.value for s in Subset])
    complexity.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    complexity.add_argument("--seed", type=int)
    complexity.add_argument("--shards", type=positive_int, default=DEFAULT_SHARDS)
    complexity.add_argument("--workers", type=positive_int, default=DEFAULT_WORKERS)
    complexity.add_argument("--common-random-numbers", action="store_true",
                            help="Reuse one sample stream per subset across the gamma grid")
    complexity.add_argument("--svg", help="Chart of theta against gamma")
    _add_format(complexity)
    complexity.set_defaults(handler=cmd_complexity)

    corrupt = commands.add_parser("corrupt", help="Inject noise into a corpus")
    corrupt.add_argument("--corpus", required=True)
    _add_noise_source(corrupt)
    _add_corruption(corrupt)
    corrupt.add_argument("--out", required=True)
    corrupt.set_defaults(handler=cmd_corrupt)

    denoise = commands.add_parser("denoise", help="Denoise a corruption file")
    denoise.add_argument("--input", required=True, help="Corruption JSONL")
    denoise.add_argument("--train", required=True, help="Corpus the vocabulary and priors come from")
    _add_noise_source(denoise)
    _add_decoder(denoise, "--mode")
    denoise.add_argument("--out", required=True)
    denoise.set_defaults(handler=cmd_denoise)

    evaluate = commands.add_parser("evaluate", help="Word error rates of baseline and hypotheses")
    evaluate.add_argument("--hyp", required=True)
    evaluate.add_argument("--corruption", required=True)
    evaluate.add_argument("--macro", action="store_true", help="Average per-document rates instead of pooling")
    _add_format(evaluate)
    evaluate.set_defaults(handler=cmd_evaluate)

    pipeline = commands.add_parser("pipeline", help="Corrupt, denoise and evaluate in one run")
    pipeline.add_argument("--corpus", required=True)
    pipeline.add_argument("--train", help="Training corpus (default: the evaluated corpus)")
    _add_noise_source(pipeline)
    _add_corruption(pipeline)
    _add_decoder(pipeline, "--decoder")
    pipeline.add_argument("--out", help="Output directory")
    pipeline.add_argument("--format", choices=["csv", "json"], default="csv")
    pipeline.set_defaults(handler=cmd_pipeline)

    rerun = commands.add_parser("rerun", help="Re-execute the command recorded in a report")
    rerun.add_argument("report")
    rerun.add_argument("--out", required=True, help="Output path of the replayed command")
    rerun.add_argument("--shards", type=positive_int, default=DEFAULT_SHARDS)
    rerun.add_argument("--workers", type=positive_int, default=DEFAULT_WORKERS)
    rerun.set_defaults(handler=cmd_rerun)

    ui = commands.add_parser("ui", help="Launch the web dashboard")
    ui.add_argument("--host", default=GRADIO_HOST)
    ui.add_argument("--port", type=int, default=GRADIO_PORT)
    ui.set_defaults(handler=cmd_ui)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the command line."""
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (DenoisingToolkitError, ValidationError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_DATA
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_DATA
    except KeyboardInterrupt:
        logger.critical("Keyboard interrupt detected. Shutting down gracefully...")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
