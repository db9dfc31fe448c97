"""
Command-line entry point for the MT error-annotation evaluator.

Subcommands:
  validate  check a reference corpus against the typology
  stats     corpus statistics, per MT system when several are present
  annotate  run (or replay) the LLM annotation chain over a corpus
  evaluate  score one or more prediction runs against the references
  compare   diff two evaluation reports

Exit codes: 0 ok, 1 validation failure, 2 provider failure, 3 usage error.
Every failure prints one JSON diagnostic line on stderr.
"""

import argparse
import asyncio
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

# Add src directory to Python path for absolute imports
sys.path.insert(0, str(Path(__file__).parent))

from dotenv import load_dotenv
from pydantic import ValidationError

import ui
from annotator import TranscriptStore, build_chain, replay, run_annotations
from corpus import (
    iter_corpus,
    parse_reference_corpus,
    read_predictions,
    stats_by_system,
    corpus_stats,
    write_predictions,
)
from bootstrap_ci import MIN_RESAMPLES
from errors import EXIT_OK, EXIT_VALIDATION, EmptyCorpus, InvalidDocument, MTEvalError, UsageError
from models import (
    BootstrapConfig,
    EvaluationConfig,
    PromptVariant,
    ProviderConfig,
    RunConfig,
)
from reports import (
    REPORT_FORMATS,
    comparison_to_json,
    load_reports,
    render_comparison,
    render_stats,
    to_markdown,
    trace_to_json,
    write_reports,
)
from anchoring import NORMALIZATION_LEVELS
from scoring import compare_runs, config_fingerprint, evaluate_corpus
from typology import load_typology


logger = logging.getLogger(__name__)

PREDICTIONS_NAME = "predictions.tsv"
LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors become UsageError (exit 3) instead of argparse's exit 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _formats(value: str) -> list[str]:
    formats = [f.strip() for f in value.split(",") if f.strip()]
    unknown = [f for f in formats if f not in REPORT_FORMATS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown format(s): {', '.join(unknown)}")
    return formats


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="mt-error-eval", description="Evaluate LLM error annotation of machine translation")
    parser.add_argument("--log-level", type=str.upper, default=os.getenv("LOG_LEVEL", "WARNING").upper(),
                        choices=LOG_LEVELS,
                        help="Logging level (default from LOG_LEVEL, else WARNING)")
    commands = parser.add_subparsers(dest="command", required=True)

    def corpus_args(p, required=True):
        p.add_argument("--corpus", required=required, help="Reference corpus directory or JSON file")
        p.add_argument("--typology", help="Typology JSON file (default: bundled, or MTEVAL_TYPOLOGY)")

    p = commands.add_parser("validate", help="Validate a reference corpus")
    corpus_args(p)

    p = commands.add_parser("stats", help="Corpus statistics")
    corpus_args(p)
    p.add_argument("--out", help="Also write stats.json here")

    p = commands.add_parser("annotate", help="Annotate a corpus with the LLM chain")
    corpus_args(p)
    p.add_argument("--provider-config", help="Provider JSON configuration")
    p.add_argument("--replay", help="Run directory whose stored transcripts are re-parsed")
    p.add_argument("--endpoint", help="Override the provider endpoint")
    p.add_argument("--model", help="Override the provider model")
    p.add_argument("--api-key-env", help="Override the credential environment variable name")
    p.add_argument("--manual", help="Annotation manual attached to the first step")
    p.add_argument("--variant", choices=[v.value for v in PromptVariant], default=PromptVariant.LONG.value)
    p.add_argument("--out", required=True, help="Run directory for transcripts, manifest and predictions")
    p.add_argument("--force", action="store_true", help="Re-annotate documents that already have transcripts")

    p = commands.add_parser("evaluate", help="Score prediction runs against the references")
    corpus_args(p)
    p.add_argument("--predictions", action="append", default=[],
                   help="Predictions TSV/JSON; repeat for several runs")
    p.add_argument("--replay", help="Run directory whose stored transcripts provide the predictions")
    p.add_argument("--bootstrap-b", type=int, default=10_000, help="Bootstrap resamples (default 10000)")
    p.add_argument("--seed", type=int, required=True, help="Bootstrap seed, recorded in the report settings")
    p.add_argument("--normalization", choices=NORMALIZATION_LEVELS, default="normalized")
    p.add_argument("--out", help="Output directory (default: Markdown table on stdout)")
    p.add_argument("--formats", type=_formats, default=list(REPORT_FORMATS),
                   help="Comma-separated subset of json,md,csv,svg")
    p.add_argument("--trace", action="store_true", help="Write matching decisions to trace.json")

    p = commands.add_parser("compare", help="Compare two evaluation reports")
    p.add_argument("reports", nargs="+", help="report.json files (two, or one holding two runs)")
    p.add_argument("--out", help="Also write comparison.md and comparison.json here")

    return parser


def _require_path(path: str | None, flag: str) -> Path:
    if not path:
        raise UsageError(f"{flag} is required")
    resolved = Path(path)
    if not resolved.exists():
        raise UsageError(f"{flag}: {path} does not exist")
    return resolved


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _run_config(args: argparse.Namespace) -> RunConfig:
    try:
        return RunConfig(
            corpus=getattr(args, "corpus", None),
            typology=getattr(args, "typology", None),
            predictions=getattr(args, "predictions", None) or [],
            provider_config=getattr(args, "provider_config", None),
            replay=getattr(args, "replay", None),
            manual=getattr(args, "manual", None),
            variant=getattr(args, "variant", PromptVariant.LONG.value),
            bootstrap_b=getattr(args, "bootstrap_b", 10_000),
            seed=getattr(args, "seed", 42),
            normalization=getattr(args, "normalization", "normalized"),
            out=getattr(args, "out", None),
            formats=getattr(args, "formats", None) or list(REPORT_FORMATS),
            force=getattr(args, "force", False),
            trace=getattr(args, "trace", False),
        )
    except ValidationError as e:
        raise UsageError(e.errors()[0]["msg"])


def _load_inputs(config: RunConfig):
    if config.typology:
        _require_path(config.typology, "--typology")
    typology = load_typology(config.typology)
    corpus_path = _require_path(config.corpus, "--corpus")
    ui.show_loading_corpus(str(corpus_path))
    documents = parse_reference_corpus(corpus_path, typology)
    if not documents:
        raise EmptyCorpus(str(corpus_path))
    ui.show_corpus_loaded(len(documents), sum(len(d.reference_errors) for d in documents))
    return typology, documents


# --- Commands ---

def cmd_validate(args: argparse.Namespace) -> int:
    """Check every document; print one diagnostic line per problem on stdout."""
    config = _run_config(args)
    if config.typology:
        _require_path(config.typology, "--typology")
    typology = load_typology(config.typology)
    corpus_path = _require_path(config.corpus, "--corpus")

    n_docs = 0
    n_problems = 0
    seen: dict[str, str] = {}
    for name, document, problems in iter_corpus(corpus_path, typology):
        if document is not None:
            n_docs += 1
            if document.doc_id in seen:
                problems = [*problems, InvalidDocument(
                    f"doc_id {document.doc_id} also appears in {seen[document.doc_id]}",
                    doc_id=document.doc_id,
                )]
            seen.setdefault(document.doc_id, name)
        for problem in problems:
            print(json.dumps({"file": name, **problem.diagnostic()}, ensure_ascii=False))
        if problems:
            ui.show_file_problems(name, len(problems))
        else:
            ui.show_file_ok(name)
        n_problems += len(problems)

    if n_docs == 0 and n_problems == 0:
        raise EmptyCorpus(str(corpus_path))
    return EXIT_VALIDATION if n_problems else EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    config = _run_config(args)
    _, documents = _load_inputs(config)

    blocks = stats_by_system(documents)
    if len(blocks) > 1:
        blocks = {"all": corpus_stats(documents), **blocks}

    for stats in blocks.values():
        print(render_stats(stats))
    if config.out:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        payload = {name: stats.model_dump(mode="json") for name, stats in blocks.items()}
        (out / "stats.json").write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _provider_config(args: argparse.Namespace, path: Path) -> ProviderConfig:
    try:
        provider_config = ProviderConfig.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise UsageError(f"{path}: invalid provider configuration: {e.errors()[0]['msg']}")
    except UnicodeDecodeError as e:
        raise UsageError(f"{path}: invalid provider configuration: {e}")
    overrides = {
        "endpoint": args.endpoint,
        "model": args.model,
        "api_key_env": args.api_key_env,
    }
    return provider_config.model_copy(update={k: v for k, v in overrides.items() if v})


def _replayed_predictions(run_dir: Path, doc_ids: list[str]) -> dict:
    store = TranscriptStore(run_dir)
    ui.show_replaying(len(doc_ids))
    return {doc_id: replay(store, doc_id)[1] for doc_id in doc_ids}


def cmd_annotate(args: argparse.Namespace) -> int:
    config = _run_config(args)
    if not (config.provider_config or config.replay):
        raise UsageError("annotate needs --provider-config or --replay")
    typology, documents = _load_inputs(config)
    out = Path(config.out)
    doc_ids = sorted(d.doc_id for d in documents)

    if config.replay:
        replay_dir = _require_path(config.replay, "--replay")
        predictions = _replayed_predictions(replay_dir, doc_ids)
        source_manifest = TranscriptStore(replay_dir).read_manifest()
        TranscriptStore(out).write_manifest({
            "run_id": source_manifest.get("run_id"),
            "replayed_from": str(replay_dir),
            "replayed_at": _now(),
            "documents": {doc_id: {"status": "replayed", "n_predictions": len(predictions[doc_id])}
                          for doc_id in doc_ids},
        })
    else:
        provider_config = _provider_config(args, _require_path(config.provider_config, "--provider-config"))
        manual = _require_path(config.manual, "--manual") if config.manual else None
        chains = [
            build_chain(d, typology, manual=manual, variant=config.variant)
            for d in sorted(documents, key=lambda d: d.doc_id)
        ]
        predictions = asyncio.run(run_annotations(
            chains, provider_config, TranscriptStore(out), typology, force=config.force
        ))

    path = write_predictions(
        [p for doc_id in doc_ids for p in predictions.get(doc_id, [])],
        out / PREDICTIONS_NAME,
    )
    ui.show_written([path])
    return EXIT_OK


def _run_name(path: Path, taken: set[str]) -> str:
    name = path.parent.name if path.stem == Path(PREDICTIONS_NAME).stem else path.stem
    candidate, i = name, 2
    while candidate in taken:
        candidate, i = f"{name}-{i}", i + 1
    taken.add(candidate)
    return candidate


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _run_config(args)
    if not (config.predictions or config.replay):
        raise UsageError("evaluate needs --predictions or --replay")
    if config.bootstrap_b < MIN_RESAMPLES:
        raise UsageError(f"--bootstrap-b must be at least {MIN_RESAMPLES}")
    typology, documents = _load_inputs(config)
    evaluation = EvaluationConfig(
        normalization=config.normalization,
        bootstrap=BootstrapConfig(n_resamples=config.bootstrap_b, seed=config.seed),
    )

    runs: dict[str, dict] = {}
    if config.replay:
        replay_dir = _require_path(config.replay, "--replay")
        runs[replay_dir.name] = _replayed_predictions(replay_dir, sorted(d.doc_id for d in documents))
    taken: set[str] = set(runs)
    for raw_path in config.predictions:
        path = _require_path(raw_path, "--predictions")
        runs[_run_name(path, taken)] = read_predictions(path)

    reports = []
    traces = {}
    for run_name, predictions in runs.items():
        ui.show_evaluating(run_name, len(documents))
        report, matches = evaluate_corpus(
            documents, predictions, typology, evaluation, run_name=run_name, with_trace=config.trace
        )
        reports.append(report)
        traces[run_name] = matches

    if not config.out:
        print(to_markdown(reports), end="")
        return EXIT_OK

    out = Path(config.out)
    written = write_reports(reports, out, config.formats)
    if config.trace:
        trace_path = out / "trace.json"
        trace_path.write_text(trace_to_json(traces), encoding="utf-8")
        written.append(trace_path)

    store = TranscriptStore(out)
    manifest = store.read_manifest()
    manifest["evaluation"] = {
        "evaluated_at": _now(),
        "corpus": str(config.corpus),
        "typology": str(config.typology) if config.typology else None,
        "runs": list(runs),
        "settings": config_fingerprint(evaluation),
        "outputs": [p.name for p in written],
    }
    store.write_manifest(manifest)
    ui.show_written(written)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    reports = []
    for raw_path in args.reports:
        reports.extend(load_reports(_require_path(raw_path, "report")))
    if len(reports) < 2:
        raise UsageError("compare needs two runs")
    if len(reports) > 2:
        logger.warning(f"Comparing the first two of {len(reports)} runs")

    comparison = compare_runs(reports[0], reports[1])
    rendered = render_comparison(comparison)
    print(rendered, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.md").write_text(rendered, encoding="utf-8")
        (out / "comparison.json").write_text(comparison_to_json(comparison), encoding="utf-8")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "stats": cmd_stats,
    "annotate": cmd_annotate,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    """Run the CLI; returns the exit code."""
    load_dotenv(Path(__file__).parent.parent / ".env")
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=args.log_level,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        return COMMANDS[args.command](args)
    except MTEvalError as e:
        ui.show_error(e.message)
        print(json.dumps(e.diagnostic(), ensure_ascii=False, default=str), file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
