"""
Report serializers: structured JSON, Markdown results table, per-document CSV,
score-distribution graphic, run comparisons and corpus statistics.

Structured outputs hold no timestamps so that identical inputs give
byte-identical files.
"""

import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd
from pydantic import ValidationError

from errors import InvalidDocument
from models import (
    ConfidenceInterval,
    CorpusStats,
    EvaluationReport,
    MatchResult,
    RunComparison,
)


logger = logging.getLogger(__name__)

REPORT_FORMATS = ("json", "md", "csv", "svg")
OUTPUT_NAMES = {
    "json": "report.json",
    "md": "report.md",
    "csv": "scores.csv",
    "svg": "distributions.svg",
}

COUNT_METRICS = {"total_pred", "total_matched", "false_error_total"}

SCORE_COLUMNS = [
    "run",
    "doc_id",
    "n_gold",
    "n_pred",
    "n_matched",
    "n_label_correct",
    "n_false",
    "precision",
    "recall",
    "f1",
    "degenerate_flags",
]


def _dump(payload) -> str:
    return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"


def to_json(reports: list[EvaluationReport]) -> str:
    return _dump({"runs": [r.model_dump(mode="json") for r in reports]})


def load_reports(path: str | Path) -> list[EvaluationReport]:
    """Read the runs stored in a report.json file."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        runs = payload["runs"] if isinstance(payload, dict) and "runs" in payload else [payload]
        return [EvaluationReport.model_validate(run) for run in runs]
    except (json.JSONDecodeError, UnicodeDecodeError, TypeError, ValidationError) as e:
        raise InvalidDocument(f"{path} is not an evaluation report: {e}", file=Path(path).name)


def format_score(value: float, ci: ConfidenceInterval | None) -> str:
    """Score to 3 decimals, CI half-width to 3 significant digits."""
    if ci is None:
        return f"{value:.3f}"
    return f"{value:.3f} ± {ci.half_width:.3g}"


def format_percent(fraction: float | None) -> str:
    return "n/a" if fraction is None else f"{100 * fraction:.1f}"


def _metric_rows(reports: list[EvaluationReport]) -> list[tuple[str, list[str]]]:
    return [
        ("# texts", [str(len(r.scores)) for r in reports]),
        ("# gold errors", [str(r.total_gold) for r in reports]),
        ("# pred. errors", [str(r.total_pred) for r in reports]),
        ("# matched", [str(r.total_matched) for r in reports]),
        ("Precision", [format_score(r.macro_precision, r.ci_precision) for r in reports]),
        ("Recall", [format_score(r.macro_recall, r.ci_recall) for r in reports]),
        ("F1", [format_score(r.macro_f1, r.ci_f1) for r in reports]),
        ("% correctly labeled", [format_percent(r.pct_correctly_labeled) for r in reports]),
        ("# false errors", [str(r.false_error_total) for r in reports]),
        ("false errors per text (mean / min / max)", [
            f"{r.false_error_mean_per_doc:.2f} / {r.false_error_min} / {r.false_error_max}" for r in reports
        ]),
        ("% false of pred.", [format_percent(r.false_error_pct_of_pred) for r in reports]),
        ("# unanchored pred.", [str(r.n_unanchored) for r in reports]),
    ]


def _table(names: list[str], reports: list[EvaluationReport]) -> list[str]:
    lines = [
        "| | " + " | ".join(names) + " |",
        "|---|" + "---|" * len(names),
    ]
    return lines + [f"| {label} | " + " | ".join(values) + " |" for label, values in _metric_rows(reports)]


def to_markdown(reports: list[EvaluationReport]) -> str:
    """
    Results table with one column per run, followed by a per-MT-system table
    when the corpus mixes systems.
    """
    settings = reports[0].config_fingerprint
    bootstrap = settings.get("bootstrap", {})
    names = [r.run_name or f"run {i + 1}" for i, r in enumerate(reports)]

    lines = [
        "# Evaluation report",
        "",
        f"- Matching: {settings.get('matching_policy', '')} "
        f"(tie-break: {settings.get('tie_break', '')})",
        f"- Surface normalization: {settings.get('normalization', '')}",
        f"- Label accuracy: {settings.get('label_accuracy', '')} over matched errors",
        f"- Intervals: BCa bootstrap, level {bootstrap.get('level')}, "
        f"B = {bootstrap.get('n_resamples')}, seed {bootstrap.get('seed')}",
        f"- Settings digest: {settings.get('digest', '')}",
        "",
        *_table(names, reports),
    ]

    system_names, system_reports = [], []
    for name, report in zip(names, reports):
        for system, sub in sorted(report.by_system.items()):
            system_names.append(f"{name} / {system}")
            system_reports.append(sub)
    if system_reports:
        lines += ["", "## By MT system", "", *_table(system_names, system_reports)]

    notes = []
    for name, report in zip(names + system_names, reports + system_reports):
        for metric in ("precision", "recall", "f1"):
            ci = getattr(report, f"ci_{metric}")
            if ci is None:
                notes.append(f"- {name}: no interval for {metric} (fewer than 2 texts)")
            elif ci.warning:
                notes.append(f"- {name}: {metric} interval {ci.method.value} ({ci.warning})")
    if notes:
        lines += ["", "Notes:", *notes]
    return "\n".join(lines) + "\n"


def scores_frame(reports: list[EvaluationReport]) -> pd.DataFrame:
    records = []
    for report in reports:
        for score in report.scores:
            record = score.model_dump()
            record["run"] = report.run_name
            record["degenerate_flags"] = ";".join(score.degenerate_flags)
            records.append(record)
    return pd.DataFrame.from_records(records, columns=SCORE_COLUMNS)


def to_csv(reports: list[EvaluationReport]) -> str:
    return scores_frame(reports).to_csv(index=False, lineterminator="\n", float_format="%.6f")


def plot_distributions(reports: list[EvaluationReport], path: str | Path) -> Path:
    """Box plots of per-document precision, recall and F1, one panel per run."""
    path = Path(path)
    with plt.rc_context({"svg.hashsalt": "mt-error-eval", "svg.fonttype": "path"}):
        fig, axes = plt.subplots(
            1, len(reports), figsize=(4 * len(reports), 4), sharey=True, squeeze=False
        )
        for ax, report in zip(axes[0], reports):
            data = [[getattr(s, metric) for s in report.scores] for metric in ("precision", "recall", "f1")]
            ax.boxplot(data, tick_labels=["Precision", "Recall", "F1"])
            ax.set_title(report.run_name or "run")
            ax.set_ylim(-0.05, 1.05)
            ax.grid(axis="y", linestyle=":", linewidth=0.5)
        axes[0][0].set_ylabel("Score per text")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path


def write_reports(
    reports: list[EvaluationReport],
    out_dir: str | Path,
    formats: list[str] | tuple[str, ...] = REPORT_FORMATS,
) -> list[Path]:
    """Write the requested report files under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        path = out_dir / OUTPUT_NAMES[fmt]
        if fmt == "json":
            path.write_text(to_json(reports), encoding="utf-8")
        elif fmt == "md":
            path.write_text(to_markdown(reports), encoding="utf-8")
        elif fmt == "csv":
            path.write_text(to_csv(reports), encoding="utf-8")
        elif fmt == "svg":
            plot_distributions(reports, path)
        written.append(path)
    return written


def trace_to_json(runs: dict[str, list[MatchResult]]) -> str:
    """Matching decisions per run and document, in tie-break order."""
    return _dump({
        run: {m.doc_id: [step.model_dump() for step in (m.trace or [])] for m in matches}
        for run, matches in runs.items()
    })


def render_comparison(comparison: RunComparison) -> str:
    if comparison.identical:
        return "no differences\n"

    def fmt(value, metric, signed=False):
        if value is None:
            return "n/a"
        if metric in COUNT_METRICS:
            return f"{int(value):+d}" if signed else str(int(value))
        return f"{value:+.3f}" if signed else f"{value:.3f}"

    lines = [
        f"# {comparison.run_a or 'A'} vs {comparison.run_b or 'B'}",
        "",
        "| metric | A | B | B - A |",
        "|---|---|---|---|",
    ]
    for m in comparison.metrics:
        lines.append(f"| {m.metric} | {fmt(m.a, m.metric)} | {fmt(m.b, m.metric)} | {fmt(m.delta, m.metric, signed=True)} |")

    changed = [
        d for d in comparison.documents
        if d.precision or d.recall or d.f1 or d.n_pred or d.n_label_correct
    ]
    if changed:
        lines += [
            "",
            "| doc_id | ΔP | ΔR | ΔF1 | Δ# pred. | Δ# correctly labeled |",
            "|---|---|---|---|---|---|",
        ]
        lines += [
            f"| {d.doc_id} | {d.precision:+.3f} | {d.recall:+.3f} | {d.f1:+.3f} | {d.n_pred:+d} | {d.n_label_correct:+d} |"
            for d in changed
        ]
    return "\n".join(lines) + "\n"


def comparison_to_json(comparison: RunComparison) -> str:
    return _dump(comparison.model_dump(mode="json"))


def render_stats(stats: CorpusStats) -> str:
    title = stats.mt_system or "all"
    return "\n".join([
        f"[{title}]",
        f"  documents:        {stats.n_docs}",
        f"  errors:           {stats.n_errors}",
        f"  errors per doc:   {stats.mean_errors_per_doc:.2f}",
        f"  span length:      min {stats.span_len_min}, max {stats.span_len_max}, mean {stats.span_len_mean:.2f}",
        f"  labels per error: min {stats.labels_per_error_min}, max {stats.labels_per_error_max}, "
        f"mean {stats.labels_per_error_mean:.2f}",
        f"  words (target):   {stats.n_words}",
    ]) + "\n"
