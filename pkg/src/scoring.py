"""
Per-document scores, macro aggregation and run comparison.

Precision and recall are computed per document and averaged without
weights (macro). Label accuracy is pooled over all matched errors.
"""

import hashlib
import json
import logging
from statistics import fmean

from anchoring import anchor_predictions
from bootstrap_ci import bca_interval
from errors import DocSetMismatch, EmptyCorpus, InsufficientData
from models import (
    AnnotatedDocument,
    DocumentDelta,
    DocumentScore,
    EvaluationConfig,
    EvaluationReport,
    MatchResult,
    MetricDelta,
    PredictedAnnotation,
    RunComparison,
    Typology,
)
from span_matching import match_document


logger = logging.getLogger(__name__)

VACUOUS_PRECISION = "vacuousP"
VACUOUS_RECALL = "vacuousR"
ZERO_F1 = "zeroF1"

COMPARED_METRICS = [
    "macro_precision",
    "macro_recall",
    "macro_f1",
    "pct_correctly_labeled",
    "total_pred",
    "total_matched",
    "false_error_total",
    "false_error_pct_of_pred",
]


def score_document(m: MatchResult) -> DocumentScore:
    """
    Score one matched document.

    Conventions when a ratio is undefined: no predictions gives precision 1,
    no gold errors gives recall 1, P + R = 0 gives F1 0. Each firing is
    recorded in degenerate_flags.
    """
    n_matched = len(m.pairs)
    flags: list[str] = []

    if m.n_preds == 0:
        precision = 1.0
        flags.append(VACUOUS_PRECISION)
    else:
        precision = n_matched / m.n_preds

    if m.n_refs == 0:
        recall = 1.0
        flags.append(VACUOUS_RECALL)
    else:
        recall = n_matched / m.n_refs

    if precision + recall == 0:
        f1 = 0.0
        flags.append(ZERO_F1)
    else:
        f1 = 2 * precision * recall / (precision + recall)

    return DocumentScore(
        doc_id=m.doc_id,
        n_gold=m.n_refs,
        n_pred=m.n_preds,
        n_matched=n_matched,
        n_label_correct=m.n_label_correct,
        n_false=m.n_preds - n_matched,
        precision=precision,
        recall=recall,
        f1=f1,
        degenerate_flags=flags,
    )


def config_fingerprint(config: EvaluationConfig) -> dict:
    settings = config.model_dump(mode="json")
    canonical = json.dumps(settings, sort_keys=True, separators=(",", ":"))
    settings["digest"] = hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
    return settings


def aggregate(
    scores: list[DocumentScore],
    matches: list[MatchResult],
    config: EvaluationConfig | None = None,
    run_name: str = "",
    n_unanchored: int = 0,
    mt_system: str | None = None,
) -> EvaluationReport:
    """
    Aggregate per-document scores into a report with bootstrap intervals.

    Raises:
        EmptyCorpus: no documents
    """
    if not scores:
        raise EmptyCorpus()
    if len(matches) != len(scores):
        raise ValueError("scores and matches must be aligned")
    config = config or EvaluationConfig()

    total_pred = sum(s.n_pred for s in scores)
    total_gold = sum(s.n_gold for s in scores)
    total_matched = sum(s.n_matched for s in scores)
    total_label_correct = sum(m.n_label_correct for m in matches)
    false_counts = [s.n_false for s in scores]

    labeled = [s.n_label_correct / s.n_matched for s in scores if s.n_matched]

    ci = {}
    for metric in ("precision", "recall", "f1"):
        values = [getattr(s, metric) for s in scores]
        try:
            ci[metric] = bca_interval(
                values,
                n_resamples=config.bootstrap.n_resamples,
                seed=config.bootstrap.seed,
                level=config.bootstrap.level,
            )
        except InsufficientData as e:
            logger.warning(f"No confidence interval for {metric}: {e.message}")
            ci[metric] = None

    return EvaluationReport(
        run_name=run_name,
        mt_system=mt_system,
        scores=scores,
        macro_precision=fmean(s.precision for s in scores),
        macro_recall=fmean(s.recall for s in scores),
        macro_f1=fmean(s.f1 for s in scores),
        ci_precision=ci["precision"],
        ci_recall=ci["recall"],
        ci_f1=ci["f1"],
        total_pred=total_pred,
        total_gold=total_gold,
        total_matched=total_matched,
        pct_correctly_labeled=total_label_correct / total_matched if total_matched else None,
        macro_pct_correctly_labeled=fmean(labeled) if labeled else None,
        micro_precision=total_matched / total_pred if total_pred else 1.0,
        micro_recall=total_matched / total_gold if total_gold else 1.0,
        false_error_total=sum(false_counts),
        false_error_mean_per_doc=fmean(false_counts),
        false_error_min=min(false_counts),
        false_error_max=max(false_counts),
        false_error_pct_of_pred=sum(false_counts) / total_pred if total_pred else None,
        n_unanchored=n_unanchored,
        config_fingerprint=config_fingerprint(config),
    )


def evaluate_corpus(
    documents: list[AnnotatedDocument],
    predictions: dict[str, list[PredictedAnnotation]],
    typology: Typology,
    config: EvaluationConfig | None = None,
    run_name: str = "",
    with_trace: bool = False,
) -> tuple[EvaluationReport, list[MatchResult]]:
    """
    Run anchor -> match -> score -> aggregate over a corpus.

    Documents without predictions count as having none. Predictions for
    unknown documents raise DocSetMismatch. When the corpus mixes MT
    systems, the report also carries one sub-report per system.
    """
    config = config or EvaluationConfig()
    known = {d.doc_id for d in documents}
    unknown = sorted(set(predictions) - known)
    if unknown:
        raise DocSetMismatch(only_left=unknown, only_right=[])

    scores: list[DocumentScore] = []
    matches: list[MatchResult] = []
    unanchored: list[int] = []
    systems: list[str] = []
    for document in sorted(documents, key=lambda d: d.doc_id):
        anchored = anchor_predictions(
            document, predictions.get(document.doc_id, []), normalization=config.normalization
        )
        unanchored.append(sum(1 for p in anchored if p.anchor is None))
        systems.append(document.mt_system)
        match = match_document(
            list(document.reference_errors),
            anchored,
            typology=typology,
            doc_id=document.doc_id,
            with_trace=with_trace,
        )
        matches.append(match)
        scores.append(score_document(match))

    report = aggregate(scores, matches, config, run_name=run_name, n_unanchored=sum(unanchored))
    if len(set(systems)) > 1:
        by_system = {}
        for system in sorted(set(systems)):
            picked = [i for i, s in enumerate(systems) if s == system]
            by_system[system] = aggregate(
                [scores[i] for i in picked],
                [matches[i] for i in picked],
                config,
                run_name=run_name,
                n_unanchored=sum(unanchored[i] for i in picked),
                mt_system=system,
            )
        report = report.model_copy(update={"by_system": by_system})
    return report, matches


def compare_runs(a: EvaluationReport, b: EvaluationReport) -> RunComparison:
    """
    Metric and per-document deltas (b minus a).

    Raises:
        DocSetMismatch: the reports cover different documents
    """
    left, right = set(a.doc_ids), set(b.doc_ids)
    if left != right:
        raise DocSetMismatch(only_left=sorted(left - right), only_right=sorted(right - left))

    metrics = []
    for name in COMPARED_METRICS:
        va, vb = getattr(a, name), getattr(b, name)
        delta = vb - va if va is not None and vb is not None else None
        metrics.append(MetricDelta(metric=name, a=va, b=vb, delta=delta))

    by_id = {s.doc_id: s for s in b.scores}
    documents = [
        DocumentDelta(
            doc_id=sa.doc_id,
            precision=by_id[sa.doc_id].precision - sa.precision,
            recall=by_id[sa.doc_id].recall - sa.recall,
            f1=by_id[sa.doc_id].f1 - sa.f1,
            n_pred=by_id[sa.doc_id].n_pred - sa.n_pred,
            n_label_correct=by_id[sa.doc_id].n_label_correct - sa.n_label_correct,
        )
        for sa in sorted(a.scores, key=lambda s: s.doc_id)
    ]
    return RunComparison(run_a=a.run_name, run_b=b.run_name, metrics=metrics, documents=documents)
