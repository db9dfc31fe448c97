"""
Tests for per-document scores, aggregation and run comparison.
"""

from pathlib import Path

import pytest

from corpus import parse_reference_corpus, read_predictions
from errors import DocSetMismatch, EmptyCorpus
from models import BootstrapConfig, DocumentScore, EvaluationConfig, MatchPair, MatchResult, PredictedAnnotation
from scoring import (
    VACUOUS_PRECISION,
    VACUOUS_RECALL,
    ZERO_F1,
    aggregate,
    compare_runs,
    config_fingerprint,
    evaluate_corpus,
    score_document,
)
from typology import load_typology


FIXTURES = Path(__file__).parent / "fixtures"

# Small resample count keeps the suite fast; bounds are still deterministic.
FAST = EvaluationConfig(bootstrap=BootstrapConfig(n_resamples=1000))


@pytest.fixture(scope="module")
def typology():
    return load_typology()


@pytest.fixture(scope="module")
def corpus(typology):
    return parse_reference_corpus(FIXTURES / "metric_corpus", typology)


def _match(n_refs, n_preds, n_matched, n_label_correct=0, doc_id="d"):
    return MatchResult(
        doc_id=doc_id,
        n_refs=n_refs,
        n_preds=n_preds,
        pairs=[MatchPair(ref_index=i, pred_index=i, overlap_len=1) for i in range(n_matched)],
        n_label_correct=n_label_correct,
    )


def _score(doc_id, precision=1.0, n_pred=1, n_false=0, n_matched=1, n_label_correct=1):
    return DocumentScore(
        doc_id=doc_id,
        n_gold=1,
        n_pred=n_pred,
        n_matched=n_matched,
        n_label_correct=n_label_correct,
        n_false=n_false,
        precision=precision,
        recall=1.0,
        f1=1.0,
    )


def test_score_document():
    score = score_document(_match(4, 5, 3))
    assert score.precision == pytest.approx(0.6)
    assert score.recall == pytest.approx(0.75)
    assert score.f1 == pytest.approx(2 * 0.6 * 0.75 / 1.35)
    assert score.n_false == 2
    assert score.degenerate_flags == []


def test_score_document_nothing_to_find():
    score = score_document(_match(0, 0, 0))
    assert (score.precision, score.recall, score.f1) == (1.0, 1.0, 1.0)
    assert score.degenerate_flags == [VACUOUS_PRECISION, VACUOUS_RECALL]


def test_score_document_nothing_matched():
    score = score_document(_match(3, 2, 0))
    assert (score.precision, score.recall, score.f1) == (0.0, 0.0, 0.0)
    assert score.degenerate_flags == [ZERO_F1]


def test_aggregate_macro_mean():
    scores = [_score("a", precision=1.0), _score("b", precision=0.5)]
    matches = [_match(1, 1, 1), _match(1, 1, 1)]
    report = aggregate(scores, matches, FAST)
    assert report.macro_precision == pytest.approx(0.75)


def test_aggregate_pooled_label_accuracy():
    scores = [_score("a", n_matched=4, n_label_correct=2), _score("b", n_matched=4, n_label_correct=4)]
    matches = [_match(4, 4, 4, n_label_correct=2), _match(4, 4, 4, n_label_correct=4)]
    report = aggregate(scores, matches, FAST)
    assert report.pct_correctly_labeled == pytest.approx(6 / 8)
    assert report.macro_pct_correctly_labeled == pytest.approx(0.75)


def test_aggregate_false_errors():
    scores = [
        _score("a", n_pred=4, n_false=0),
        _score("b", n_pred=10, n_false=2),
        _score("c", n_pred=6, n_false=5),
    ]
    matches = [_match(1, 4, 1), _match(1, 10, 1), _match(1, 6, 1)]
    report = aggregate(scores, matches, FAST)
    assert report.false_error_total == 7
    assert report.false_error_mean_per_doc == pytest.approx(7 / 3)
    assert (report.false_error_min, report.false_error_max) == (0, 5)
    assert report.false_error_pct_of_pred == pytest.approx(7 / 20)


def test_aggregate_single_document_has_no_interval():
    report = aggregate([_score("a")], [_match(1, 1, 1)], FAST)
    assert report.ci_precision is None and report.ci_recall is None and report.ci_f1 is None


def test_aggregate_empty():
    with pytest.raises(EmptyCorpus):
        aggregate([], [])


def test_metric_fixture(corpus, typology):
    """Hand-computed expectations are worked out in fixtures/README.md."""
    predictions = read_predictions(FIXTURES / "predictions_long.tsv")
    report, matches = evaluate_corpus(corpus, predictions, typology, FAST, run_name="long")

    assert report.run_name == "long"
    assert report.doc_ids == ["fx-doc1", "fx-doc2", "fx-doc3"]
    assert [(s.n_gold, s.n_pred, s.n_matched, s.n_label_correct, s.n_false) for s in report.scores] == [
        (6, 4, 4, 3, 0),
        (3, 6, 3, 2, 3),
        (6, 4, 3, 1, 1),
    ]
    assert report.macro_precision == pytest.approx(0.75)
    assert report.macro_recall == pytest.approx(13 / 18)
    assert report.macro_f1 == pytest.approx(31 / 45)
    assert report.pct_correctly_labeled == pytest.approx(0.6)
    assert report.macro_pct_correctly_labeled == pytest.approx(7 / 12)
    assert report.micro_precision == pytest.approx(10 / 14)
    assert report.micro_recall == pytest.approx(10 / 15)
    assert report.false_error_total == 4
    assert report.false_error_pct_of_pred == pytest.approx(4 / 14)
    assert report.n_unanchored == 0
    assert [m.doc_id for m in matches] == report.doc_ids

    for ci, estimate in ((report.ci_precision, 0.75), (report.ci_recall, 13 / 18), (report.ci_f1, 31 / 45)):
        assert ci is not None
        assert ci.estimate == pytest.approx(estimate)
        assert ci.lower <= ci.upper


def test_metric_fixture_by_system(corpus, typology):
    """fx-doc1 and fx-doc3 are DeepL, fx-doc2 is ChatGPT."""
    report, _ = evaluate_corpus(corpus, read_predictions(FIXTURES / "predictions_long.tsv"), typology, FAST)
    assert list(report.by_system) == ["ChatGPT", "DeepL"]

    deepl = report.by_system["DeepL"]
    assert deepl.mt_system == "DeepL"
    assert deepl.doc_ids == ["fx-doc1", "fx-doc3"]
    assert deepl.macro_precision == pytest.approx(0.875)
    assert deepl.macro_recall == pytest.approx(7 / 12)
    assert deepl.pct_correctly_labeled == pytest.approx(4 / 7)
    assert (deepl.total_pred, deepl.total_gold, deepl.false_error_total) == (8, 12, 1)
    assert deepl.ci_precision is not None

    chatgpt = report.by_system["ChatGPT"]
    assert (chatgpt.macro_precision, chatgpt.macro_recall) == (0.5, 1.0)
    assert chatgpt.pct_correctly_labeled == pytest.approx(2 / 3)
    assert chatgpt.ci_precision is None
    assert chatgpt.by_system == {}


def test_single_system_has_no_breakdown(typology):
    corpus = parse_reference_corpus(FIXTURES / "replay_corpus", typology)
    report, _ = evaluate_corpus(corpus, {}, typology, FAST)
    assert report.by_system == {}


def test_evaluation_is_deterministic(corpus, typology):
    predictions = read_predictions(FIXTURES / "predictions_long.tsv")
    first, _ = evaluate_corpus(corpus, predictions, typology, FAST)
    second, _ = evaluate_corpus(corpus, predictions, typology, FAST)
    assert first.model_dump() == second.model_dump()


def test_prediction_order_within_document_does_not_matter(corpus, typology):
    predictions = read_predictions(FIXTURES / "predictions_long.tsv")
    reversed_predictions = {doc_id: preds[::-1] for doc_id, preds in predictions.items()}
    a, _ = evaluate_corpus(corpus, predictions, typology, FAST)
    b, _ = evaluate_corpus(corpus, reversed_predictions, typology, FAST)
    assert (a.macro_precision, a.macro_recall, a.pct_correctly_labeled) == (
        b.macro_precision, b.macro_recall, b.pct_correctly_labeled,
    )


def test_identity_run(corpus, typology):
    predictions = {
        doc.doc_id: [
            PredictedAnnotation(doc_id=doc.doc_id, surface=doc.surface(i), label=error.labels[0])
            for i, error in enumerate(doc.reference_errors)
        ]
        for doc in corpus
    }
    report, _ = evaluate_corpus(corpus, predictions, typology, FAST)
    assert (report.macro_precision, report.macro_recall, report.macro_f1) == (1.0, 1.0, 1.0)
    assert report.pct_correctly_labeled == 1.0
    assert report.false_error_total == 0


def test_empty_predictions(corpus, typology):
    predictions = read_predictions(FIXTURES / "predictions_empty.tsv")
    report, _ = evaluate_corpus(corpus, predictions, typology, FAST)
    assert report.macro_precision == 1.0
    assert report.macro_recall == 0.0
    assert report.pct_correctly_labeled is None
    assert report.false_error_pct_of_pred is None
    assert report.macro_f1 == 0.0
    assert all(s.degenerate_flags == [VACUOUS_PRECISION] for s in report.scores)


def test_predictions_for_unknown_document(corpus, typology):
    predictions = {"nope": [PredictedAnnotation(doc_id="nope", surface="x", label="TR-OM")]}
    with pytest.raises(DocSetMismatch) as exc:
        evaluate_corpus(corpus, predictions, typology, FAST)
    assert exc.value.only_left == ["nope"]


def test_compare_identical(corpus, typology):
    predictions = read_predictions(FIXTURES / "predictions_long.tsv")
    report, _ = evaluate_corpus(corpus, predictions, typology, FAST)
    comparison = compare_runs(report, report)
    assert comparison.identical
    assert all(m.delta == 0 for m in comparison.metrics)


def test_compare_long_short(corpus, typology):
    long_report, _ = evaluate_corpus(corpus, read_predictions(FIXTURES / "predictions_long.tsv"), typology, FAST, "long")
    short_report, _ = evaluate_corpus(corpus, read_predictions(FIXTURES / "predictions_short.tsv"), typology, FAST, "short")
    comparison = compare_runs(long_report, short_report)
    deltas = {m.metric: m.delta for m in comparison.metrics}

    assert not comparison.identical
    assert deltas["pct_correctly_labeled"] == pytest.approx(0.2)
    assert deltas["macro_precision"] == pytest.approx(0.1 / 3)
    assert deltas["macro_recall"] == pytest.approx(0.0)
    assert deltas["total_pred"] == -1
    assert deltas["false_error_total"] == -1
    changed = {d.doc_id: d for d in comparison.documents}
    assert changed["fx-doc2"].n_pred == -1
    assert changed["fx-doc1"].n_label_correct == 1
    assert changed["fx-doc3"].n_label_correct == 1


def test_compare_recall_shift_is_averaged():
    base = [_score("a"), _score("b")]
    shifted = [_score("a"), _score("b").model_copy(update={"recall": 0.9})]
    matches = [_match(1, 1, 1), _match(1, 1, 1)]
    a = aggregate(base, matches, FAST)
    b = aggregate(shifted, matches, FAST)
    deltas = {m.metric: m.delta for m in compare_runs(a, b).metrics}
    assert deltas["macro_recall"] == pytest.approx(-0.1 / 2)


def test_compare_disjoint_documents():
    a = aggregate([_score("a")], [_match(1, 1, 1)], FAST)
    b = aggregate([_score("b")], [_match(1, 1, 1)], FAST)
    with pytest.raises(DocSetMismatch) as exc:
        compare_runs(a, b)
    assert (exc.value.only_left, exc.value.only_right) == (["a"], ["b"])


def test_config_fingerprint_tracks_settings():
    default = config_fingerprint(EvaluationConfig())
    exact = config_fingerprint(EvaluationConfig(normalization="exact"))
    assert default["digest"] != exact["digest"]
    assert default["bootstrap"]["n_resamples"] == 10_000
    assert config_fingerprint(EvaluationConfig())["digest"] == default["digest"]
