"""
Tests for anchoring predicted surfaces to target-text spans.
"""

from pathlib import Path

import pytest

from anchoring import EXACT, anchor_predictions, normalize_for_match, normalize_surface
from corpus import document_from_dict, parse_reference_corpus
from errors import InvalidPrecondition, InvalidSentenceIndex
from models import AnchorStatus, PredictedAnnotation
from typology import load_typology


SAMPLE_CORPUS = Path(__file__).parent.parent / "data" / "sample_corpus"

EXACT_SURFACES = [
    "contes du peuple",
    "histoires d’enfants",
    "A ce titre",
    "la lacune",
    "Elle",
    "focusse",
    "l'extraction des informations",
    "récemment attiré",
    "communauté",
    "Traitement Automatique des Langues",
    "(TAL)",
    "très peu de corpus",
    "ressources linguistiques",
    "manquent",
    "cet article",
    "combler",
    "annoté syntaxiquement",
    "sémantiquement",
    "fournit une description",
    "développées",
    "contes de fées",
    "contes de fées",
    "en présentant un corpus",
]

NORMALIZED_SURFACES = [
    "Le  travail   présenté",
    "L’analyse linguistique",
    "D’UN CORPUS",
    "ressources syntaxiques.",
    "Plus Généralement",
    "corpus existent ,",
]

UNANCHORED_SURFACES = ["contes de fées magiques"]


@pytest.fixture(scope="module")
def document():
    corpus = parse_reference_corpus(SAMPLE_CORPUS, load_typology())
    return next(d for d in corpus if d.doc_id == "deepl-001")


def _pred(surface, doc_id="deepl-001", sentence_index=None):
    return PredictedAnnotation(doc_id=doc_id, sentence_index=sentence_index, surface=surface, label="TR-OM")


def test_anchor_ladder(document):
    """Thirty surfaces: 23 found as written, 6 after normalization, 1 nowhere."""
    surfaces = EXACT_SURFACES + NORMALIZED_SURFACES + UNANCHORED_SURFACES
    anchored = anchor_predictions(document, [_pred(s) for s in surfaces])
    statuses = [p.anchor_status for p in anchored]
    assert statuses.count(AnchorStatus.EXACT) == 23
    assert statuses.count(AnchorStatus.NORMALIZED) == 6
    assert statuses.count(AnchorStatus.UNANCHORED) == 1

    text = document.target_text
    for pred in anchored:
        if pred.anchor_status == AnchorStatus.EXACT:
            start, end = pred.anchor
            assert text[start:end] == pred.surface
        elif pred.anchor_status == AnchorStatus.NORMALIZED:
            start, end = pred.anchor
            assert normalize_for_match(text[start:end]) == normalize_surface(pred.surface)
        else:
            assert pred.anchor is None


def test_repeated_surface_takes_next_occurrence(document):
    text = document.target_text
    anchored = anchor_predictions(document, [_pred("contes de fées")] * 3)
    first = text.find("contes de fées")
    second = text.find("contes de fées", first + 1)
    assert [p.anchor for p in anchored] == [
        (first, first + len("contes de fées")),
        (second, second + len("contes de fées")),
        None,
    ]


def test_exact_level_skips_normalization(document):
    anchored = anchor_predictions(document, [_pred(s) for s in NORMALIZED_SURFACES], normalization=EXACT)
    assert all(p.anchor_status == AnchorStatus.UNANCHORED for p in anchored)


def test_unique_surface(document):
    (pred,) = anchor_predictions(document, [_pred("focusse")])
    assert pred.anchor == (383, 390)
    assert pred.anchor_status == AnchorStatus.EXACT


def test_curly_apostrophe_in_target():
    doc = document_from_dict({
        "doc_id": "apos",
        "source_text": "The extraction.",
        "target_text": "Pour l’extraction des données.",
    }, load_typology())
    (pred,) = anchor_predictions(doc, [_pred("l'extraction", doc_id="apos")])
    assert pred.anchor_status == AnchorStatus.NORMALIZED
    assert pred.anchor == (5, 17)


def test_absent_surface(document):
    (pred,) = anchor_predictions(document, [_pred("quantum leap")])
    assert pred.anchor is None
    assert pred.anchor_status == AnchorStatus.UNANCHORED


def test_sentence_scope(document):
    inside, outside = anchor_predictions(document, [
        _pred("focusse", sentence_index=3),
        _pred("focusse", sentence_index=0),
    ])
    assert inside.anchor == (383, 390)
    assert outside.anchor is None


def test_sentence_index_out_of_range(document):
    with pytest.raises(InvalidSentenceIndex):
        anchor_predictions(document, [_pred("focusse", sentence_index=4)])


def test_prediction_for_other_document(document):
    with pytest.raises(InvalidPrecondition):
        anchor_predictions(document, [_pred("focusse", doc_id="deepl-002")])


def test_input_is_not_modified(document):
    preds = [_pred("focusse")]
    anchor_predictions(document, preds)
    assert preds[0].anchor is None
