"""
Anchoring of predicted error surfaces to character spans of the target text.

Resolution ladder per prediction, in input order:
1. exact leftmost occurrence not already claimed by an earlier prediction
2. normalized match (case-fold, collapsed whitespace, ASCII apostrophes,
   quotes and dashes, trailing sentence punctuation removed from the surface)
3. unanchored
"""

import logging

from errors import InvalidPrecondition, InvalidSentenceIndex
from models import AnchorStatus, AnnotatedDocument, PredictedAnnotation, Span


logger = logging.getLogger(__name__)

EXACT = "exact"
NORMALIZED = "normalized"
NORMALIZATION_LEVELS = (EXACT, NORMALIZED)

_CHAR_MAP = {
    **{c: "'" for c in "’‘‛ʼ′`´"},
    **{c: '"' for c in "“”„‟«»″"},
    **{c: "-" for c in "‐‑‒–—―−"},
}
TRAILING_PUNCTUATION = ".,;:!?…"


def normalize_with_map(text: str) -> tuple[str, list[int]]:
    """
    Normalize text and return, for each normalized character, the index of
    the original character it came from.
    """
    chars: list[str] = []
    index_map: list[int] = []
    previous_space = False
    for i, ch in enumerate(text):
        if ch.isspace():
            if not previous_space:
                chars.append(" ")
                index_map.append(i)
            previous_space = True
            continue
        previous_space = False
        for folded in _CHAR_MAP.get(ch, ch).casefold():
            chars.append(folded)
            index_map.append(i)
    return "".join(chars), index_map


def normalize_for_match(text: str) -> str:
    return normalize_with_map(text)[0]


def normalize_surface(surface: str) -> str:
    """Normalized form of a predicted surface used for level-2 matching."""
    return normalize_for_match(surface).strip().rstrip(TRAILING_PUNCTUATION + " ")


def _exact_occurrence(text: str, surface: str, scope: Span, claimed: set[Span]) -> Span | None:
    start, end = scope
    position = text.find(surface, start, end)
    while position != -1:
        span = (position, position + len(surface))
        if span not in claimed:
            return span
        position = text.find(surface, position + 1, end)
    return None


def _normalized_occurrence(text: str, surface: str, scope: Span, claimed: set[Span]) -> Span | None:
    needle = normalize_surface(surface)
    if not needle:
        return None
    start, end = scope
    haystack, index_map = normalize_with_map(text[start:end])
    position = haystack.find(needle)
    while position != -1:
        last = position + len(needle) - 1
        span = (start + index_map[position], start + index_map[last] + 1)
        if span not in claimed:
            return span
        position = haystack.find(needle, position + 1)
    return None


def anchor_predictions(
    doc: AnnotatedDocument,
    preds: list[PredictedAnnotation],
    normalization: str = NORMALIZED,
) -> list[PredictedAnnotation]:
    """
    Give each prediction an anchor span where possible.

    Args:
        doc: the reference document
        preds: predictions for doc, in the order they were emitted
        normalization: "exact" stops after level 1; "normalized" tries both

    Returns:
        New predictions with anchor and anchor_status set

    Raises:
        InvalidSentenceIndex: a prediction points past the last sentence
    """
    if normalization not in NORMALIZATION_LEVELS:
        raise ValueError(f"Unknown normalization level: {normalization}")

    text = doc.target_text
    sentences = doc.target_sentences
    claimed: set[Span] = set()
    anchored: list[PredictedAnnotation] = []

    for pred in preds:
        if pred.doc_id != doc.doc_id:
            raise InvalidPrecondition(
                f"Prediction for {pred.doc_id} passed with document {doc.doc_id}",
                doc_id=pred.doc_id,
            )
        if pred.sentence_index is not None:
            if not 0 <= pred.sentence_index < len(sentences):
                raise InvalidSentenceIndex(doc.doc_id, pred.sentence_index, len(sentences))
            scope = sentences[pred.sentence_index]
        else:
            scope = (0, len(text))

        span = _exact_occurrence(text, pred.surface, scope, claimed) if pred.surface else None
        status = AnchorStatus.EXACT
        if span is None and normalization == NORMALIZED:
            span = _normalized_occurrence(text, pred.surface, scope, claimed)
            status = AnchorStatus.NORMALIZED
        if span is None:
            logger.info(f"{doc.doc_id}: could not anchor surface {pred.surface!r}")
            anchored.append(pred.model_copy(update={
                "anchor": None,
                "anchor_status": AnchorStatus.UNANCHORED,
            }))
            continue

        claimed.add(span)
        anchored.append(pred.model_copy(update={"anchor": span, "anchor_status": status}))

    return anchored
