"""
Reference corpus parsing, serialization and statistics.

Reference files are standoff JSON: one object per translation with
doc_id, mt_system, source_text, target_text, sentences and errors. Offsets
are Unicode code points (Python string indices), half-open.
"""

import json
import logging
import re
from pathlib import Path
from statistics import fmean
from typing import Iterable

import pandas as pd
from pydantic import ValidationError

from errors import (
    DuplicateError,
    EmptyCorpus,
    InvalidDocument,
    InvalidSpan,
    MTEvalError,
    UnknownLabel,
)
from models import (
    AnnotatedDocument,
    CorpusStats,
    DocumentFileSpec,
    MTSystem,
    PredictedAnnotation,
    ReferenceError,
    SentencePair,
    SentenceSpec,
    Span,
    Typology,
)
from typology import resolve_label


logger = logging.getLogger(__name__)

PREDICTION_COLUMNS = ["doc_id", "sentence_index", "surface", "label", "explanation"]

ABBREVIATIONS = ("e.g.", "i.e.", "cf.", "etc.")
_TERMINAL = re.compile(r"[.!?…]+[»\"”’)\]]*")
_INLINE_ERROR = re.compile(r"\[([^\[\]]+)\]\{([^{}]*)\}")


# --- Sentences ---

def split_sentences(text: str) -> list[Span]:
    """
    Split text into sentence spans.

    A boundary follows '.', '!', '?' or '…' when the next non-space
    character is uppercase or the text ends. "e.g.", "i.e.", "cf." and
    "etc." never end a sentence. Spans exclude surrounding whitespace.
    """
    spans: list[Span] = []
    start = 0

    def close(end: int) -> None:
        segment = text[start:end]
        left = len(segment) - len(segment.lstrip())
        right = len(segment.rstrip())
        if right > left:
            spans.append((start + left, start + right))

    for match in _TERMINAL.finditer(text):
        end = match.end()
        rest = text[end:]
        if rest.strip():
            following = re.match(r"\s+(\S)", rest)
            if not following or not following.group(1).isupper():
                continue
        preceding = text[start:end].rstrip("»\"”’)]")
        if any(preceding.lower().endswith(abbr) and _word_start(preceding, abbr) for abbr in ABBREVIATIONS):
            continue
        close(end)
        start = end

    close(len(text))
    return spans


def _word_start(preceding: str, abbr: str) -> bool:
    cut = len(preceding) - len(abbr)
    return cut == 0 or not preceding[cut - 1].isalnum()


def _normalize_system(raw: str) -> str:
    for system in (MTSystem.DEEPL, MTSystem.CHATGPT):
        if raw.strip().lower() == system.value.lower():
            return system.value
    return raw.strip() or MTSystem.OTHER.value


# --- Validation ---

def _check_errors(spec: DocumentFileSpec, typology: Typology) -> tuple[list[ReferenceError], list[MTEvalError]]:
    length = len(spec.target_text)
    problems: list[MTEvalError] = []
    errors: list[tuple[ReferenceError, int]] = []

    for index, raw in enumerate(spec.errors):
        if not (0 <= raw.start < raw.end <= length):
            problems.append(InvalidSpan(spec.doc_id, index, raw.start, raw.end, length))
            continue
        if not raw.labels:
            problems.append(InvalidDocument(f"Error {index} in {spec.doc_id} has no labels",
                                            doc_id=spec.doc_id, index=index))
            continue
        labels: list[str] = []
        for label in raw.labels:
            try:
                code = resolve_label(typology, label).code
            except UnknownLabel:
                problems.append(UnknownLabel(label, doc_id=spec.doc_id, index=index))
                continue
            if code not in labels:
                labels.append(code)
        if labels:
            errors.append((ReferenceError(start=raw.start, end=raw.end, labels=tuple(labels)), index))

    # Stable sort keeps file order among equal spans
    errors.sort(key=lambda item: (item[0].start, item[0].end))
    for (previous, first), (error, index) in zip(errors, errors[1:]):
        if error.span == previous.span:
            problems.append(DuplicateError(spec.doc_id, index, error.start, error.end, earlier_index=first))
    return [error for error, _ in errors], problems


def _check_sentences(spec: DocumentFileSpec) -> tuple[list[SentencePair], list[MTEvalError]]:
    problems: list[MTEvalError] = []
    if spec.sentences is None:
        targets = split_sentences(spec.target_text)
        sources = split_sentences(spec.source_text)
        if len(sources) != len(targets):
            sources = [None] * len(targets)
        return [SentencePair(source=s, target=t) for s, t in zip(sources, targets)], problems

    pairs = [
        SentencePair(source=item.source, target=item.target)
        if isinstance(item, SentenceSpec)
        else SentencePair(target=tuple(item))
        for item in spec.sentences
    ]
    covered = [False] * len(spec.target_text)
    previous_end = 0
    for index, pair in enumerate(pairs):
        start, end = pair.target
        if not (previous_end <= start < end <= len(spec.target_text)):
            problems.append(InvalidDocument(
                f"Sentence {index} of {spec.doc_id} is out of order or out of bounds",
                doc_id=spec.doc_id, index=index))
            continue
        if pair.source is not None and not (0 <= pair.source[0] < pair.source[1] <= len(spec.source_text)):
            problems.append(InvalidDocument(
                f"Source span of sentence {index} of {spec.doc_id} is out of bounds",
                doc_id=spec.doc_id, index=index))
        for i in range(start, end):
            covered[i] = True
        previous_end = end
    uncovered = [i for i, ch in enumerate(spec.target_text) if not covered[i] and not ch.isspace()]
    if uncovered and not problems:
        problems.append(InvalidDocument(
            f"Sentences of {spec.doc_id} leave text uncovered at offset {uncovered[0]}",
            doc_id=spec.doc_id))
    return pairs, problems


def check_document(raw: dict, typology: Typology, where: str = "") -> tuple[AnnotatedDocument | None, list[MTEvalError]]:
    """Validate one raw document; returns the document (if clean) and every problem found."""
    try:
        spec = DocumentFileSpec.model_validate(raw)
    except ValidationError as e:
        doc_id = raw.get("doc_id") if isinstance(raw, dict) else None
        return None, [InvalidDocument(f"{where or doc_id}: not a reference document: {e}", doc_id=doc_id)]

    errors, problems = _check_errors(spec, typology)
    sentences, sentence_problems = _check_sentences(spec)
    problems.extend(sentence_problems)
    if problems:
        return None, problems

    document = AnnotatedDocument(
        doc_id=spec.doc_id,
        mt_system=_normalize_system(spec.mt_system),
        source_text=spec.source_text,
        target_text=spec.target_text,
        sentence_alignment=tuple(sentences),
        reference_errors=tuple(errors),
    )
    return document, []


def document_from_dict(raw: dict, typology: Typology) -> AnnotatedDocument:
    document, problems = check_document(raw, typology)
    if problems:
        raise problems[0]
    return document


# --- Reading and writing ---

def _corpus_files(path: Path) -> list[Path]:
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix == ".json")
    return [path]


def _raw_documents(file: Path) -> list[dict]:
    try:
        data = json.loads(file.read_text(encoding="utf-8"))
    except UnicodeDecodeError as e:
        raise InvalidDocument(f"{file.name}: not UTF-8: {e}", file=file.name)
    except json.JSONDecodeError as e:
        raise InvalidDocument(f"{file.name}: invalid JSON: {e}", file=file.name)
    return data if isinstance(data, list) else [data]


def iter_corpus(path: str | Path, typology: Typology) -> Iterable[tuple[str, AnnotatedDocument | None, list[MTEvalError]]]:
    """Yield (file name, document or None, problems) for every document under path."""
    for file in _corpus_files(Path(path)):
        try:
            raws = _raw_documents(file)
        except MTEvalError as e:
            yield file.name, None, [e]
            continue
        for raw in raws:
            document, problems = check_document(raw, typology, where=file.name)
            yield file.name, document, problems


def parse_reference_corpus(path: str | Path, typology: Typology) -> list[AnnotatedDocument]:
    """
    Parse and validate a reference corpus (a directory of JSON files or one file).

    Raises the first problem found; use iter_corpus to collect all of them.
    """
    documents: list[AnnotatedDocument] = []
    seen: set[str] = set()
    for name, document, problems in iter_corpus(path, typology):
        if problems:
            raise problems[0]
        if document.doc_id in seen:
            raise InvalidDocument(f"{name}: doc_id {document.doc_id} appears twice",
                                  doc_id=document.doc_id)
        seen.add(document.doc_id)
        documents.append(document)
    logger.info(f"Parsed {len(documents)} documents from {path}")
    return documents


def serialize_document(document: AnnotatedDocument) -> dict:
    return {
        "doc_id": document.doc_id,
        "mt_system": document.mt_system,
        "source_text": document.source_text,
        "target_text": document.target_text,
        "sentences": [
            {"source": list(pair.source) if pair.source else None, "target": list(pair.target)}
            for pair in document.sentence_alignment
        ],
        "errors": [
            {"start": e.start, "end": e.end, "labels": list(e.labels)}
            for e in document.reference_errors
        ],
    }


def write_reference_corpus(documents: list[AnnotatedDocument], directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for document in documents:
        file = directory / f"{document.doc_id}.json"
        file.write_text(
            json.dumps(serialize_document(document), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
        written.append(file)
    return written


def import_inline(
    markup: str,
    doc_id: str,
    typology: Typology,
    mt_system: str = MTSystem.OTHER.value,
    source_text: str = "",
) -> AnnotatedDocument:
    """
    Convert inline markup (`[span]{CODE, CODE}`) into a standoff document.

    Best effort: nested brackets are not supported.
    """
    pieces: list[str] = []
    errors: list[dict] = []
    cursor = 0
    offset = 0
    for match in _INLINE_ERROR.finditer(markup):
        before = markup[cursor:match.start()]
        pieces.append(before)
        offset += len(before)
        span_text = match.group(1)
        labels = [code.strip() for code in match.group(2).split(",") if code.strip()]
        errors.append({"start": offset, "end": offset + len(span_text), "labels": labels})
        pieces.append(span_text)
        offset += len(span_text)
        cursor = match.end()
    pieces.append(markup[cursor:])

    return document_from_dict({
        "doc_id": doc_id,
        "mt_system": mt_system,
        "source_text": source_text,
        "target_text": "".join(pieces),
        "errors": errors,
    }, typology)


# --- Statistics ---

def corpus_stats(documents: list[AnnotatedDocument], mt_system: str | None = None) -> CorpusStats:
    """
    Compute corpus statistics. Lengths are code points; words are
    whitespace-separated tokens of the target texts.
    """
    if not documents:
        raise EmptyCorpus()

    span_lengths = [e.end - e.start for d in documents for e in d.reference_errors]
    label_counts = [len(e.labels) for d in documents for e in d.reference_errors]
    n_errors = len(span_lengths)

    return CorpusStats(
        mt_system=mt_system,
        n_docs=len(documents),
        n_errors=n_errors,
        mean_errors_per_doc=n_errors / len(documents),
        span_len_min=min(span_lengths, default=0),
        span_len_max=max(span_lengths, default=0),
        span_len_mean=fmean(span_lengths) if span_lengths else 0.0,
        labels_per_error_min=min(label_counts, default=0),
        labels_per_error_max=max(label_counts, default=0),
        labels_per_error_mean=fmean(label_counts) if label_counts else 0.0,
        n_words=sum(len(d.target_text.split()) for d in documents),
    )


def stats_by_system(documents: list[AnnotatedDocument]) -> dict[str, CorpusStats]:
    """One CorpusStats block per MT system, keyed and ordered by system name."""
    if not documents:
        raise EmptyCorpus()
    systems = sorted({d.mt_system for d in documents})
    return {
        system: corpus_stats([d for d in documents if d.mt_system == system], mt_system=system)
        for system in systems
    }


# --- Predictions ---

def _optional_int(value, where: str) -> int | None:
    if value is None or (isinstance(value, str) and not value.strip()):
        return None
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise InvalidDocument(f"{where}: sentence_index {value!r} is not an integer")
    try:
        number = int(value)
    except (TypeError, ValueError):
        raise InvalidDocument(f"{where}: sentence_index {value!r} is not an integer")
    if number < 0:
        raise InvalidDocument(f"{where}: sentence_index {number} is negative")
    return number


def _prediction_from_record(record, where: str) -> PredictedAnnotation:
    if not isinstance(record, dict):
        raise InvalidDocument(f"{where}: expected an object, got {type(record).__name__}")
    # Short TSV rows come back with NaN cells
    record = {key: None if isinstance(value, float) and pd.isna(value) else value for key, value in record.items()}
    doc_id = record.get("doc_id")
    if doc_id is None or not str(doc_id).strip():
        raise InvalidDocument(f"{where}: missing doc_id")
    explanation = record.get("explanation")
    return PredictedAnnotation(
        doc_id=str(doc_id),
        sentence_index=_optional_int(record.get("sentence_index"), where),
        surface=str(record.get("surface") or ""),
        label=str(record.get("label") or ""),
        explanation=str(explanation) if explanation not in (None, "") else None,
    )


def _prediction_records(path: Path) -> tuple[list, int]:
    """Raw records and the line number of the first one (TSV) or 0 (JSON)."""
    try:
        if path.suffix == ".json":
            records = json.loads(path.read_text(encoding="utf-8"))
            if not isinstance(records, list):
                raise InvalidDocument(f"{path.name}: expected a JSON list of predictions", file=path.name)
            return records, 0
        frame = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False, encoding="utf-8")
    except UnicodeDecodeError as e:
        raise InvalidDocument(f"{path.name}: not UTF-8: {e}", file=path.name)
    except json.JSONDecodeError as e:
        raise InvalidDocument(f"{path.name}: invalid JSON: {e}", file=path.name)
    except pd.errors.ParserError as e:
        raise InvalidDocument(f"{path.name}: malformed table: {e}", file=path.name)
    except pd.errors.EmptyDataError:
        raise InvalidDocument(f"{path.name}: empty file, expected a header row", file=path.name)
    missing = [c for c in ("doc_id", "surface", "label") if c not in frame.columns]
    if missing:
        raise InvalidDocument(f"{path.name}: missing columns {', '.join(missing)}", file=path.name)
    # Header is line 1
    return frame.to_dict(orient="records"), 2


def read_predictions(path: str | Path) -> dict[str, list[PredictedAnnotation]]:
    """
    Read predicted annotations grouped by doc_id, keeping file order.

    Accepts a tab-separated table with header doc_id, sentence_index,
    surface, label, explanation, or a JSON list of objects with those fields.

    Raises:
        InvalidDocument: unreadable file or a malformed record, naming the
            file and the line (TSV) or list position (JSON)
    """
    path = Path(path)
    records, first_line = _prediction_records(path)

    grouped: dict[str, list[PredictedAnnotation]] = {}
    for position, record in enumerate(records):
        where = f"{path.name} line {first_line + position}" if first_line else f"{path.name} item {position}"
        prediction = _prediction_from_record(record, where)
        grouped.setdefault(prediction.doc_id, []).append(prediction)
    return grouped


def write_predictions(predictions: Iterable[PredictedAnnotation], path: str | Path) -> Path:
    """Write predictions as the tab-separated table read by read_predictions."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [
        {
            "doc_id": p.doc_id,
            "sentence_index": "" if p.sentence_index is None else str(p.sentence_index),
            "surface": p.surface,
            "label": p.label,
            "explanation": p.explanation or "",
        }
        for p in predictions
    ]
    frame = pd.DataFrame(rows, columns=PREDICTION_COLUMNS)
    frame.to_csv(path, sep="\t", index=False, lineterminator="\n")
    return path
