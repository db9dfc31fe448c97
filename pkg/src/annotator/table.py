"""
Parse the annotator's final table into predictions, and render predictions back.

The parser is tolerant: pipe- or tab-delimited rows, markdown borders and
separator rows, French or English header synonyms, and no header at all
(columns are then read as sentence, error, code, explanation).
"""

import logging
import re
import unicodedata
from dataclasses import dataclass, field

from errors import ParseFailure
from models import PredictedAnnotation
from typology import normalize_code


logger = logging.getLogger(__name__)

SENTENCE = "sentence"
SURFACE = "surface"
LABEL = "label"
EXPLANATION = "explanation"

DEFAULT_COLUMNS = [SENTENCE, SURFACE, LABEL, EXPLANATION]

HEADER_SYNONYMS = {
    SENTENCE: {"phrase", "numero", "n", "no", "num", "sentence", "number", "id", "ligne"},
    SURFACE: {"erreur", "error", "span", "segment", "passage", "texte", "text", "extrait"},
    LABEL: {"code", "label", "category", "categorie", "type", "type d'erreur", "error type", "tag"},
    EXPLANATION: {"explication", "explanation", "comment", "commentaire", "justification", "remarque"},
}

NO_ERROR = re.compile(r"^(aucune erreur|pas d['’]erreurs?|no errors?|none|aucune|n/?a|-+|—)\.?$", re.IGNORECASE)
CODE = re.compile(r"(?<![A-Z0-9-])[A-Z0-9]+(?:-[A-Z0-9]+)+(?![A-Z0-9-])", re.IGNORECASE)
SEPARATOR_CELL = re.compile(r"^:?-{2,}:?$")
LITERAL = "`"

# Characters str.splitlines breaks on, written as escapes inside a cell
_LINE_BREAKS = {"\n": "\\n", "\r": "\\r"}
_LINE_BREAKS.update({c: f"\\u{ord(c):04x}" for c in "\v\f\x1c\x1d\x1e\x85\u2028\u2029"})
_UNESCAPE = re.compile(r"\\(\\|\||n|r|u[0-9a-fA-F]{4})")
QUOTES = "\"'«»“”„‘’`"


@dataclass
class TableParse:
    predictions: list[PredictedAnnotation] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)


def _fold(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text.casefold().replace("’", "'"))
    stripped = "".join(c for c in decomposed if not unicodedata.combining(c))
    return re.sub(r"[\s*_:#.°]+", " ", stripped).strip()


def _split_pipes(line: str) -> list[str]:
    """Split on unescaped pipes; escapes are left in place for _unescape."""
    cells, current, i = [], [], 0
    while i < len(line):
        ch = line[i]
        if ch == "\\" and i + 1 < len(line):
            current.append(line[i:i + 2])
            i += 2
            continue
        if ch == "|":
            cells.append("".join(current))
            current = []
        else:
            current.append(ch)
        i += 1
    cells.append("".join(current))
    return cells


def _unescape(text: str) -> str:
    def replace(match: re.Match) -> str:
        code = match.group(1)
        if code.startswith("u"):
            return chr(int(code[1:], 16))
        return {"n": "\n", "r": "\r"}.get(code, code)

    return _UNESCAPE.sub(replace, text)


def _split_row(line: str) -> list[str] | None:
    """Raw (still escaped) cells of a table row, or None when the line is not one."""
    line = line.strip()
    if "|" in line:
        cells = _split_pipes(line)
        if len(cells) > 1 and not cells[0].strip():
            cells = cells[1:]
        if len(cells) > 1 and not cells[-1].strip():
            cells = cells[:-1]
        cells = [c.strip() for c in cells]
    elif "\t" in line:
        cells = [c.strip() for c in line.split("\t")]
    else:
        return None
    return cells if len(cells) >= 2 else None


def _header_columns(cells: list[str]) -> list[str | None] | None:
    columns: list[str | None] = []
    for cell in cells:
        folded = _fold(cell)
        columns.append(next((name for name, words in HEADER_SYNONYMS.items() if folded in words), None))
    found = [c for c in columns if c]
    if len(found) >= 2 and len(set(found)) == len(found):
        return columns
    return None


def _clean_surface(text: str) -> str:
    text = text.strip().strip("*").strip()
    while len(text) >= 2 and text[0] in QUOTES and text[-1] in QUOTES:
        text = text[1:-1].strip()
    return text


def _is_literal(cell: str) -> bool:
    return len(cell) >= 2 and cell[0] == LITERAL and cell[-1] == LITERAL


def _read_surface(cell: str) -> tuple[str, bool]:
    """The surface in a raw cell, and whether it was written as a literal."""
    if _is_literal(cell):
        return _unescape(cell[1:-1]), True
    return _clean_surface(_unescape(cell)), False


def _sentence_index(cell: str) -> int | None:
    match = re.search(r"\d+", cell)
    if not match:
        return None
    number = int(match.group())
    return number - 1 if number >= 1 else None


def _codes(cell: str) -> list[str]:
    """Codes in a label cell, uppercase-written ones first."""
    found = sorted(CODE.findall(cell), key=lambda c: c != c.upper())
    return [normalize_code(c) for c in found]


def parse_table(raw: str, doc_id: str = "") -> TableParse:
    """
    Parse a table response, returning predictions plus per-row diagnostics.

    A header row is only recognized before the first data row of a table.
    Surfaces wrapped in backticks are taken verbatim.

    Raises:
        ParseFailure: no table rows in the text
    """
    result = TableParse()
    columns: list[str | None] = list(DEFAULT_COLUMNS)
    saw_table = False
    in_body = False

    for line_number, line in enumerate(raw.splitlines(), start=1):
        cells = _split_row(line)
        if cells is None:
            in_body = False
            continue
        saw_table = True
        if all(SEPARATOR_CELL.match(c) or not c for c in cells):
            continue
        if not in_body:
            in_body = True
            header = _header_columns(cells)
            if header is not None:
                columns = header
                continue

        row = {}
        for name, cell in zip(columns, cells):
            if name and name not in row:
                row[name] = cell

        surface, literal = _read_surface(row.get(SURFACE, ""))
        label_cell = _unescape(row.get(LABEL, ""))
        if not literal and (NO_ERROR.match(surface) or (not surface and not label_cell)):
            continue
        if NO_ERROR.match(label_cell.strip()):
            continue

        codes = _codes(label_cell)
        if not codes:
            result.diagnostics.append(f"line {line_number}: no error code in row {line.strip()!r}")
            continue
        if not surface:
            result.diagnostics.append(f"line {line_number}: empty error segment in row {line.strip()!r}")
            continue
        if len(codes) > 1:
            result.diagnostics.append(f"line {line_number}: several codes, kept {codes[0]}")

        explanation = _unescape(row.get(EXPLANATION, "")).strip() or None
        result.predictions.append(PredictedAnnotation(
            doc_id=doc_id,
            sentence_index=_sentence_index(row.get(SENTENCE, "")),
            surface=surface,
            label=codes[0],
            explanation=explanation,
        ))

    if not saw_table:
        raise ParseFailure("No annotation table found in response", raw=raw, doc_id=doc_id or None)
    return result


def parse_annotation_table(raw: str, doc_id: str = "") -> list[PredictedAnnotation]:
    """
    Parse the annotator's table into predictions (sentence indices become 0-based).

    Dropped rows are logged as warnings.

    Raises:
        ParseFailure: no table rows in the text
    """
    result = parse_table(raw, doc_id)
    for diagnostic in result.diagnostics:
        logger.warning(f"{doc_id or 'table'}: {diagnostic}")
    return result.predictions


def _escape(text: str) -> str:
    text = text.replace("\\", "\\\\").replace("|", "\\|")
    return "".join(_LINE_BREAKS.get(c, c) for c in text)


def _render_surface(surface: str) -> str:
    escaped = _escape(surface)
    if (
        _clean_surface(surface) != surface
        or NO_ERROR.match(surface)
        or surface.startswith(LITERAL)
        or surface.endswith(LITERAL)
    ):
        return f"{LITERAL}{escaped}{LITERAL}"
    return escaped


def render_annotation_table(predictions: list[PredictedAnnotation]) -> str:
    """
    Render predictions as the markdown table parse_annotation_table reads.

    Surfaces the tolerant reader would alter are written between backticks.
    """
    lines = ["| Phrase | Erreur | Code | Explication |", "|---|---|---|---|"]
    for p in predictions:
        sentence = "" if p.sentence_index is None else str(p.sentence_index + 1)
        explanation = _escape(p.explanation or "")
        lines.append(f"| {sentence} | {_render_surface(p.surface)} | {_escape(p.label)} | {explanation} |")
    return "\n".join(lines) + "\n"
