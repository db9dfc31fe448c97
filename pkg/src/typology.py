"""
Error typology loading, validation and lookup.

The typology is data: a JSON tree of nodes with `name`, optional `code`,
`prompt_name`, `definition`, `aliases` and `children`. A node is selectable
as a label iff it carries a code; top-level categories never do.
"""

import json
import logging
import os
import re
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from errors import DuplicateCode, MalformedNode, MalformedTree, UnknownLabel
from models import ErrorCategory, Typology, TypologyFileSpec, TypologyNodeSpec


logger = logging.getLogger(__name__)

DEFAULT_TYPOLOGY_PATH = Path(__file__).parent.parent / "data" / "typology_default.json"

MAX_DEPTH = 12
CODE_PATTERN = re.compile(r"^[A-Z0-9]+(?:-[A-Z0-9]+)+$")

TOP_LEVEL_MARKER = "(GRANDE CATÉGORIE, NE PAS UTILISER)"
STRUCTURAL_MARKER = "(NE PAS UTILISER)"


def normalize_code(raw: str) -> str:
    """Uppercase and strip a label code."""
    return raw.strip().upper()


def default_typology_path() -> Path:
    override = os.getenv("MTEVAL_TYPOLOGY")
    return Path(override) if override else DEFAULT_TYPOLOGY_PATH


def _check_acyclic(raw: Any, seen: set[int], depth: int = 0) -> None:
    """Reject self-referencing or overly deep raw trees before schema validation."""
    if depth > MAX_DEPTH:
        raise MalformedTree(f"Typology deeper than {MAX_DEPTH} levels")
    if isinstance(raw, dict):
        if id(raw) in seen:
            raise MalformedTree("Typology node appears twice (cycle or shared node)")
        seen.add(id(raw))
        for child in raw.get("children") or []:
            _check_acyclic(child, seen, depth + 1)
    elif isinstance(raw, list):
        for item in raw:
            _check_acyclic(item, seen, depth)


def _build_node(
    spec: TypologyNodeSpec,
    parent: ErrorCategory | None,
    path: str,
    code_index: dict[str, ErrorCategory],
    aliases: dict[str, str],
) -> ErrorCategory:
    if not spec.name or not spec.name.strip():
        kind = "with children" if spec.children else "leaf"
        raise MalformedNode(f"Typology node {kind} has no name", path=path)

    code = normalize_code(spec.code) if spec.code else None
    if code is not None:
        if parent is None:
            raise MalformedNode(
                f"Top-level category {spec.name!r} must not carry a code", path=path
            )
        if not CODE_PATTERN.match(code):
            raise MalformedNode(f"Invalid code {spec.code!r}", path=path)
        if code in code_index or code in aliases:
            raise DuplicateCode(code)

    node = ErrorCategory(
        name=spec.name.strip(),
        code=code,
        definition=spec.definition.strip(),
        prompt_name=spec.prompt_name.strip() if spec.prompt_name else None,
        aliases=tuple(normalize_code(a) for a in spec.aliases),
        parent=parent,
    )
    if code is not None:
        code_index[code] = node
    if node.aliases and code is None:
        raise MalformedNode(f"Uncoded node {node.name!r} cannot declare aliases", path=path)
    for alias in node.aliases:
        if alias in code_index or alias in aliases:
            raise DuplicateCode(alias)
        aliases[alias] = code

    node.children = [
        _build_node(child, node, f"{path}/{child.name or '?'}", code_index, aliases)
        for child in spec.children
    ]
    return node


def load_typology(spec_file: str | Path | dict | None = None) -> Typology:
    """
    Load and validate a typology.

    Args:
        spec_file: path to a typology JSON file, an already-parsed dict,
            or None for the bundled default.

    Returns:
        Validated Typology
    """
    if spec_file is None:
        spec_file = default_typology_path()

    if isinstance(spec_file, dict):
        raw = spec_file
        source = "<dict>"
    else:
        source = str(spec_file)
        try:
            raw = json.loads(Path(spec_file).read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise MalformedTree(f"Typology file {source} is not valid UTF-8 JSON: {e}")

    _check_acyclic(raw, set())

    try:
        file_spec = TypologyFileSpec.model_validate(raw)
    except ValidationError as e:
        raise MalformedTree(f"Typology file {source} does not follow the schema: {e}")

    code_index: dict[str, ErrorCategory] = {}
    aliases: dict[str, str] = {}
    roots = [
        _build_node(spec, None, spec.name or "?", code_index, aliases)
        for spec in file_spec.categories
    ]

    # Aliases may only point at real codes, never at other aliases.
    for alias, target in aliases.items():
        if target not in code_index or target in aliases:
            raise MalformedTree(f"Alias {alias} does not resolve to a code")

    typology = Typology(
        name=file_spec.name,
        roots=roots,
        code_index=code_index,
        alias_table=aliases,
    )
    logger.debug(f"Loaded typology {typology.name} with {len(code_index)} codes from {source}")
    return typology


def dump_typology(typology: Typology) -> dict:
    """Serialize a typology back to the file structure."""

    def dump_node(node: ErrorCategory) -> dict:
        data: dict[str, Any] = {"name": node.name}
        if node.code:
            data["code"] = node.code
        if node.prompt_name:
            data["prompt_name"] = node.prompt_name
        if node.definition:
            data["definition"] = node.definition
        if node.aliases:
            data["aliases"] = list(node.aliases)
        if node.children:
            data["children"] = [dump_node(child) for child in node.children]
        return data

    return {
        "name": typology.name,
        "version": 1,
        "categories": [dump_node(root) for root in typology.roots],
    }


def resolve_label(typology: Typology, raw: str) -> ErrorCategory:
    """
    Resolve a raw label (code or alias, any case, padded) to its category.

    Raises:
        UnknownLabel: when nothing matches
    """
    if raw is None or not str(raw).strip():
        raise UnknownLabel(str(raw or ""))
    key = normalize_code(str(raw))
    node = typology.code_index.get(key)
    if node is None and key in typology.alias_table:
        node = typology.code_index[typology.alias_table[key]]
    if node is None:
        raise UnknownLabel(str(raw))
    return node


def canonical_code(typology: Typology, raw: str) -> str:
    return resolve_label(typology, raw).code


def iter_categories(typology: Typology, selectable_only: bool = False):
    """Nodes in document order, optionally only those carrying a code."""
    for node in typology.categories():
        if node.selectable or not selectable_only:
            yield node


def selectable_codes(typology: Typology) -> list[str]:
    return [node.code for node in iter_categories(typology, selectable_only=True)]


def render_typology_prompt_block(typology: Typology, include_definitions: bool = True) -> str:
    """
    Serialize the typology as numbered prompt text.

    Selectable nodes render as `<number> <label>_<code>`; structural nodes
    carry a do-not-use marker. With include_definitions, each definition
    follows its entry as a `* ` line.
    """
    lines: list[str] = []

    def render(node: ErrorCategory, number: str) -> None:
        if node.code:
            entry = f"{number} {node.label}_{node.code}"
        elif node.is_top_level:
            entry = f"{number} {node.label} {TOP_LEVEL_MARKER}"
        else:
            entry = f"{number} {node.label} {STRUCTURAL_MARKER}"
        lines.append(entry)
        if include_definitions and node.definition:
            lines.append(f"* {node.definition}")
        for i, child in enumerate(node.children, 1):
            render(child, f"{number}{i}.")

    for i, root in enumerate(typology.roots, 1):
        render(root, f"{i}.")
    return "\n".join(lines)
