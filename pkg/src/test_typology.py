"""
Tests for typology loading, label resolution and prompt rendering.
"""

import json

import pytest

from errors import DuplicateCode, MalformedNode, MalformedTree, UnknownLabel
from typology import (
    DEFAULT_TYPOLOGY_PATH,
    MAX_DEPTH,
    canonical_code,
    dump_typology,
    iter_categories,
    load_typology,
    render_typology_prompt_block,
    resolve_label,
    selectable_codes,
)


def _tree(*children, name="Langue"):
    return {"name": "t", "categories": [{"name": name, "children": list(children)}]}


def test_default_typology_shape():
    """The bundled tree has three uncoded roots and 42 selectable codes."""
    typology = load_typology()
    assert [root.name for root in typology.roots] == ["Content transfer", "Language", "Tools"]
    assert all(root.code is None for root in typology.roots)
    codes = selectable_codes(typology)
    assert len(codes) == 42
    assert len(set(codes)) == 42
    assert codes[:2] == ["TR-OM", "TR-AD"]
    assert sum(1 for c in codes if c.startswith("LA-")) == 29
    assert sum(1 for c in codes if c.startswith("LA-TL-")) == 10
    assert sum(1 for c in codes if c.startswith("OU-")) == 4


def test_iter_categories_includes_structural_nodes():
    typology = load_typology()
    all_nodes = list(iter_categories(typology))
    coded = list(iter_categories(typology, selectable_only=True))
    assert len(all_nodes) > len(coded)
    assert all(node.selectable for node in coded)


def test_resolve_label_normalizes_case_and_padding():
    typology = load_typology()
    assert resolve_label(typology, " tr-om ").code == "TR-OM"
    assert resolve_label(typology, "LA-TL-ING").name


def test_resolve_label_alias():
    """The alias printed in the prompt resolves to the canonical code."""
    typology = load_typology()
    assert resolve_label(typology, "TR-TI-TF").code == "TI-TF"


@pytest.mark.parametrize("raw", ["XX-YY", "", "   ", "TR"])
def test_resolve_label_unknown(raw):
    with pytest.raises(UnknownLabel):
        resolve_label(load_typology(), raw)


def test_duplicate_code_rejected():
    spec = _tree(
        {"name": "A", "code": "LA-AA"},
        {"name": "B", "code": "la-aa"},
    )
    with pytest.raises(DuplicateCode) as exc:
        load_typology(spec)
    assert exc.value.code == "LA-AA"


def test_alias_colliding_with_code_rejected():
    spec = _tree(
        {"name": "A", "code": "LA-AA", "aliases": ["LA-BB"]},
        {"name": "B", "code": "LA-BB"},
    )
    with pytest.raises(DuplicateCode):
        load_typology(spec)


def test_coded_top_level_rejected():
    spec = {"name": "t", "categories": [{"name": "Langue", "code": "LA-XX"}]}
    with pytest.raises(MalformedNode):
        load_typology(spec)


def test_nameless_node_rejected():
    with pytest.raises(MalformedNode):
        load_typology(_tree({"code": "LA-AA"}))


def test_invalid_code_rejected():
    with pytest.raises(MalformedNode):
        load_typology(_tree({"name": "A", "code": "omission"}))


def test_unknown_field_is_malformed_tree():
    with pytest.raises(MalformedTree):
        load_typology(_tree({"name": "A", "code": "LA-AA", "severity": "major"}))


def test_self_referencing_tree_rejected():
    node = {"name": "Loop"}
    node["children"] = [node]
    with pytest.raises(MalformedTree):
        load_typology({"name": "t", "categories": [node]})


def test_too_deep_tree_rejected():
    leaf = {"name": "leaf", "code": "LA-ZZ"}
    for i in range(MAX_DEPTH + 2):
        leaf = {"name": f"level{i}", "children": [leaf]}
    with pytest.raises(MalformedTree):
        load_typology({"name": "t", "categories": [leaf]})


def test_invalid_json_file(tmp_path):
    path = tmp_path / "typology.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(MalformedTree):
        load_typology(path)


def test_environment_override(tmp_path, monkeypatch):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(_tree({"name": "A", "code": "LA-AA"})), encoding="utf-8")
    monkeypatch.setenv("MTEVAL_TYPOLOGY", str(path))
    assert selectable_codes(load_typology()) == ["LA-AA"]


def test_dump_then_load_preserves_tree():
    typology = load_typology(DEFAULT_TYPOLOGY_PATH)
    reloaded = load_typology(dump_typology(typology))
    assert selectable_codes(reloaded) == selectable_codes(typology)
    assert reloaded.alias_table == typology.alias_table
    assert render_typology_prompt_block(reloaded) == render_typology_prompt_block(typology)


def test_prompt_block_long():
    """Entries are numbered, coded as name_CODE, with definitions as bullet lines."""
    block = render_typology_prompt_block(load_typology(), include_definitions=True)
    lines = block.splitlines()
    assert lines[0] == "1. Transfert-contenu (GRANDE CATÉGORIE, NE PAS UTILISER)"
    assert lines[1] == "1.1. Omission_TR-OM"
    assert lines[2].startswith("* Une omission se produit")
    assert "1.2. Rajout_TR-AD" in lines
    assert "3. Outils (GRANDE CATÉGORIE, NE PAS UTILISER)" in lines


def test_prompt_block_short_drops_only_definitions():
    typology = load_typology()
    long_lines = render_typology_prompt_block(typology, include_definitions=True).splitlines()
    short_lines = render_typology_prompt_block(typology, include_definitions=False).splitlines()
    assert short_lines == [line for line in long_lines if not line.startswith("* ")]
    assert "1.1. Omission_TR-OM" in short_lines


def test_named_terminology_code():
    typology = load_typology()
    assert resolve_label(typology, "LA-TL-INS").name == "Incorrect-choice-terminology"
    assert resolve_label(typology, " la-tl-ins ").name == "Incorrect-choice-terminology"


def test_single_node_typology():
    typology = load_typology(_tree({"name": "Omission", "code": "TR-OM", "definition": "Il manque une idée."}))
    assert selectable_codes(typology) == ["TR-OM"]
    assert render_typology_prompt_block(typology).splitlines() == [
        "1. Langue (GRANDE CATÉGORIE, NE PAS UTILISER)",
        "1.1. Omission_TR-OM",
        "* Il manque une idée.",
    ]


def test_canonical_code():
    typology = load_typology()
    assert canonical_code(typology, " la-tl-ing ") == "LA-TL-ING"
    assert canonical_code(typology, "TR-TI-TF") == "TI-TF"
    with pytest.raises(UnknownLabel):
        canonical_code(typology, "ZZ")
