"""
Tests for one-to-one span matching and label correctness.
"""

import random
from functools import lru_cache

import pytest

from errors import UnknownLabel
from models import AnchorStatus, MatchPair, PredictedAnnotation, ReferenceError
from span_matching import label_correct, match_document, overlap_len, overlaps
from typology import load_typology


@pytest.fixture(scope="module")
def typology():
    return load_typology()


def _refs(*spans, labels=("TR-OM",)):
    return [ReferenceError(start=s, end=e, labels=tuple(labels)) for s, e in spans]


def _preds(*spans, label="TR-OM"):
    return [
        PredictedAnnotation(
            doc_id="d",
            surface="x",
            label=label,
            anchor=span,
            anchor_status=AnchorStatus.UNANCHORED if span is None else AnchorStatus.EXACT,
        )
        for span in spans
    ]


def test_overlaps():
    assert overlaps((25, 40), (30, 35))
    assert not overlaps((0, 5), (5, 10))
    assert overlaps((10, 15), (14, 20))
    assert overlap_len((10, 15), (14, 20)) == 1
    assert overlap_len((0, 5), (5, 10)) == 0


def test_tie_goes_to_first_reference():
    result = match_document(_refs((0, 5), (10, 15)), _preds((3, 12)))
    assert result.pairs == [MatchPair(ref_index=0, pred_index=0, overlap_len=2)]
    assert result.unmatched_refs == [1]
    assert result.unmatched_preds == []


def test_identity():
    spans = [(0, 4), (6, 9), (9, 20)]
    result = match_document(_refs(*spans), _preds(*spans))
    assert [(p.ref_index, p.pred_index) for p in result.pairs] == [(0, 0), (1, 1), (2, 2)]
    assert result.unmatched_refs == [] and result.unmatched_preds == []


def test_disjoint():
    result = match_document(_refs((0, 4), (10, 12)), _preds((4, 10), (20, 25)))
    assert result.pairs == []
    assert result.unmatched_refs == [0, 1]
    assert result.unmatched_preds == [0, 1]


def test_cardinality_beats_overlap():
    """A long prediction must not swallow the reference a shorter one needs."""
    refs = _refs((0, 10), (12, 14))
    preds = _preds((0, 14), (2, 4))
    result = match_document(refs, preds)
    assert [(p.ref_index, p.pred_index) for p in result.pairs] == [(0, 1), (1, 0)]
    assert result.optimum_cardinality == 2


def test_overlap_breaks_cardinality_ties():
    refs = _refs((0, 10))
    preds = _preds((8, 12), (2, 9))
    result = match_document(refs, preds)
    assert [(p.ref_index, p.pred_index) for p in result.pairs] == [(0, 1)]
    assert result.optimum_overlap == 7


def test_unanchored_never_match():
    result = match_document(_refs((0, 10)), _preds(None, (5, 6)))
    assert [(p.ref_index, p.pred_index) for p in result.pairs] == [(0, 1)]
    assert result.unmatched_preds == [0]
    assert result.n_preds == 2


def test_label_counts(typology):
    refs = [
        ReferenceError(start=0, end=5, labels=("TR-SI-UT", "TR-SI-TL", "LA-TL-ING")),
        ReferenceError(start=10, end=15, labels=("LA-HY-PU",)),
    ]
    preds = _preds((0, 5), label="tr-si-tl") + _preds((10, 15), label="TR-OM")
    result = match_document(refs, preds, typology=typology)
    assert result.n_label_correct == 1


def test_label_correct(typology):
    refs = [ReferenceError(start=0, end=7, labels=("TR-SI-UT", "TR-SI-TL", "LA-TL-ING"))]
    pair = MatchPair(ref_index=0, pred_index=0, overlap_len=7)
    assert label_correct(pair, refs, _preds((0, 7), label="LA-TL-ING"), typology)
    assert label_correct(pair, refs, _preds((0, 7), label="tr-si-tl"), typology)
    assert not label_correct(pair, refs, _preds((0, 7), label="TR-OM"), typology)
    refs_alias = [ReferenceError(start=0, end=7, labels=("TI-TF",))]
    assert label_correct(pair, refs_alias, _preds((0, 7), label="TR-TI-TF"), typology)


def test_unknown_predicted_label(typology):
    refs = [ReferenceError(start=0, end=7, labels=("LA-HY-PU",))]
    pair = MatchPair(ref_index=0, pred_index=0, overlap_len=7)
    with pytest.raises(UnknownLabel):
        label_correct(pair, refs, _preds((0, 7), label="ZZ-QQ"), typology)
    result = match_document(refs, _preds((0, 7), label="ZZ-QQ"), typology=typology)
    assert len(result.pairs) == 1
    assert result.n_label_correct == 0


def test_trace_records_decisions():
    result = match_document(_refs((0, 5), (10, 15)), _preds((3, 12)), with_trace=True)
    assert [(s.ref_index, s.pred_index, s.decision) for s in result.trace] == [
        (0, 0, "kept"),
        (1, 0, "rejected"),
    ]
    assert match_document(_refs((0, 5)), _preds((3, 12))).trace is None


# --- Oracle ---

def _enumerate_best(ref_spans, pred_spans):
    """Exhaustive search over every matching: max cardinality, then max overlap, then smallest sorted pair list."""

    @lru_cache(maxsize=None)
    def best_from(r, used):
        if r == len(ref_spans):
            return 0, 0, ()
        options = [best_from(r + 1, used)]
        for p, pred in enumerate(pred_spans):
            if used & (1 << p) or pred is None or not overlaps(ref_spans[r], pred):
                continue
            size, total, pairs = best_from(r + 1, used | (1 << p))
            options.append((size + 1, total + overlap_len(ref_spans[r], pred), ((r, p),) + pairs))
        return min(options, key=lambda o: (-o[0], -o[1], o[2]))

    return list(best_from(0, 0)[2])


def _random_document(rng, max_errors=10):
    length = 30
    refs = set()
    n_refs = rng.randint(0, max_errors)
    while len(refs) < n_refs:
        start = rng.randrange(length)
        refs.add((start, rng.randint(start + 1, min(length, start + 8))))
    preds = []
    for _ in range(rng.randint(0, max_errors)):
        start = rng.randrange(length)
        preds.append((start, rng.randint(start + 1, min(length, start + 8))))
    return sorted(refs), sorted(preds)


def test_matches_exhaustive_enumeration():
    """1000 random documents of up to 10 references and 10 predictions, spans already in span order."""
    rng = random.Random(20240417)
    for _ in range(1000):
        ref_spans, pred_spans = _random_document(rng)
        result = match_document(_refs(*ref_spans), _preds(*pred_spans))
        expected = _enumerate_best(ref_spans, pred_spans)
        assert [(p.ref_index, p.pred_index) for p in result.pairs] == expected, (ref_spans, pred_spans)
        assert result.optimum_overlap == sum(p.overlap_len for p in result.pairs)


def test_permutation_invariance():
    rng = random.Random(7)
    for _ in range(200):
        ref_spans, pred_spans = _random_document(rng)
        baseline = match_document(_refs(*ref_spans), _preds(*pred_spans))
        expected = {(ref_spans[p.ref_index], pred_spans[p.pred_index]) for p in baseline.pairs}

        ref_perm = list(range(len(ref_spans)))
        pred_perm = list(range(len(pred_spans)))
        rng.shuffle(ref_perm)
        rng.shuffle(pred_perm)
        shuffled_refs = [ref_spans[i] for i in ref_perm]
        shuffled_preds = [pred_spans[i] for i in pred_perm]
        result = match_document(_refs(*shuffled_refs), _preds(*shuffled_preds))
        got = {(shuffled_refs[p.ref_index], shuffled_preds[p.pred_index]) for p in result.pairs}
        assert got == expected


def test_adding_a_prediction_never_lowers_cardinality():
    rng = random.Random(11)
    for _ in range(200):
        ref_spans, pred_spans = _random_document(rng)
        before = match_document(_refs(*ref_spans), _preds(*pred_spans)).optimum_cardinality
        start = rng.randrange(30)
        extra = (start, rng.randint(start + 1, 30))
        after = match_document(_refs(*ref_spans), _preds(*pred_spans, extra)).optimum_cardinality
        assert before <= after <= before + 1


def test_pairs_are_one_to_one():
    rng = random.Random(3)
    for _ in range(200):
        ref_spans, pred_spans = _random_document(rng)
        result = match_document(_refs(*ref_spans), _preds(*pred_spans))
        assert len({p.ref_index for p in result.pairs}) == len(result.pairs)
        assert len({p.pred_index for p in result.pairs}) == len(result.pairs)
        assert len(result.pairs) + len(result.unmatched_refs) == len(ref_spans)
        assert len(result.pairs) + len(result.unmatched_preds) == len(pred_spans)
