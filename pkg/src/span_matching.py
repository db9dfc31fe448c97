"""
One-to-one matching of predicted errors to reference errors.

A reference error is identified when it shares at least one character with
a predicted error. Pairs form a maximum-cardinality matching of the overlap
graph; among those, the one with the greatest total overlap wins, and any
remaining tie goes to the lexicographically smallest sorted pair list.
"""

import logging

import numpy as np
from scipy.optimize import linear_sum_assignment

from errors import UnknownLabel
from models import (
    MatchPair,
    MatchResult,
    PredictedAnnotation,
    ReferenceError,
    Span,
    TraceStep,
    Typology,
)
from typology import resolve_label


logger = logging.getLogger(__name__)


def overlaps(a: Span, b: Span) -> bool:
    """True iff two half-open spans share at least one position."""
    return max(a[0], b[0]) < min(a[1], b[1])


def overlap_len(a: Span, b: Span) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


class _Assignment:
    """Optimal assignment over a fixed weight matrix with forced and forbidden edges."""

    def __init__(self, weights: np.ndarray):
        self.weights = weights

    def solve(self, forced: set[tuple[int, int]], forbidden: set[tuple[int, int]]) -> tuple[int, set[tuple[int, int]]]:
        forced_rows = {r for r, _ in forced}
        forced_cols = {c for _, c in forced}
        rows = [r for r in range(self.weights.shape[0]) if r not in forced_rows]
        cols = [c for c in range(self.weights.shape[1]) if c not in forced_cols]
        value = int(sum(self.weights[r, c] for r, c in forced))
        chosen = set(forced)
        if rows and cols:
            sub = self.weights[np.ix_(rows, cols)].copy()
            for r, c in forbidden:
                if r in rows and c in cols:
                    sub[rows.index(r), cols.index(c)] = 0
            row_ind, col_ind = linear_sum_assignment(sub, maximize=True)
            for i, j in zip(row_ind, col_ind):
                if sub[i, j] > 0:
                    chosen.add((rows[i], cols[j]))
                    value += int(sub[i, j])
        return value, chosen


def _optimal_pairs(
    ref_spans: list[Span],
    pred_spans: list[Span],
    trace: list[TraceStep] | None,
) -> tuple[set[tuple[int, int]], int]:
    """Match positions in span order; returns the pair set and its weight."""
    edges = sorted(
        (r, p)
        for r, ref in enumerate(ref_spans)
        for p, pred in enumerate(pred_spans)
        if overlaps(ref, pred)
    )
    if not edges:
        return set(), 0

    # Cardinality dominates: one extra pair outweighs any total overlap.
    big = sum(overlap_len(ref_spans[r], pred_spans[p]) for r, p in edges) + 1
    weights = np.zeros((len(ref_spans), len(pred_spans)), dtype=np.int64)
    for r, p in edges:
        weights[r, p] = big + overlap_len(ref_spans[r], pred_spans[p])

    solver = _Assignment(weights)
    best, current = solver.solve(set(), set())

    kept: set[tuple[int, int]] = set()
    rejected: set[tuple[int, int]] = set()
    for edge in edges:
        r, p = edge
        if edge in current:
            decision = "kept"
        elif any(k[0] == r or k[1] == p for k in kept):
            decision = "rejected"
        else:
            value, candidate = solver.solve(kept | {edge}, rejected)
            if value == best:
                current = candidate
                decision = "kept"
            else:
                decision = "rejected"
        if decision == "kept":
            kept.add(edge)
        else:
            rejected.add(edge)
        if trace is not None:
            trace.append(TraceStep(
                ref_index=r,
                pred_index=p,
                overlap_len=overlap_len(ref_spans[r], pred_spans[p]),
                decision=decision,
            ))
    return kept, best - big * len(kept)


def label_correct(
    pair: MatchPair,
    refs: list[ReferenceError],
    preds: list[PredictedAnnotation],
    typology: Typology,
) -> bool:
    """True iff the predicted label resolves to one of the reference labels."""
    reference_labels = set()
    for label in refs[pair.ref_index].labels:
        try:
            reference_labels.add(resolve_label(typology, label).code)
        except UnknownLabel:
            reference_labels.add(label)
    return resolve_label(typology, preds[pair.pred_index].label).code in reference_labels


def match_document(
    refs: list[ReferenceError],
    preds: list[PredictedAnnotation],
    typology: Typology | None = None,
    doc_id: str = "",
    with_trace: bool = False,
) -> MatchResult:
    """
    Match anchored predictions against reference errors for one document.

    Unanchored predictions never match. Tie-break positions follow span
    order (references by (start, end), predictions by (start, end, input
    position)); returned indices are input indices.

    Args:
        refs: reference errors of the document
        preds: predictions after anchoring
        typology: when given, n_label_correct is filled in
        doc_id: carried into the result
        with_trace: record every tie-break decision
    """
    ref_order = sorted(range(len(refs)), key=lambda i: (refs[i].start, refs[i].end, i))
    anchored = [i for i, p in enumerate(preds) if p.anchor is not None]
    pred_order = sorted(anchored, key=lambda i: (preds[i].anchor[0], preds[i].anchor[1], i))

    ref_spans = [refs[i].span for i in ref_order]
    pred_spans = [preds[i].anchor for i in pred_order]

    trace: list[TraceStep] | None = [] if with_trace else None
    positions, total_overlap = _optimal_pairs(ref_spans, pred_spans, trace)

    pairs = sorted(
        (
            MatchPair(
                ref_index=ref_order[r],
                pred_index=pred_order[p],
                overlap_len=overlap_len(ref_spans[r], pred_spans[p]),
            )
            for r, p in positions
        ),
        key=lambda pair: (pair.ref_index, pair.pred_index),
    )
    if trace is not None:
        trace = [
            step.model_copy(update={
                "ref_index": ref_order[step.ref_index],
                "pred_index": pred_order[step.pred_index],
            })
            for step in trace
        ]

    matched_refs = {pair.ref_index for pair in pairs}
    matched_preds = {pair.pred_index for pair in pairs}

    n_label_correct = 0
    if typology is not None:
        for pair in pairs:
            try:
                if label_correct(pair, refs, preds, typology):
                    n_label_correct += 1
            except UnknownLabel as e:
                logger.info(f"{doc_id}: predicted label {e.raw!r} is not in the typology")

    return MatchResult(
        doc_id=doc_id,
        n_refs=len(refs),
        n_preds=len(preds),
        pairs=pairs,
        unmatched_refs=[i for i in range(len(refs)) if i not in matched_refs],
        unmatched_preds=[i for i in range(len(preds)) if i not in matched_preds],
        n_label_correct=n_label_correct,
        optimum_cardinality=len(pairs),
        optimum_overlap=total_overlap,
        trace=trace,
    )
