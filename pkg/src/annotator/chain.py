"""
The four-step annotation conversation as a LangGraph workflow.

Workflow per document:
1. send_step, looped once per prompt step within one conversation
2. save_transcript, before any parsing so failures stay replayable
3. parse_table, turning the last reply into predictions
"""

import asyncio
import hashlib
import json
import logging
import uuid
from datetime import datetime, timezone
from pathlib import Path

from langchain_core.messages import AIMessage, HumanMessage
from langgraph.graph import END, START, StateGraph

import ui
from annotator.base import ChatProvider, file_digest, get_provider, send_with_retry
from annotator.table import parse_annotation_table
from annotator.transcripts import TranscriptStore, replay
from errors import InvalidPrecondition, MTEvalError, ProviderUnavailable
from models import (
    AnnotatedDocument,
    AnnotationState,
    ChatTranscript,
    PredictedAnnotation,
    PromptChain,
    PromptVariant,
    ProviderConfig,
    TranscriptStep,
    Typology,
)
from prompts import (
    DEFAULT_TEXT_TYPE,
    get_annotation_prompt,
    get_table_prompt,
    get_task_prompt,
    get_typology_prompt,
)
from typology import dump_typology, render_typology_prompt_block


logger = logging.getLogger(__name__)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def build_chain(
    doc: AnnotatedDocument,
    typology: Typology,
    manual: str | Path | None = None,
    variant: PromptVariant = PromptVariant.LONG,
    text_type: str = DEFAULT_TEXT_TYPE,
) -> PromptChain:
    """
    Build the prompt chain for one document.

    The short variant differs from the long one only in step 2, which then
    lists the typology without definitions.

    Raises:
        InvalidPrecondition: empty source or target text
    """
    if not doc.target_text.strip():
        raise InvalidPrecondition(f"{doc.doc_id} has an empty target text", doc_id=doc.doc_id)
    if not doc.source_text.strip():
        raise InvalidPrecondition(f"{doc.doc_id} has an empty source text", doc_id=doc.doc_id)

    variant = PromptVariant(variant)
    with_manual = manual is not None
    block = render_typology_prompt_block(typology, include_definitions=variant == PromptVariant.LONG)
    steps = (
        get_task_prompt(text_type, with_manual=with_manual),
        get_typology_prompt(block, with_manual=with_manual),
        get_annotation_prompt(doc.source_text, doc.target_text),
        get_table_prompt(),
    )
    return PromptChain(
        doc_id=doc.doc_id,
        steps=steps,
        variant=variant,
        attachment_path=str(manual) if manual is not None else None,
    )


# --- Graph ---

def should_continue(state: AnnotationState) -> str:
    """Route back to send_step until every prompt step has been answered."""
    if state["step_index"] < len(state["chain"].steps):
        return "send_step"
    return "save_transcript"


def build_annotation_graph(
    provider: ChatProvider,
    config: ProviderConfig,
    store: TranscriptStore,
    attachment_id: str | None = None,
):
    """Compile the per-document graph bound to a provider and a transcript store."""

    async def send_step(state: AnnotationState) -> dict:
        chain = state["chain"]
        index = state["step_index"]
        text = chain.steps[index]
        if index == 0 and attachment_id:
            message = HumanMessage(content=[
                {"type": "text", "text": text},
                {"type": "file", "file": {"file_id": attachment_id}},
            ])
        else:
            message = HumanMessage(content=text)

        messages = [*state["messages"], message]
        started_at = _now()
        try:
            reply, retries = await send_with_retry(provider, messages, config)
        except ProviderUnavailable as e:
            raise ProviderUnavailable(e.last_status, e.attempts, doc_id=chain.doc_id)
        ui.show_step(chain.doc_id, index + 1, len(chain.steps), retries)

        transcript = state["transcript"]
        step = TranscriptStep(
            request=text,
            response=reply.text,
            started_at=started_at,
            finished_at=_now(),
            retries=retries,
            usage=reply.usage,
        )
        return {
            "messages": [*messages, AIMessage(content=reply.text)],
            "step_index": index + 1,
            "transcript": transcript.model_copy(update={"steps": [*transcript.steps, step]}),
        }

    def save_transcript(state: AnnotationState) -> dict:
        return {"transcript": store.save(state["transcript"])}

    def parse_table(state: AnnotationState) -> dict:
        transcript = state["transcript"]
        return {"predictions": parse_annotation_table(transcript.final_response, doc_id=transcript.doc_id)}

    builder = StateGraph(AnnotationState)
    builder.add_node("send_step", send_step)
    builder.add_node("save_transcript", save_transcript)
    builder.add_node("parse_table", parse_table)

    builder.add_edge(START, "send_step")
    builder.add_conditional_edges("send_step", should_continue)
    builder.add_edge("save_transcript", "parse_table")
    builder.add_edge("parse_table", END)

    return builder.compile()


async def run_annotation(
    chain: PromptChain,
    config: ProviderConfig,
    store: TranscriptStore,
    provider: ChatProvider | None = None,
    run_id: str | None = None,
    attachment_id: str | None = None,
) -> tuple[ChatTranscript, list[PredictedAnnotation]]:
    """
    Run one annotation conversation and parse its final table.

    Raises:
        AuthError: credential missing or rejected
        ProviderUnavailable: retries exhausted
        ParseFailure: no table in the final reply (the transcript is saved)
    """
    provider = provider or get_provider(config)
    graph = build_annotation_graph(provider, config, store, attachment_id)
    transcript = ChatTranscript(
        doc_id=chain.doc_id,
        run_id=run_id or uuid.uuid4().hex,
        provider_id=provider.provider_id,
        model_id=provider.model_id,
        variant=chain.variant,
        attachments_digest=file_digest(chain.attachment_path) if chain.attachment_path else None,
    )
    initial_state = {
        "chain": chain,
        "run_id": transcript.run_id,
        "messages": [],
        "step_index": 0,
        "transcript": transcript,
        "predictions": None,
    }
    # Each step is one super-step; two more for save and parse.
    recursion_limit = len(chain.steps) + 10
    result = await graph.ainvoke(initial_state, config={"recursion_limit": recursion_limit})
    return result["transcript"], result["predictions"]


def typology_digest(typology: Typology) -> str:
    canonical = json.dumps(dump_typology(typology), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


async def run_annotations(
    chains: list[PromptChain],
    config: ProviderConfig,
    store: TranscriptStore,
    typology: Typology,
    provider: ChatProvider | None = None,
    run_id: str | None = None,
    force: bool = False,
) -> dict[str, list[PredictedAnnotation]]:
    """
    Annotate many documents concurrently, at most max_parallel_sessions at a time.

    Documents that already have a stored transcript are replayed unless
    force is set. The run manifest is written even when a document fails;
    the first failure (in doc_id order) is then raised.
    """
    provider = provider or get_provider(config)
    run_id = run_id or store.read_manifest().get("run_id") or uuid.uuid4().hex
    semaphore = asyncio.Semaphore(config.max_parallel_sessions)

    manual_path = next((c.attachment_path for c in chains if c.attachment_path), None)
    attachment_id = None
    if manual_path and config.upload_attachment:
        attachment_id = await provider.upload_attachment(manual_path)

    manifest = {
        "run_id": run_id,
        "provider_id": provider.provider_id,
        "model_id": provider.model_id,
        "variant": chains[0].variant.value if chains else None,
        "sampling": config.sampling,
        "typology_digest": typology_digest(typology),
        "manual_digest": file_digest(manual_path) if manual_path else None,
        "started_at": _now(),
        "documents": {},
    }

    async def annotate(chain: PromptChain) -> list[PredictedAnnotation]:
        if store.has(chain.doc_id) and not force:
            ui.show_resumed(chain.doc_id)
            transcript, predictions = replay(store, chain.doc_id)
            manifest["documents"][chain.doc_id] = {"status": "resumed", "retries": transcript.retry_count}
            return predictions
        async with semaphore:
            ui.show_annotating(chain.doc_id)
            started_at = _now()
            try:
                transcript, predictions = await run_annotation(
                    chain, config, store, provider=provider, run_id=run_id, attachment_id=attachment_id
                )
            except MTEvalError as e:
                manifest["documents"][chain.doc_id] = {
                    "status": "failed",
                    "error": type(e).__name__,
                    "started_at": started_at,
                    "finished_at": _now(),
                }
                raise
            manifest["documents"][chain.doc_id] = {
                "status": "done",
                "retries": transcript.retry_count,
                "n_predictions": len(predictions),
                "started_at": started_at,
                "finished_at": _now(),
            }
            return predictions

    outcomes = await asyncio.gather(*(annotate(c) for c in chains), return_exceptions=True)
    manifest["finished_at"] = _now()
    store.write_manifest(manifest)

    results: dict[str, list[PredictedAnnotation]] = {}
    failures = []
    for chain, outcome in zip(chains, outcomes):
        if isinstance(outcome, BaseException):
            failures.append((chain.doc_id, outcome))
        else:
            results[chain.doc_id] = outcome
    if failures:
        doc_id, error = sorted(failures, key=lambda f: f[0])[0]
        logger.error(f"{len(failures)} document(s) failed; first: {doc_id}")
        raise error
    return results
