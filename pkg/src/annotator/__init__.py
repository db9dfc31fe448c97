"""
LLM annotation workflow.

- base: chat providers, retries and attachment upload
- table: parsing and rendering of the annotation table
- transcripts: transcript store, run manifest and replay
- chain: prompt chain construction and the LangGraph workflow
"""

from annotator.base import (
    ChatProvider,
    ChatReply,
    OpenAIChatProvider,
    StubProvider,
    get_provider,
    send_with_retry,
)

from annotator.table import (
    parse_annotation_table,
    parse_table,
    render_annotation_table,
)

from annotator.transcripts import (
    TranscriptStore,
    replay,
    transcript_digest,
)

from annotator.chain import (
    build_annotation_graph,
    build_chain,
    run_annotation,
    run_annotations,
    should_continue,
)


__all__ = [
    # Providers
    "ChatProvider",
    "ChatReply",
    "OpenAIChatProvider",
    "StubProvider",
    "get_provider",
    "send_with_retry",
    # Table
    "parse_annotation_table",
    "parse_table",
    "render_annotation_table",
    # Transcripts
    "TranscriptStore",
    "replay",
    "transcript_digest",
    # Chain
    "build_annotation_graph",
    "build_chain",
    "run_annotation",
    "run_annotations",
    "should_continue",
]
