"""
Data models and state definitions for the MT error-annotation evaluator.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, TypedDict

from pydantic import BaseModel, ConfigDict, Field, model_validator


Span = Tuple[int, int]


# Typology tree (built by typology.load_typology)

@dataclass(eq=False)
class ErrorCategory:
    """One node of the error typology tree."""
    name: str
    code: Optional[str] = None
    definition: str = ""
    prompt_name: Optional[str] = None
    aliases: Tuple[str, ...] = ()
    parent: Optional["ErrorCategory"] = field(default=None, repr=False)
    children: List["ErrorCategory"] = field(default_factory=list, repr=False)

    @property
    def selectable(self) -> bool:
        return self.code is not None

    @property
    def is_top_level(self) -> bool:
        return self.parent is None

    @property
    def label(self) -> str:
        """Name used in prompt text."""
        return self.prompt_name or self.name

    def walk(self):
        """Yield this node and its descendants in document order."""
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(eq=False)
class Typology:
    """A loaded, validated error typology."""
    name: str
    roots: List[ErrorCategory]
    code_index: Dict[str, ErrorCategory]
    alias_table: Dict[str, str]

    def categories(self):
        for root in self.roots:
            yield from root.walk()

    @property
    def codes(self) -> List[str]:
        return [node.code for node in self.categories() if node.code]


# Typology file schema

class TypologyNodeSpec(BaseModel):
    """A node as written in the typology file."""
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    code: Optional[str] = None
    prompt_name: Optional[str] = None
    definition: str = ""
    aliases: List[str] = Field(default_factory=list)
    children: List["TypologyNodeSpec"] = Field(default_factory=list)


TypologyNodeSpec.model_rebuild()


class TypologyFileSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "typology"
    version: int = 1
    categories: List[TypologyNodeSpec]


# Corpus

class MTSystem(str, Enum):
    DEEPL = "DeepL"
    CHATGPT = "ChatGPT"
    OTHER = "other"


class SentencePair(BaseModel):
    """A sentence-level alignment entry; source may be unknown."""
    model_config = ConfigDict(frozen=True)

    source: Optional[Span] = None
    target: Span


class ReferenceError(BaseModel):
    """An expert-annotated error: half-open code-point span plus label set."""
    model_config = ConfigDict(frozen=True)

    start: int
    end: int
    labels: Tuple[str, ...]

    @property
    def span(self) -> Span:
        return (self.start, self.end)


class AnnotatedDocument(BaseModel):
    """A translation with its source and the expert's reference errors."""
    model_config = ConfigDict(frozen=True)

    doc_id: str
    mt_system: str = MTSystem.OTHER.value
    source_text: str
    target_text: str
    sentence_alignment: Tuple[SentencePair, ...] = ()
    reference_errors: Tuple[ReferenceError, ...] = ()

    @property
    def target_sentences(self) -> List[Span]:
        return [pair.target for pair in self.sentence_alignment]

    @property
    def source_sentences(self) -> List[Optional[Span]]:
        return [pair.source for pair in self.sentence_alignment]

    def surface(self, index: int) -> str:
        error = self.reference_errors[index]
        return self.target_text[error.start:error.end]


class AnchorStatus(str, Enum):
    EXACT = "exact"
    NORMALIZED = "normalized"
    UNANCHORED = "unanchored"


class PredictedAnnotation(BaseModel):
    """One error asserted by the annotator model; a single label."""
    model_config = ConfigDict(frozen=True)

    doc_id: str
    sentence_index: Optional[int] = None
    surface: str
    label: str
    explanation: Optional[str] = None
    anchor: Optional[Span] = None
    anchor_status: AnchorStatus = AnchorStatus.UNANCHORED


# Reference corpus file schema

class ErrorSpec(BaseModel):
    start: int
    end: int
    labels: List[str]


class SentenceSpec(BaseModel):
    source: Optional[Span] = None
    target: Span


class DocumentFileSpec(BaseModel):
    """A reference document as written on disk (one JSON object per translation)."""
    doc_id: str
    mt_system: str = MTSystem.OTHER.value
    source_text: str = ""
    target_text: str
    sentences: Optional[List[SentenceSpec | Span]] = None
    errors: List[ErrorSpec] = Field(default_factory=list)


class CorpusStats(BaseModel):
    mt_system: Optional[str] = None
    n_docs: int
    n_errors: int
    mean_errors_per_doc: float
    span_len_min: int
    span_len_max: int
    span_len_mean: float
    labels_per_error_min: int
    labels_per_error_max: int
    labels_per_error_mean: float
    n_words: int


# Matching

class MatchPair(BaseModel):
    model_config = ConfigDict(frozen=True)

    ref_index: int
    pred_index: int
    overlap_len: int


class TraceStep(BaseModel):
    """One tie-break decision taken while fixing the matching."""
    ref_index: int
    pred_index: int
    overlap_len: int
    decision: str  # "kept" or "rejected"


class MatchResult(BaseModel):
    doc_id: str = ""
    n_refs: int
    n_preds: int
    pairs: List[MatchPair] = Field(default_factory=list)
    unmatched_refs: List[int] = Field(default_factory=list)
    unmatched_preds: List[int] = Field(default_factory=list)
    n_label_correct: int = 0
    optimum_cardinality: int = 0
    optimum_overlap: int = 0
    trace: Optional[List[TraceStep]] = None


# Scores and reports

class DocumentScore(BaseModel):
    doc_id: str
    n_gold: int
    n_pred: int
    n_matched: int
    n_label_correct: int
    n_false: int
    precision: float
    recall: float
    f1: float
    degenerate_flags: List[str] = Field(default_factory=list)


class CIMethod(str, Enum):
    BCA = "bca"
    PERCENTILE_FALLBACK = "percentile_fallback"


class ConfidenceInterval(BaseModel):
    lower: float
    upper: float
    estimate: float
    level: float = 0.95
    method: CIMethod = CIMethod.BCA
    n_resamples: int
    seed: int
    contains_estimate: bool = True
    warning: Optional[str] = None

    @property
    def half_width(self) -> float:
        return (self.upper - self.lower) / 2


class BootstrapConfig(BaseModel):
    n_resamples: int = 10_000
    seed: int = 42
    level: float = 0.95


class EvaluationConfig(BaseModel):
    """Settings that change numbers in a report; all go into the fingerprint."""
    matching_policy: str = "optimal-one-to-one"
    tie_break: str = "max-total-overlap-then-lexicographic"
    normalization: str = "normalized"
    label_accuracy: str = "pooled"
    z0_ties: str = "half"
    quantile_interpolation: str = "linear"
    bootstrap: BootstrapConfig = Field(default_factory=BootstrapConfig)


class EvaluationReport(BaseModel):
    run_name: str = ""
    mt_system: Optional[str] = None
    scores: List[DocumentScore]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    ci_precision: Optional[ConfidenceInterval] = None
    ci_recall: Optional[ConfidenceInterval] = None
    ci_f1: Optional[ConfidenceInterval] = None
    total_pred: int
    total_gold: int
    total_matched: int
    pct_correctly_labeled: Optional[float] = None
    macro_pct_correctly_labeled: Optional[float] = None
    micro_precision: float
    micro_recall: float
    false_error_total: int
    false_error_mean_per_doc: float
    false_error_min: int
    false_error_max: int
    false_error_pct_of_pred: Optional[float] = None
    n_unanchored: int = 0
    config_fingerprint: Dict[str, Any] = Field(default_factory=dict)
    # One sub-report per MT system when the corpus mixes several
    by_system: Dict[str, "EvaluationReport"] = Field(default_factory=dict)

    @property
    def doc_ids(self) -> List[str]:
        return [score.doc_id for score in self.scores]


class MetricDelta(BaseModel):
    metric: str
    a: Optional[float]
    b: Optional[float]
    delta: Optional[float]


class DocumentDelta(BaseModel):
    doc_id: str
    precision: float
    recall: float
    f1: float
    n_pred: int
    n_label_correct: int


class RunComparison(BaseModel):
    run_a: str
    run_b: str
    metrics: List[MetricDelta]
    documents: List[DocumentDelta]

    @property
    def identical(self) -> bool:
        return all(not m.delta for m in self.metrics) and all(
            not (d.precision or d.recall or d.f1 or d.n_pred or d.n_label_correct)
            for d in self.documents
        )


# LLM annotation

class PromptVariant(str, Enum):
    LONG = "long"
    SHORT = "short"


class PromptChain(BaseModel):
    model_config = ConfigDict(frozen=True)

    doc_id: str
    steps: Tuple[str, ...]
    variant: PromptVariant
    language: str = "fr"
    attachment_path: Optional[str] = None


class TranscriptStep(BaseModel):
    request: str
    response: str
    started_at: str
    finished_at: str
    retries: int = 0
    usage: Optional[Dict[str, int]] = None


class ChatTranscript(BaseModel):
    doc_id: str
    run_id: str
    provider_id: str
    model_id: str
    variant: PromptVariant
    attachments_digest: Optional[str] = None
    steps: List[TranscriptStep] = Field(default_factory=list)
    digest: Optional[str] = None

    @property
    def final_response(self) -> str:
        return self.steps[-1].response if self.steps else ""

    @property
    def retry_count(self) -> int:
        return sum(step.retries for step in self.steps)


class ProviderConfig(BaseModel):
    """Chat-completion provider settings. The credential itself is never stored."""
    model_config = ConfigDict(extra="forbid")

    provider: str = "openai"
    endpoint: Optional[str] = None
    model: str = "gpt-4o"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 120.0
    max_attempts: int = Field(default=5, ge=1)
    backoff_base: float = Field(default=2.0, ge=0.0)
    backoff_max: float = 60.0
    max_parallel_sessions: int = Field(default=4, ge=1)
    upload_attachment: bool = False
    sampling: Dict[str, Any] = Field(default_factory=dict)


class RunConfig(BaseModel):
    """Settings gathered from the command line for one invocation."""
    corpus: Optional[str] = None
    typology: Optional[str] = None
    predictions: List[str] = Field(default_factory=list)
    provider_config: Optional[str] = None
    replay: Optional[str] = None
    manual: Optional[str] = None
    variant: PromptVariant = PromptVariant.LONG
    bootstrap_b: int = 10_000
    seed: int = 42
    normalization: str = "normalized"
    out: Optional[str] = None
    formats: List[str] = Field(default_factory=lambda: ["json", "md", "csv", "svg"])
    force: bool = False
    trace: bool = False

    @model_validator(mode="after")
    def _one_prediction_source(self) -> "RunConfig":
        sources = [bool(self.predictions), bool(self.provider_config), bool(self.replay)]
        if sum(sources) > 1:
            raise ValueError("give exactly one of --predictions, --provider-config, --replay")
        return self


# Graph state definition

class AnnotationState(TypedDict):
    """State for the annotation chain graph."""
    chain: PromptChain
    run_id: str
    messages: List
    step_index: int
    transcript: ChatTranscript
    predictions: Optional[List[PredictedAnnotation]]
