"""
Exception hierarchy for the MT error-annotation evaluator.

Every error knows the CLI exit code it maps to and can render itself as a
one-line machine-readable diagnostic.
"""

from typing import Any


EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PROVIDER = 2
EXIT_USAGE = 3


class MTEvalError(Exception):
    """Base class for all evaluator errors."""

    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def diagnostic(self) -> dict:
        """Return a JSON-serializable diagnostic record."""
        record = {"error": type(self).__name__, "message": self.message}
        for key, value in self.context.items():
            if value is not None:
                record[key] = value
        return record


# --- Typology ---

class DuplicateCode(MTEvalError):
    def __init__(self, code: str):
        super().__init__(f"Duplicate typology code: {code}", code=code)
        self.code = code


class MalformedNode(MTEvalError):
    def __init__(self, message: str, path: str | None = None):
        super().__init__(message, path=path)


class MalformedTree(MTEvalError):
    pass


class UnknownLabel(MTEvalError):
    def __init__(self, raw: str, doc_id: str | None = None, index: int | None = None):
        super().__init__(f"Unknown label: {raw!r}", label=raw, doc_id=doc_id, index=index)
        self.raw = raw


# --- Corpus ---

class InvalidSpan(MTEvalError):
    def __init__(self, doc_id: str, index: int, start: int, end: int, length: int):
        super().__init__(
            f"Span [{start},{end}) of error {index} in {doc_id} is outside [0,{length})",
            doc_id=doc_id,
            index=index,
        )
        self.doc_id = doc_id
        self.index = index


class DuplicateError(MTEvalError):
    """Indexes are positions in the input errors list."""

    def __init__(self, doc_id: str, index: int, start: int, end: int, earlier_index: int | None = None):
        repeats = "" if earlier_index is None else f" of error {earlier_index}"
        super().__init__(
            f"Error {index} in {doc_id} repeats span [{start},{end}){repeats}",
            doc_id=doc_id,
            index=index,
            earlier_index=earlier_index,
        )


class InvalidDocument(MTEvalError):
    """A corpus file that does not follow the reference format."""


class EmptyCorpus(MTEvalError):
    def __init__(self, where: str = ""):
        super().__init__(f"No documents found{f' in {where}' if where else ''}")


class InvalidSentenceIndex(MTEvalError):
    def __init__(self, doc_id: str, sentence_index: int, n_sentences: int):
        super().__init__(
            f"Sentence index {sentence_index} out of range for {doc_id} "
            f"({n_sentences} sentences)",
            doc_id=doc_id,
            index=sentence_index,
        )


class InvalidPrecondition(MTEvalError):
    pass


# --- Statistics ---

class InsufficientData(MTEvalError):
    pass


class DomainError(MTEvalError):
    pass


class DocSetMismatch(MTEvalError):
    def __init__(self, only_left: list[str], only_right: list[str]):
        super().__init__(
            "Document sets differ",
            only_left=sorted(only_left),
            only_right=sorted(only_right),
        )
        self.only_left = sorted(only_left)
        self.only_right = sorted(only_right)


# --- Provider / annotation ---

class AuthError(MTEvalError):
    exit_code = EXIT_PROVIDER


class TransientProviderError(MTEvalError):
    """A retryable provider failure (rate limit, timeout, 5xx)."""

    exit_code = EXIT_PROVIDER

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message, status=status)
        self.status = status


class ProviderUnavailable(MTEvalError):
    exit_code = EXIT_PROVIDER

    def __init__(self, last_status: int | None, attempts: int, doc_id: str | None = None):
        super().__init__(
            f"Provider unavailable after {attempts} attempts (last status {last_status})",
            status=last_status,
            attempts=attempts,
            doc_id=doc_id,
        )
        self.last_status = last_status
        self.attempts = attempts


class ParseFailure(MTEvalError):
    def __init__(self, message: str, raw: str = "", doc_id: str | None = None):
        super().__init__(message, doc_id=doc_id)
        self.raw = raw


class NotFound(MTEvalError):
    pass


class IntegrityError(MTEvalError):
    pass


class UsageError(MTEvalError):
    exit_code = EXIT_USAGE
