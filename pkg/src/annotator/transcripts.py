"""
On-disk store of chat transcripts and the run manifest.

Layout under a run directory:
    transcripts/<doc_id>.json   one complete transcript per document
    run_manifest.json           run settings and per-document status
"""

import hashlib
import json
import logging
import os
from pathlib import Path

from pydantic import ValidationError

from annotator.table import parse_annotation_table
from errors import IntegrityError, NotFound
from models import ChatTranscript, PredictedAnnotation


logger = logging.getLogger(__name__)

MANIFEST_NAME = "run_manifest.json"


def transcript_digest(transcript: ChatTranscript) -> str:
    """sha256 over the canonical JSON of the transcript without its digest field."""
    payload = transcript.model_dump(mode="json", exclude={"digest"})
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class TranscriptStore:
    """Transcripts of one annotation run; a single writer per doc_id."""

    def __init__(self, run_dir: str | Path):
        self.run_dir = Path(run_dir)
        self.transcript_dir = self.run_dir / "transcripts"

    def path_for(self, doc_id: str) -> Path:
        return self.transcript_dir / f"{doc_id}.json"

    def has(self, doc_id: str) -> bool:
        return self.path_for(doc_id).is_file()

    def doc_ids(self) -> list[str]:
        if not self.transcript_dir.is_dir():
            return []
        return sorted(p.stem for p in self.transcript_dir.glob("*.json"))

    def save(self, transcript: ChatTranscript) -> ChatTranscript:
        """Persist a transcript with its digest filled in; returns the stored copy."""
        stored = transcript.model_copy(update={"digest": transcript_digest(transcript)})
        self.transcript_dir.mkdir(parents=True, exist_ok=True)
        _write_atomic(
            self.path_for(stored.doc_id),
            json.dumps(stored.model_dump(mode="json"), ensure_ascii=False, indent=2) + "\n",
        )
        logger.info(f"Saved transcript for {stored.doc_id} ({len(stored.steps)} steps)")
        return stored

    def load(self, doc_id: str) -> ChatTranscript:
        """
        Raises:
            NotFound: no transcript for doc_id
            IntegrityError: unreadable file or digest mismatch
        """
        path = self.path_for(doc_id)
        if not path.is_file():
            raise NotFound(f"No transcript for {doc_id} in {self.run_dir}", doc_id=doc_id)
        try:
            transcript = ChatTranscript.model_validate_json(path.read_text(encoding="utf-8"))
        except (ValidationError, UnicodeDecodeError) as e:
            raise IntegrityError(f"Unreadable transcript {path}: {e}", doc_id=doc_id)
        if transcript.digest != transcript_digest(transcript):
            raise IntegrityError(f"Digest mismatch for transcript {path}", doc_id=doc_id)
        return transcript

    def write_manifest(self, manifest: dict) -> Path:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        path = self.run_dir / MANIFEST_NAME
        _write_atomic(path, json.dumps(manifest, ensure_ascii=False, indent=2, sort_keys=True) + "\n")
        return path

    def read_manifest(self) -> dict:
        path = self.run_dir / MANIFEST_NAME
        if not path.is_file():
            return {}
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise IntegrityError(f"Unreadable run manifest {path}: {e}")


def replay(store: TranscriptStore, doc_id: str) -> tuple[ChatTranscript, list[PredictedAnnotation]]:
    """Re-parse a stored transcript without contacting any provider."""
    transcript = store.load(doc_id)
    return transcript, parse_annotation_table(transcript.final_response, doc_id=doc_id)
