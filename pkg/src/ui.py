"""
UI abstraction layer for the evaluator's command line.

Status lines go to stderr so that stdout carries only command output.
Set CLI_MODE=false in .env to silence them.
"""

import os
import sys
from pathlib import Path

# Add src directory to Python path for absolute imports
sys.path.insert(0, str(Path(__file__).parent))

from dotenv import load_dotenv
load_dotenv(Path(__file__).parent.parent / ".env")

# Configuration from environment
CLI_MODE = os.getenv("CLI_MODE", "true").lower() == "true"


def _print(text: str) -> None:
    """Print only if CLI mode is enabled."""
    if CLI_MODE:
        print(text, file=sys.stderr)


# --- Status Messages ---

def show_loading_corpus(path: str) -> None:
    _print(f"📂 Loading corpus from {path}")


def show_corpus_loaded(n_docs: int, n_errors: int) -> None:
    _print(f"✅ Loaded {n_docs} documents with {n_errors} reference errors")


def show_file_ok(name: str) -> None:
    _print(f"✅ {name}")


def show_file_problems(name: str, count: int) -> None:
    _print(f"❌ {name}: {count} problem(s)")


def show_annotating(doc_id: str) -> None:
    _print(f"🤖 Annotating {doc_id}...")


def show_step(doc_id: str, step: int, total: int, retries: int = 0) -> None:
    if retries:
        _print(f"   {doc_id}: step {step}/{total} done after {retries} retries")
    else:
        _print(f"   {doc_id}: step {step}/{total} done")


def show_resumed(doc_id: str) -> None:
    _print(f"⏭️  {doc_id}: transcript already stored, skipping")


def show_replaying(n_docs: int) -> None:
    _print(f"🔁 Replaying {n_docs} stored transcripts")


def show_evaluating(run_name: str, n_docs: int) -> None:
    _print(f"📊 Evaluating {run_name} over {n_docs} documents")


def show_written(paths) -> None:
    for path in paths:
        _print(f"📝 Wrote {path}")


# --- Error Messages ---

def show_error(message: str) -> None:
    _print(f"❌ {message}")
