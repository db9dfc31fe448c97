"""
MT error annotation evaluator - LLM annotation runs scored against a reference corpus
"""

import sys
from pathlib import Path

# Add src directory to Python path for absolute imports
sys.path.insert(0, str(Path(__file__).parent))

from corpus import parse_reference_corpus, read_predictions
from mt_error_eval import main
from scoring import compare_runs, evaluate_corpus
from typology import load_typology

__all__ = [
    "main",
    "load_typology",
    "parse_reference_corpus",
    "read_predictions",
    "evaluate_corpus",
    "compare_runs",
]
