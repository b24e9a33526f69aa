"""Sentence-level evidence alignment for clinical QA.

Decides, for each numbered sentence of a clinical note excerpt, whether it
supports a given answer: BM25 and TF-IDF cosine scores plus externally
supplied reranker scores are normalized per case, thresholded into votes,
and fused by weighted voting.  Includes micro/macro P/R/F1 evaluation and
ensemble-threshold calibration.
"""

__version__ = "0.1.0"

from .corpus import (
    AnswerSentence,
    CaseRecord,
    CitationSet,
    GoldAnswer,
    NoteSentence,
    RelevanceLabel,
    answer_query_text,
    load_cases,
    load_gold,
    parse_cases,
    parse_gold,
    read_citations,
    render_prompt,
    strip_citation_markers,
    write_citations,
)
from .ensemble import EnsembleConfig, VoteRecord, combine_votes, decide, run_case
from .errors import CoverageError, EvalignError, ParseError, ValidationError
from .lexical import (
    BM25Params,
    bm25_scores,
    normalize_relative,
    tfidf_cosine,
    tokenize,
    votes_from_scores,
)
from .metrics import EvalReport, GoldMode, calibrate, confusion, evaluate, gold_set
from .scorefile import ScoreTable, external_votes, load_scores, validate_coverage

__all__ = [
    "__version__",
    "AnswerSentence",
    "BM25Params",
    "CaseRecord",
    "CitationSet",
    "CoverageError",
    "EnsembleConfig",
    "EvalReport",
    "EvalignError",
    "GoldAnswer",
    "GoldMode",
    "NoteSentence",
    "ParseError",
    "RelevanceLabel",
    "ScoreTable",
    "ValidationError",
    "VoteRecord",
    "answer_query_text",
    "bm25_scores",
    "calibrate",
    "combine_votes",
    "confusion",
    "decide",
    "evaluate",
    "external_votes",
    "gold_set",
    "load_cases",
    "load_gold",
    "load_scores",
    "normalize_relative",
    "parse_cases",
    "parse_gold",
    "read_citations",
    "render_prompt",
    "run_case",
    "strip_citation_markers",
    "tfidf_cosine",
    "tokenize",
    "validate_coverage",
    "votes_from_scores",
    "write_citations",
]
