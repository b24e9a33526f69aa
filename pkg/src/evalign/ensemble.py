"""Weighted voting: per-method vote sets -> final citation decisions.

Each method (bm25, tfidf, external reranker) first votes independently by
thresholding its normalized per-case scores with a permissive method
threshold.  A sentence's total vote is the weight sum of the methods that
voted for it; it is cited when the total reaches the ensemble threshold.
The method thresholds cast generous votes; tau_ens applies the primary
filter and is the main precision/recall control.

All comparisons are inclusive (>=).  Vote totals are computed in double
precision in a fixed order (bm25, tfidf, external), with no epsilon slack;
configs should avoid weights/thresholds within ~1e-12 of a decision
boundary.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import IO, Mapping

from .corpus import CaseRecord, CitationSet, GoldAnswer, answer_query_text
from .errors import ParseError, ValidationError
from .lexical import (
    BM25Params,
    bm25_scores,
    normalize_relative,
    tfidf_cosine,
    tokenize,
    votes_from_scores,
)
from .scorefile import ScoreTable, external_votes

__all__ = [
    "EnsembleConfig",
    "SentenceVote",
    "VoteRecord",
    "combine_votes",
    "decide",
    "cited_at",
    "run_case",
    "method_vote_sets",
    "load_config",
    "config_to_dict",
]

_CONFIG_KEYS = {
    "w_bm25",
    "w_tfidf",
    "w_ce",
    "tau_bm25",
    "tau_tfidf",
    "tau_ce",
    "tau_ens",
    "bm25_k1",
    "bm25_b",
    "allow_missing_external",
}


@dataclass(frozen=True)
class EnsembleConfig:
    """Weights and thresholds governing votes and the final decision.

    Defaults are the calibrated production values this tool ships with.
    """

    w_bm25: float = 0.527
    w_tfidf: float = 0.493
    w_ce: float = 0.855
    tau_bm25: float = 0.50
    tau_tfidf: float = 0.20
    tau_ce: float = 0.10
    tau_ens: float = 0.85
    bm25_params: BM25Params = field(default_factory=BM25Params)
    allow_missing_external: bool = False

    def __post_init__(self) -> None:
        weights = (self.w_bm25, self.w_tfidf, self.w_ce)
        if any(w < 0 for w in weights):
            raise ValidationError(f"ensemble weights must be >= 0, got {weights}")
        if not any(w > 0 for w in weights):
            raise ValidationError("at least one ensemble weight must be > 0")
        for name in ("tau_bm25", "tau_tfidf", "tau_ce"):
            tau = getattr(self, name)
            if not 0.0 <= tau <= 1.0:
                raise ValidationError(f"{name} must be in [0,1], got {tau}")
        if self.tau_ens < 0:
            raise ValidationError(f"tau_ens must be >= 0, got {self.tau_ens}")
        if self.tau_ens > self.weight_sum:
            raise ValidationError(
                f"tau_ens={self.tau_ens} exceeds the weight sum {self.weight_sum}; "
                "nothing could ever be cited"
            )

    @property
    def weight_sum(self) -> float:
        return self.w_bm25 + self.w_tfidf + self.w_ce


@dataclass(frozen=True)
class SentenceVote:
    """Per-sentence method votes and the weighted total."""

    bm25: bool
    tfidf: bool
    ce: bool
    total: float


@dataclass(frozen=True)
class VoteRecord:
    """Vote state for every sentence of one case, voted or not."""

    case_id: str
    votes: Mapping[int, SentenceVote]


def combine_votes(
    bm25_votes: set[int],
    tfidf_votes: set[int],
    ce_votes: set[int],
    cfg: EnsembleConfig,
    case: CaseRecord,
) -> VoteRecord:
    """Weighted vote total per sentence, including unvoted sentences (V=0)."""
    valid = case.sentence_ids
    for name, votes in (("bm25", bm25_votes), ("tfidf", tfidf_votes), ("ce", ce_votes)):
        unknown = votes - valid
        if unknown:
            raise ValidationError(
                f"case {case.case_id}: {name} votes for unknown sentence ids {sorted(unknown)}"
            )
    record: dict[int, SentenceVote] = {}
    for sid in range(1, len(case.sentences) + 1):
        c_bm25 = sid in bm25_votes
        c_tfidf = sid in tfidf_votes
        c_ce = sid in ce_votes
        total = cfg.w_bm25 * c_bm25 + cfg.w_tfidf * c_tfidf + cfg.w_ce * c_ce
        record[sid] = SentenceVote(bm25=c_bm25, tfidf=c_tfidf, ce=c_ce, total=total)
    return VoteRecord(case_id=case.case_id, votes=record)


def cited_at(record: VoteRecord, tau_ens: float) -> CitationSet:
    """Sentences whose vote total reaches tau_ens (inclusive), ascending."""
    return CitationSet.from_ids(
        record.case_id, (sid for sid, v in record.votes.items() if v.total >= tau_ens)
    )


def decide(record: VoteRecord, cfg: EnsembleConfig) -> CitationSet:
    return cited_at(record, cfg.tau_ens)


def method_vote_sets(
    case: CaseRecord,
    gold: GoldAnswer,
    cfg: EnsembleConfig,
    external: ScoreTable | None = None,
) -> tuple[set[int], set[int], set[int]]:
    """Compute the three per-method vote sets for one case.

    The query is the gold answer text.  With no external table, the
    reranker method abstains when allowed (allow_missing_external, or its
    weight is 0); otherwise this is an error.
    """
    if gold.case_id != case.case_id:
        raise ValidationError(
            f"gold answer case id {gold.case_id!r} does not match case {case.case_id!r}"
        )
    query = answer_query_text(gold)
    sent_tokens = [tokenize(s.text) for s in case.sentences]
    raw_bm25 = bm25_scores(tokenize(query), sent_tokens, cfg.bm25_params)
    bm25_votes = votes_from_scores(normalize_relative(raw_bm25), cfg.tau_bm25)
    tfidf_votes = votes_from_scores(normalize_relative(tfidf_cosine(query, case)), cfg.tau_tfidf)
    if external is not None:
        ce_votes = external_votes(external, case, cfg.tau_ce)
    elif cfg.allow_missing_external or cfg.w_ce == 0:
        ce_votes = set()
    else:
        raise ValidationError(
            "external scores absent: set allow_missing_external or w_ce=0 to run without them"
        )
    return bm25_votes, tfidf_votes, ce_votes


def run_case(
    case: CaseRecord,
    gold: GoldAnswer,
    cfg: EnsembleConfig,
    external: ScoreTable | None = None,
) -> tuple[VoteRecord, CitationSet]:
    """Full per-case pipeline: score, vote, combine, decide."""
    bm25_votes, tfidf_votes, ce_votes = method_vote_sets(case, gold, cfg, external)
    record = combine_votes(bm25_votes, tfidf_votes, ce_votes, cfg, case)
    return record, decide(record, cfg)


# -- config file --

def load_config(source: IO[str]) -> EnsembleConfig:
    """Load the ensemble config JSON; unknown keys are rejected."""
    try:
        doc = json.load(source)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed config JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ValidationError("config JSON must be an object")
    unknown = sorted(set(doc) - _CONFIG_KEYS)
    if unknown:
        raise ValidationError(f"unknown config keys: {unknown}")
    kwargs = {k: doc[k] for k in doc if k not in ("bm25_k1", "bm25_b")}
    defaults = BM25Params()
    kwargs["bm25_params"] = BM25Params(
        k1=doc.get("bm25_k1", defaults.k1), b=doc.get("bm25_b", defaults.b)
    )
    return EnsembleConfig(**kwargs)


def config_to_dict(cfg: EnsembleConfig) -> dict:
    """Flatten a config to the JSON wire shape."""
    return {
        "w_bm25": cfg.w_bm25,
        "w_tfidf": cfg.w_tfidf,
        "w_ce": cfg.w_ce,
        "tau_bm25": cfg.tau_bm25,
        "tau_tfidf": cfg.tau_tfidf,
        "tau_ce": cfg.tau_ce,
        "tau_ens": cfg.tau_ens,
        "bm25_k1": cfg.bm25_params.k1,
        "bm25_b": cfg.bm25_params.b,
        "allow_missing_external": cfg.allow_missing_external,
    }


def load_config_file(path: str) -> EnsembleConfig:
    with open(path, encoding="utf-8") as f:
        return load_config(f)


def lexical_only(cfg: EnsembleConfig) -> EnsembleConfig:
    """The same config with the reranker disabled (w_ce=0, missing allowed)."""
    return dataclasses.replace(cfg, w_ce=0.0, allow_missing_external=True)
