"""Score-file ingestion: the TSV contract between scorers and the ensemble.

Format (UTF-8): header line ``case_id<TAB>sentence_id<TAB>score``, then one
row per (case, sentence) pair.  Scores are written with ``repr`` so the
double round-trips exactly.  Any scorer that emits this file plugs in; the
neural reranker stays a sidecar process rather than an embedded model.

Externally produced reranker scores must be in sigmoid space [0, 1]:
per-case division by the maximum is then always well-defined.  Lexical raw
scores (unbounded above) travel through the same grammar via
read_score_file, which skips the range check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Mapping

from .corpus import CaseRecord
from .errors import CoverageError, ParseError, ValidationError
from .lexical import normalize_relative, votes_from_scores

__all__ = [
    "SCORE_HEADER",
    "ScoreTable",
    "read_score_file",
    "load_scores",
    "write_score_file",
    "validate_coverage",
    "external_votes",
]

SCORE_HEADER = "case_id\tsentence_id\tscore"


@dataclass(frozen=True)
class ScoreTable:
    """Immutable map (case_id, sentence_id) -> raw score from one method."""

    scores: Mapping[tuple[str, int], float]

    def case_slice(self, case_id: str) -> dict[int, float]:
        return {sid: v for (cid, sid), v in self.scores.items() if cid == case_id}

    def __len__(self) -> int:
        return len(self.scores)

    def __iter__(self) -> Iterator[tuple[str, int]]:
        return iter(self.scores)


def _parse_score_file(source: IO[str], require_01: bool) -> ScoreTable:
    header = source.readline().rstrip("\n")
    if header != SCORE_HEADER:
        raise ParseError(f"score file: expected header {SCORE_HEADER!r}, got {header!r}")
    scores: dict[tuple[str, int], float] = {}
    for lineno, line in enumerate(source, start=2):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"score file row {lineno}: expected 3 tab-separated fields")
        case_id, sid_raw, score_raw = parts
        try:
            sid = int(sid_raw)
        except ValueError:
            raise ParseError(f"score file row {lineno}: bad sentence id {sid_raw!r}") from None
        try:
            score = float(score_raw)
        except ValueError:
            raise ParseError(f"score file row {lineno}: non-numeric score {score_raw!r}") from None
        if not math.isfinite(score):
            raise ValidationError(f"score file row {lineno}: non-finite score {score_raw!r}")
        if require_01 and not 0.0 <= score <= 1.0:
            raise ValidationError(
                f"score file row {lineno}: score {score_raw} outside [0, 1]"
            )
        key = (case_id, sid)
        if key in scores:
            raise ValidationError(
                f"score file row {lineno}: duplicate (case, sentence) key ({case_id}, {sid})"
            )
        scores[key] = score
    return ScoreTable(scores=scores)


def read_score_file(source: IO[str]) -> ScoreTable:
    """Parse a score TSV with no range constraint on the score column."""
    return _parse_score_file(source, require_01=False)


def load_scores(source: IO[str]) -> ScoreTable:
    """Parse an external score TSV; every score must lie in [0, 1]."""
    return _parse_score_file(source, require_01=True)


def write_score_file(rows: Iterable[tuple[str, int, float]], sink: IO[str]) -> None:
    """Write rows as the score TSV; repr keeps full float precision."""
    sink.write(SCORE_HEADER + "\n")
    for case_id, sid, score in rows:
        sink.write(f"{case_id}\t{sid}\t{score!r}\n")


def _enumerate_pairs(pairs: list[tuple[str, int]], limit: int = 20) -> str:
    shown = ", ".join(f"({cid}, {sid})" for cid, sid in pairs[:limit])
    if len(pairs) > limit:
        shown += f", ... and {len(pairs) - limit} more"
    return shown


def validate_coverage(table: ScoreTable, cases: list[CaseRecord]) -> None:
    """Require the table to cover exactly every (case, sentence) pair."""
    expected = {(c.case_id, sid) for c in cases for sid in c.sentence_ids}
    present = set(table.scores)
    missing = sorted(expected - present)
    extra = sorted(present - expected)
    problems = []
    if missing:
        problems.append(f"missing {len(missing)} pair(s): {_enumerate_pairs(missing)}")
    if extra:
        problems.append(f"unknown {len(extra)} pair(s): {_enumerate_pairs(extra)}")
    if problems:
        raise CoverageError("score table coverage: " + "; ".join(problems))


def external_votes(table: ScoreTable, case: CaseRecord, tau_ce: float) -> set[int]:
    """Votes for one case: normalize the case's slice, threshold at tau_ce.

    Coverage must have been validated; a missing sentence here is an error.
    """
    sliced = table.case_slice(case.case_id)
    if set(sliced) != case.sentence_ids:
        raise CoverageError(
            f"case {case.case_id}: score table covers sentences {sorted(sliced)}, "
            f"expected 1..{len(case.sentences)}"
        )
    return votes_from_scores(normalize_relative(sliced), tau_ce)


def load_score_file(path: str) -> ScoreTable:
    with open(path, encoding="utf-8") as f:
        return read_score_file(f)


def load_external_scores(path: str) -> ScoreTable:
    with open(path, encoding="utf-8") as f:
        return load_scores(f)
