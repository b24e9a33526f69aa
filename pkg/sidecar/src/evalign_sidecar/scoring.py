"""Batch scoring: every (case, sentence) pair against the case's answer.

The inference query is the full answer text, matching what the main
pipeline uses as its retrieval query (training pairs are built per answer
sentence; the coarser inference query is deliberate and documented).
Output rows satisfy the evalign score-file contract: complete coverage,
scores in [0, 1].
"""

from __future__ import annotations

from typing import IO, Sequence

from evalign.corpus import CaseRecord, GoldAnswer, answer_query_text, pair_cases_with_gold
from evalign.scorefile import write_score_file

from .errors import SidecarError

__all__ = ["emit_scores", "write_emitted_scores"]


def emit_scores(
    scorer,
    cases: Sequence[CaseRecord],
    golds: Sequence[GoldAnswer],
) -> list[tuple[str, int, float]]:
    """One row per (case, sentence), cases in input order, ids ascending."""
    rows: list[tuple[str, int, float]] = []
    for case, gold in pair_cases_with_gold(list(cases), list(golds)):
        query = answer_query_text(gold)
        scores = scorer.score(query, [s.text for s in case.sentences])
        for sentence, value in zip(case.sentences, scores):
            value = float(value)
            if not 0.0 <= value <= 1.0:
                raise SidecarError(
                    f"backend produced score {value!r} outside [0, 1] "
                    f"for case {case.case_id} sentence {sentence.id}"
                )
            rows.append((case.case_id, sentence.id, value))
    return rows


def write_emitted_scores(rows: list[tuple[str, int, float]], sink: IO[str]) -> None:
    write_score_file(rows, sink)
