"""Training-pair construction from annotated cases.

Supervision is per answer sentence.  An answer sentence with citations
yields one positive pair per cited note sentence and one negative pair per
non-cited note sentence of the same case.  An answer sentence with no
citations (general-knowledge statements) yields `null_neg_per_sent`
negatives sampled uniformly without replacement from the case's note
sentences; these teach the model that such answers match nothing.

Relevance labels offer an alternative supervision source: with
supervision="essential" (or "essential_plus_supplementary") the query is
the whole answer text and every note sentence becomes one pair, labeled by
its relevance annotation.  The citation reading is the default.
"""

from __future__ import annotations

import random
import warnings
from dataclasses import dataclass
from typing import Sequence

from evalign.corpus import CaseRecord, GoldAnswer, answer_query_text, pair_cases_with_gold
from evalign.metrics import GoldMode, gold_set

from .errors import SidecarError

__all__ = ["TrainingPair", "build_training_pairs"]

SUPERVISION_MODES = ("citations", "essential", "essential_plus_supplementary")


@dataclass(frozen=True)
class TrainingPair:
    query_text: str
    sentence_text: str
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise SidecarError(f"pair label must be 0 or 1, got {self.label}")
        if not self.query_text or not self.sentence_text:
            raise SidecarError("pair texts must be non-empty")


def build_training_pairs(
    cases: Sequence[CaseRecord],
    golds: Sequence[GoldAnswer],
    null_neg_per_sent: int = 2,
    seed: int = 0,
    supervision: str = "citations",
) -> list[TrainingPair]:
    """Deterministic pair list; identical for identical inputs and seed."""
    if null_neg_per_sent < 0:
        raise SidecarError(f"null_neg_per_sent must be >= 0, got {null_neg_per_sent}")
    if supervision not in SUPERVISION_MODES:
        raise SidecarError(f"supervision must be one of {SUPERVISION_MODES}, got {supervision!r}")
    aligned = pair_cases_with_gold(list(cases), list(golds))
    if supervision != "citations":
        return _label_pairs(aligned, GoldMode(supervision))

    rng = random.Random(seed)
    pairs: list[TrainingPair] = []
    for case, gold in aligned:
        n = len(case.sentences)
        for answer in gold.answer_sentences:
            if answer.citations:
                cited = set(answer.citations)
                for sentence in case.sentences:
                    pairs.append(
                        TrainingPair(
                            query_text=answer.text,
                            sentence_text=sentence.text,
                            label=1 if sentence.id in cited else 0,
                        )
                    )
            else:
                k = null_neg_per_sent
                if k > n:
                    warnings.warn(
                        f"case {case.case_id}: null_neg_per_sent={k} exceeds "
                        f"{n} sentences; sampling all of them",
                        stacklevel=2,
                    )
                    k = n
                for sid in rng.sample(range(1, n + 1), k):
                    pairs.append(
                        TrainingPair(
                            query_text=answer.text,
                            sentence_text=case.sentences[sid - 1].text,
                            label=0,
                        )
                    )
    return pairs


def _label_pairs(aligned, mode: GoldMode) -> list[TrainingPair]:
    pairs = []
    for case, gold in aligned:
        relevant = set(gold_set(case, gold, mode).cited)
        query = answer_query_text(gold)
        for sentence in case.sentences:
            pairs.append(
                TrainingPair(
                    query_text=query,
                    sentence_text=sentence.text,
                    label=1 if sentence.id in relevant else 0,
                )
            )
    return pairs
