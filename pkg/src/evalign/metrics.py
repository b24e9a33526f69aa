"""Scoring predicted citation sets against gold, plus threshold calibration.

Micro scores pool confusion counts over all (case, sentence) decisions;
macro scores are unweighted means of per-case precision, recall, and F1
(macro-F1 is the mean of per-case F1, *not* the harmonic mean of macro-P
and macro-R).

Degenerate conventions, chosen so every case gets deterministic scores:
precision is 1 when nothing was predicted, recall is 1 when the gold set
is empty, and F1 is 0 when p + r = 0.  An empty prediction against an
empty gold therefore scores (1, 1, 1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import IO, Mapping, Sequence

from .corpus import CaseRecord, CitationSet, GoldAnswer, RelevanceLabel
from .ensemble import EnsembleConfig, VoteRecord, cited_at, combine_votes, method_vote_sets
from .errors import ValidationError
from .scorefile import ScoreTable

__all__ = [
    "GoldMode",
    "ConfusionCounts",
    "CaseScore",
    "EvalReport",
    "CalibrationResult",
    "gold_set",
    "confusion",
    "prf",
    "micro_scores",
    "macro_scores",
    "evaluate",
    "calibrate",
    "report_to_dict",
    "write_report",
    "write_calibration",
]


class GoldMode(str, Enum):
    """How the gold citation set is derived for evaluation."""

    CITATIONS = "citations"
    ESSENTIAL = "essential"
    ESSENTIAL_PLUS_SUPPLEMENTARY = "essential_plus_supplementary"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        if self.tp < 0 or self.fp < 0 or self.fn < 0:
            raise ValidationError(f"confusion counts must be >= 0: {self}")


@dataclass(frozen=True)
class CaseScore:
    counts: ConfusionCounts
    p: float
    r: float
    f1: float


@dataclass(frozen=True)
class EvalReport:
    micro_p: float
    micro_r: float
    micro_f1: float
    macro_p: float
    macro_r: float
    macro_f1: float
    per_case: Mapping[str, CaseScore]


def gold_set(case: CaseRecord, gold: GoldAnswer | None, mode: GoldMode) -> CitationSet:
    """Extract the gold citation set for one case under the given mode."""
    if mode is GoldMode.CITATIONS:
        if gold is None:
            raise ValidationError(f"mode {mode.value} requires a gold answer (case {case.case_id})")
        return CitationSet.from_ids(case.case_id, gold.cited_ids)
    if case.labels is None:
        raise ValidationError(
            f"mode {mode.value} requires relevance labels (case {case.case_id})"
        )
    wanted = {RelevanceLabel.ESSENTIAL}
    if mode is GoldMode.ESSENTIAL_PLUS_SUPPLEMENTARY:
        wanted.add(RelevanceLabel.SUPPLEMENTARY)
    return CitationSet.from_ids(
        case.case_id, (sid for sid, lab in case.labels.items() if lab in wanted)
    )


def confusion(pred: CitationSet, gold: CitationSet, n_sentences: int) -> ConfusionCounts:
    """Set-level confusion counts; ids must be within 1..n_sentences."""
    p, g = set(pred.cited), set(gold.cited)
    out_of_range = [i for i in p | g if i > n_sentences]
    if out_of_range:
        raise ValidationError(f"citation ids {sorted(out_of_range)} exceed n_sentences={n_sentences}")
    return ConfusionCounts(tp=len(p & g), fp=len(p - g), fn=len(g - p))


def prf(counts: ConfusionCounts) -> tuple[float, float, float]:
    """Precision/recall/F1 with the degenerate conventions above."""
    p = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 1.0
    r = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 1.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def micro_scores(counts: Sequence[ConfusionCounts]) -> tuple[float, float, float]:
    """Pool tp/fp/fn over all cases, then score the pooled counts."""
    pooled = ConfusionCounts(
        tp=sum(c.tp for c in counts),
        fp=sum(c.fp for c in counts),
        fn=sum(c.fn for c in counts),
    )
    return prf(pooled)


def macro_scores(per_case: Sequence[tuple[float, float, float]]) -> tuple[float, float, float]:
    """Unweighted means of per-case p, r, and f1."""
    if not per_case:
        raise ValidationError("macro_scores: empty per-case list")
    n = len(per_case)
    return (
        sum(s[0] for s in per_case) / n,
        sum(s[1] for s in per_case) / n,
        sum(s[2] for s in per_case) / n,
    )


def evaluate(
    cases: Sequence[CaseRecord],
    golds: Sequence[GoldAnswer] | None,
    preds: Sequence[CitationSet],
    mode: GoldMode = GoldMode.CITATIONS,
) -> EvalReport:
    """Score predictions against gold for an aligned set of cases."""
    case_ids = [c.case_id for c in cases]
    pred_by_id = {p.case_id: p for p in preds}
    if len(pred_by_id) != len(preds):
        raise ValidationError("duplicate case ids in predictions")
    missing = sorted(set(case_ids) - set(pred_by_id))
    extra = sorted(set(pred_by_id) - set(case_ids))
    if missing or extra:
        raise ValidationError(
            f"prediction/case id mismatch: missing predictions for {missing}, "
            f"predictions for unknown cases {extra}"
        )
    gold_by_id: dict[str, GoldAnswer] = {}
    if golds is not None:
        gold_by_id = {g.case_id: g for g in golds}
        if mode is GoldMode.CITATIONS:
            gmissing = sorted(set(case_ids) - set(gold_by_id))
            if gmissing:
                raise ValidationError(f"gold answers missing for cases {gmissing}")

    per_case: dict[str, CaseScore] = {}
    for case in cases:
        gold = gold_set(case, gold_by_id.get(case.case_id), mode)
        counts = confusion(pred_by_id[case.case_id], gold, len(case.sentences))
        p, r, f1 = prf(counts)
        per_case[case.case_id] = CaseScore(counts=counts, p=p, r=r, f1=f1)

    micro_p, micro_r, micro_f1 = micro_scores([s.counts for s in per_case.values()])
    macro_p, macro_r, macro_f1 = macro_scores([(s.p, s.r, s.f1) for s in per_case.values()])
    return EvalReport(
        micro_p=micro_p,
        micro_r=micro_r,
        micro_f1=micro_f1,
        macro_p=macro_p,
        macro_r=macro_r,
        macro_f1=macro_f1,
        per_case=per_case,
    )


@dataclass(frozen=True)
class CalibrationResult:
    points: tuple[tuple[float, EvalReport], ...]
    best_tau: float
    best_report: EvalReport


def calibrate(
    cases: Sequence[CaseRecord],
    golds: Sequence[GoldAnswer] | None,
    cfg: EnsembleConfig,
    tau_grid: Sequence[float],
    external: ScoreTable | None = None,
    mode: GoldMode = GoldMode.CITATIONS,
    vote_records: Mapping[str, VoteRecord] | None = None,
) -> CalibrationResult:
    """Sweep tau_ens over a grid, evaluating the full ensemble at each point.

    Method votes are computed once and rethresholded per grid point.  Ties
    on micro-F1 break toward the largest tau (highest precision).  Pass
    vote_records to reuse votes already derived from score files.
    """
    if not tau_grid:
        raise ValidationError("calibrate: empty tau grid")
    if list(tau_grid) != sorted(tau_grid):
        raise ValidationError("calibrate: tau grid must be ascending")

    if vote_records is None:
        if golds is None:
            raise ValidationError("calibrate: gold answers required to build queries")
        gold_by_id = {g.case_id: g for g in golds}
        records = {}
        for case in cases:
            if case.case_id not in gold_by_id:
                raise ValidationError(f"calibrate: no gold answer for case {case.case_id}")
            vb, vt, vc = method_vote_sets(case, gold_by_id[case.case_id], cfg, external)
            records[case.case_id] = combine_votes(vb, vt, vc, cfg, case)
    else:
        records = dict(vote_records)

    points = []
    prev_recall = None
    for tau in tau_grid:
        preds = [cited_at(records[c.case_id], tau) for c in cases]
        report = evaluate(cases, golds, preds, mode)
        if prev_recall is not None and report.micro_r > prev_recall:
            raise AssertionError(
                f"micro-recall increased from {prev_recall} to {report.micro_r} "
                f"at tau_ens={tau}; vote totals are not being rethresholded consistently"
            )
        prev_recall = report.micro_r
        points.append((tau, report))

    best_tau, best_report = points[0]
    for tau, report in points[1:]:
        if report.micro_f1 >= best_report.micro_f1:
            best_tau, best_report = tau, report
    return CalibrationResult(points=tuple(points), best_tau=best_tau, best_report=best_report)


# -- report serialization --

def report_to_dict(report: EvalReport) -> dict:
    return {
        "micro": {"p": report.micro_p, "r": report.micro_r, "f1": report.micro_f1},
        "macro": {"p": report.macro_p, "r": report.macro_r, "f1": report.macro_f1},
        "per_case": [
            {
                "case_id": cid,
                "tp": s.counts.tp,
                "fp": s.counts.fp,
                "fn": s.counts.fn,
                "p": s.p,
                "r": s.r,
                "f1": s.f1,
            }
            for cid, s in report.per_case.items()
        ],
    }


def write_report(report: EvalReport, sink: IO[str]) -> None:
    sink.write(json.dumps(report_to_dict(report), indent=2) + "\n")


def write_calibration(result: CalibrationResult, sink: IO[str]) -> None:
    """Sweep TSV: one row per grid point, best row repeated at the end."""
    sink.write("tau_ens\tmicro_p\tmicro_r\tmicro_f1\n")
    for tau, report in result.points:
        sink.write(f"{tau!r}\t{report.micro_p!r}\t{report.micro_r!r}\t{report.micro_f1!r}\n")
    best = result.best_report
    sink.write(f"# best\t{result.best_tau!r}\t{best.micro_p!r}\t{best.micro_r!r}\t{best.micro_f1!r}\n")
