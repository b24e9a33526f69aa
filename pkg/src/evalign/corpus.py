"""Case/gold-answer data model and file formats.

Three formats cross this module's boundary, all UTF-8:

* Case XML::

    <cases>
      <case id="STR">
        <patient_question>TXT</patient_question>
        <clinician_question>TXT</clinician_question>
        <note_excerpt_sentences>
          <sentence id="INT">TXT</sentence> ...
        </note_excerpt_sentences>
        <labels>  <!-- optional; when present must cover every sentence -->
          <label sentence="INT">essential|supplementary|not-relevant</label> ...
        </labels>
      </case>
      ...
    </cases>

* Gold JSON: ``{"cases": [{"case_id": STR, "answer_sentences":
  [{"text": STR, "citations": [INT, ...]}, ...]}, ...]}``

* Prediction JSON: ``{"predictions": [{"case_id": STR,
  "citations": [INT, ... ascending]}, ...]}``

Sentence ids are 1-based and must form the contiguous range 1..N within a
case.  Text content is preserved character-for-character except that
whitespace runs are normalized to single spaces (XML pretty-printing must
not leak into rendered prompts); de-identification spans such as
``[**...**]`` pass through untouched.
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Mapping

from .errors import ParseError, ValidationError

__all__ = [
    "RelevanceLabel",
    "NoteSentence",
    "CaseRecord",
    "AnswerSentence",
    "GoldAnswer",
    "CitationSet",
    "parse_cases",
    "parse_gold",
    "pair_cases_with_gold",
    "strip_citation_markers",
    "answer_query_text",
    "render_prompt",
    "write_citations",
    "read_citations",
    "load_cases",
    "load_gold",
    "load_citations",
]


class RelevanceLabel(str, Enum):
    ESSENTIAL = "essential"
    SUPPLEMENTARY = "supplementary"
    NOT_RELEVANT = "not-relevant"


@dataclass(frozen=True)
class NoteSentence:
    """One numbered sentence of a note excerpt."""

    id: int
    text: str

    def __post_init__(self) -> None:
        if self.id < 1:
            raise ValidationError(f"sentence id must be >= 1, got {self.id}")
        if not self.text:
            raise ValidationError(f"sentence {self.id} has empty text")


@dataclass(frozen=True)
class CaseRecord:
    """One QA case: questions plus the numbered note excerpt."""

    case_id: str
    patient_question: str
    clinician_question: str
    sentences: tuple[NoteSentence, ...]
    labels: Mapping[int, RelevanceLabel] | None = None

    def __post_init__(self) -> None:
        if not self.sentences:
            raise ValidationError(f"case {self.case_id} has no sentences")
        ids = [s.id for s in self.sentences]
        if ids != list(range(1, len(ids) + 1)):
            raise ValidationError(f"non-contiguous ids in case {self.case_id}: {ids}")
        if self.labels is not None and set(self.labels) != set(ids):
            raise ValidationError(
                f"case {self.case_id}: label ids {sorted(self.labels)} do not match "
                f"sentence ids 1..{len(ids)}"
            )

    @property
    def sentence_ids(self) -> set[int]:
        return set(range(1, len(self.sentences) + 1))


@dataclass(frozen=True)
class AnswerSentence:
    """One sentence of a gold answer, with the note sentences it cites."""

    text: str
    citations: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if list(self.citations) != sorted(set(self.citations)):
            raise ValidationError(f"citations not sorted/unique: {list(self.citations)}")
        if any(c < 1 for c in self.citations):
            raise ValidationError(f"citation ids must be >= 1: {list(self.citations)}")


@dataclass(frozen=True)
class GoldAnswer:
    """Clinician-authored answer for one case."""

    case_id: str
    answer_sentences: tuple[AnswerSentence, ...]

    def __post_init__(self) -> None:
        if not self.answer_sentences:
            raise ValidationError(f"gold answer for case {self.case_id} has no sentences")

    @property
    def cited_ids(self) -> set[int]:
        """Union of all per-sentence citation lists."""
        out: set[int] = set()
        for s in self.answer_sentences:
            out.update(s.citations)
        return out


@dataclass(frozen=True)
class CitationSet:
    """Final citation decision for one case: sorted note sentence ids."""

    case_id: str
    cited: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if list(self.cited) != sorted(set(self.cited)):
            raise ValidationError(
                f"case {self.case_id}: cited ids not sorted/unique: {list(self.cited)}"
            )
        if any(c < 1 for c in self.cited):
            raise ValidationError(f"case {self.case_id}: cited ids must be >= 1")

    @classmethod
    def from_ids(cls, case_id: str, ids: Iterable[int]) -> "CitationSet":
        return cls(case_id=case_id, cited=tuple(sorted(set(ids))))


_WS_RUN = re.compile(r"\s+")


def _clean_text(raw: str | None) -> str:
    return _WS_RUN.sub(" ", raw or "").strip()


# -- case XML --

def parse_cases(source: IO[str]) -> list[CaseRecord]:
    """Parse a case XML stream into CaseRecords.

    Raises ParseError (with line/column) on malformed XML and
    ValidationError on duplicate/non-contiguous sentence ids, empty
    sentence text, or label sets that do not cover the sentences.
    """
    try:
        root = ET.parse(source).getroot()
    except ET.ParseError as e:
        line, col = e.position
        raise ParseError(f"malformed case XML at line {line}, column {col}: {e.msg}") from e
    if root.tag != "cases":
        raise ValidationError(f"expected root element <cases>, got <{root.tag}>")

    records = []
    for case_el in root.findall("case"):
        case_id = case_el.get("id")
        if not case_id:
            raise ValidationError("<case> element missing id attribute")

        sent_container = case_el.find("note_excerpt_sentences")
        if sent_container is None:
            raise ValidationError(f"case {case_id}: missing <note_excerpt_sentences>")
        sentences = []
        seen_ids: set[int] = set()
        for sent_el in sent_container.findall("sentence"):
            sid_raw = sent_el.get("id")
            try:
                sid = int(sid_raw)  # type: ignore[arg-type]
            except (TypeError, ValueError):
                raise ValidationError(f"case {case_id}: bad sentence id {sid_raw!r}") from None
            if sid in seen_ids:
                raise ValidationError(f"duplicate sentence id {sid} in case {case_id}")
            seen_ids.add(sid)
            text = _clean_text(sent_el.text)
            if not text:
                raise ValidationError(f"case {case_id}: sentence {sid} has empty text")
            sentences.append(NoteSentence(id=sid, text=text))
        sentences.sort(key=lambda s: s.id)
        ids = [s.id for s in sentences]
        if ids != list(range(1, len(ids) + 1)):
            raise ValidationError(f"non-contiguous ids in case {case_id}: {ids}")

        labels = None
        labels_el = case_el.find("labels")
        if labels_el is not None:
            labels = {}
            for lab_el in labels_el.findall("label"):
                sid_raw = lab_el.get("sentence")
                try:
                    sid = int(sid_raw)  # type: ignore[arg-type]
                except (TypeError, ValueError):
                    raise ValidationError(
                        f"case {case_id}: bad label sentence id {sid_raw!r}"
                    ) from None
                value = _clean_text(lab_el.text)
                try:
                    label = RelevanceLabel(value)
                except ValueError:
                    raise ValidationError(
                        f"case {case_id}: unknown relevance label {value!r} for sentence {sid}"
                    ) from None
                if sid in labels:
                    raise ValidationError(f"case {case_id}: duplicate label for sentence {sid}")
                labels[sid] = label

        records.append(
            CaseRecord(
                case_id=case_id,
                patient_question=_clean_text(case_el.findtext("patient_question")),
                clinician_question=_clean_text(case_el.findtext("clinician_question")),
                sentences=tuple(sentences),
                labels=labels,
            )
        )
    return records


# -- gold JSON --

def parse_gold(source: IO[str]) -> list[GoldAnswer]:
    """Parse a gold-answer JSON stream.

    Citation ranges can only be checked against a case set; use
    pair_cases_with_gold for that.
    """
    try:
        doc = json.load(source)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed gold JSON: {e}") from e
    if not isinstance(doc, dict) or not isinstance(doc.get("cases"), list):
        raise ValidationError('gold JSON must be an object with a "cases" list')

    golds = []
    for entry in doc["cases"]:
        case_id = entry.get("case_id")
        if not isinstance(case_id, str) or not case_id:
            raise ValidationError(f"gold entry has missing/bad case_id: {entry!r}")
        raw_sents = entry.get("answer_sentences")
        if not isinstance(raw_sents, list) or not raw_sents:
            raise ValidationError(f"case {case_id}: answer_sentences must be a non-empty list")
        sentences = []
        for raw in raw_sents:
            text = raw.get("text")
            citations = raw.get("citations", [])
            if not isinstance(text, str):
                raise ValidationError(f"case {case_id}: answer sentence missing text")
            if not isinstance(citations, list) or any(
                not isinstance(c, int) or isinstance(c, bool) for c in citations
            ):
                raise ValidationError(f"case {case_id}: citations must be a list of integers")
            # Defensive: gold files store citations structurally, but raw
            # prose may still carry inline [i,j] markers.
            sentences.append(
                AnswerSentence(text=strip_citation_markers(text), citations=tuple(citations))
            )
        golds.append(GoldAnswer(case_id=case_id, answer_sentences=tuple(sentences)))
    return golds


def pair_cases_with_gold(
    cases: list[CaseRecord], golds: list[GoldAnswer]
) -> list[tuple[CaseRecord, GoldAnswer]]:
    """Align gold answers to cases, in case order.

    Raises ValidationError for gold entries with unknown case ids, cases
    with no gold answer, or citations outside 1..N of their case.
    """
    by_id = {g.case_id: g for g in golds}
    if len(by_id) != len(golds):
        dupes = sorted({g.case_id for g in golds if sum(x.case_id == g.case_id for x in golds) > 1})
        raise ValidationError(f"duplicate gold case ids: {dupes}")
    unknown = sorted(set(by_id) - {c.case_id for c in cases})
    if unknown:
        raise ValidationError(f"gold answers for unknown case ids: {unknown}")
    missing = [c.case_id for c in cases if c.case_id not in by_id]
    if missing:
        raise ValidationError(f"cases with no gold answer: {missing}")

    pairs = []
    for case in cases:
        gold = by_id[case.case_id]
        bad = sorted(gold.cited_ids - case.sentence_ids)
        if bad:
            raise ValidationError(
                f"case {case.case_id}: citations {bad} outside sentence range "
                f"1..{len(case.sentences)}"
            )
        pairs.append((case, gold))
    return pairs


# -- text utilities --

_CITATION_MARKER = re.compile(r"\s*\[\s*\d+(?:\s*,\s*\d+)*\s*\]")


def strip_citation_markers(text: str) -> str:
    """Remove inline bracketed citation lists like ``[13,20]`` from prose.

    Idempotent; text without markers passes through unchanged.
    """
    out = _CITATION_MARKER.sub("", text)
    out = re.sub(r"  +", " ", out)
    return out.strip()


def answer_query_text(gold: GoldAnswer) -> str:
    """The retrieval query for a case: all answer sentences joined by spaces."""
    return " ".join(s.text for s in gold.answer_sentences)


# -- prompt rendering --

_PROMPT_HEADER = (
    "[System]\n"
    "You are a clinical assistant answering\n"
    "a patient's question. /no_think\n"
    "Write a clear, professional answer of\n"
    "4-5 sentences (max 75 words). Rules:\n"
    "- Use ONLY information in the note.\n"
    "- Address what happened and why.\n"
    "- Do not speculate or add knowledge.\n"
    "- Do not reproduce medication lists\n"
    "  or dosing schedules.\n"
)


def render_prompt(case: CaseRecord) -> str:
    """Render the answer-generation prompt for one case.

    Byte-stable: "\\n" line endings, sentences as "N: text" lines in id
    order, ending with the bare "Answer:" line.
    """
    lines = [
        _PROMPT_HEADER,
        "\n",
        f"Patient Question: {case.patient_question}\n",
        f"Clinician-Interpreted Question: {case.clinician_question}\n",
        "Clinical Note Excerpt:\n",
    ]
    lines.extend(f"{s.id}: {s.text}\n" for s in case.sentences)
    lines.append("\nAnswer:")
    return "".join(lines)


# -- prediction JSON --

def write_citations(preds: list[CitationSet], sink: IO[str]) -> None:
    """Emit the prediction JSON format: cases in input order, ids ascending."""
    doc = {
        "predictions": [
            {"case_id": p.case_id, "citations": list(p.cited)} for p in preds
        ]
    }
    sink.write(json.dumps(doc, indent=2, ensure_ascii=False) + "\n")


def read_citations(source: IO[str]) -> list[CitationSet]:
    """Inverse of write_citations; rejects unsorted or duplicate ids."""
    try:
        doc = json.load(source)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed prediction JSON: {e}") from e
    if not isinstance(doc, dict) or not isinstance(doc.get("predictions"), list):
        raise ValidationError('prediction JSON must be an object with a "predictions" list')
    preds = []
    for entry in doc["predictions"]:
        case_id = entry.get("case_id")
        citations = entry.get("citations")
        if not isinstance(case_id, str) or not case_id:
            raise ValidationError(f"prediction entry has missing/bad case_id: {entry!r}")
        if not isinstance(citations, list) or any(
            not isinstance(c, int) or isinstance(c, bool) for c in citations
        ):
            raise ValidationError(f"case {case_id}: citations must be a list of integers")
        preds.append(CitationSet(case_id=case_id, cited=tuple(citations)))
    return preds


# -- path-based conveniences --

def load_cases(path: str) -> list[CaseRecord]:
    with open(path, encoding="utf-8") as f:
        return parse_cases(f)


def load_gold(path: str) -> list[GoldAnswer]:
    with open(path, encoding="utf-8") as f:
        return parse_gold(f)


def load_citations(path: str) -> list[CitationSet]:
    with open(path, encoding="utf-8") as f:
        return read_citations(f)
