"""Per-case lexical relevance scoring.

Both scorers treat a single case's note sentences as the whole collection:
document frequencies, average length, and vocabularies are fitted per case,
never across cases.  Raw scores are made comparable across cases by
relative normalization (divide by the per-case maximum), after which a
threshold in [0, 1] turns them into votes.

Formulas, fixed so they are independently checkable:

* BM25 per sentence: sum over *unique* query terms of
  ``idf(t) * tf*(k1+1) / (tf + k1*(1 - b + b*len/avglen))`` with
  ``idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))`` (non-negative variant;
  classic idf goes negative for df > N/2, common in collections this small).
* TF-IDF: term-count vectors weighted by ``idf(t) = ln((1+N)/(1+df)) + 1``,
  L2-normalized; score is the cosine against the query vector, with
  out-of-vocabulary query terms ignored.

No stopword removal, no stemming.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from .corpus import CaseRecord
from .errors import ValidationError

__all__ = [
    "BM25Params",
    "Method",
    "ScoreVector",
    "tokenize",
    "bm25_scores",
    "tfidf_cosine",
    "normalize_relative",
    "votes_from_scores",
]


def _is_token_char(ch: str) -> bool:
    # not-uppercase guards exotic letters that survive lower() unchanged
    # (e.g. mathematical capitals outside the NFKC-mapped range)
    return ch.isalnum() and not ch.isupper()


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any character that is not a letter or digit.

    De-identification delimiters ``[**`` / ``**]`` are dropped (inner text
    kept); text is NFKC-normalized so fullwidth/compatibility forms fold to
    their plain equivalents; empty fragments are dropped.
    """
    text = text.replace("[**", " ").replace("**]", " ")
    text = unicodedata.normalize("NFKC", text).lower()
    tokens = []
    current: list[str] = []
    for ch in text:
        if _is_token_char(ch):
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


@dataclass(frozen=True)
class BM25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self) -> None:
        if not self.k1 > 0:
            raise ValidationError(f"bm25 k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValidationError(f"bm25 b must be in [0,1], got {self.b}")


def bm25_scores(
    query: Sequence[str],
    sentences: Sequence[Sequence[str]],
    params: BM25Params = BM25Params(),
) -> dict[int, float]:
    """Score every sentence against the query; keys are 1-based positions.

    The collection is exactly `sentences`: df and average length come from
    them alone.  Sentences sharing no term with the query score 0.
    """
    if not sentences:
        raise ValidationError("bm25_scores: sentence collection is empty")
    n = len(sentences)
    tfs = [Counter(toks) for toks in sentences]
    lens = [len(toks) for toks in sentences]
    avglen = sum(lens) / n
    if avglen == 0:
        return {i: 0.0 for i in range(1, n + 1)}

    df = {t: sum(1 for tf in tfs if t in tf) for t in set(query)}
    # sorted term order keeps float accumulation reproducible across runs
    terms = [t for t in sorted(df) if df[t] > 0]
    idf = {t: math.log(1.0 + (n - df[t] + 0.5) / (df[t] + 0.5)) for t in terms}

    k1, b = params.k1, params.b
    scores: dict[int, float] = {}
    for i, (tf, length) in enumerate(zip(tfs, lens), start=1):
        s = 0.0
        norm = k1 * (1.0 - b + b * length / avglen)
        for t in terms:
            f = tf.get(t, 0)
            if f:
                s += idf[t] * (f * (k1 + 1.0)) / (f + norm)
        scores[i] = s
    return scores


def _l2_unit(weights: dict[str, float]) -> dict[str, float]:
    norm = math.sqrt(sum(w * w for _, w in sorted(weights.items())))
    if norm == 0.0:
        return {}
    return {t: w / norm for t, w in weights.items()}


def tfidf_cosine(query_text: str, case: CaseRecord) -> dict[int, float]:
    """Cosine similarity of each note sentence to the query, keyed by id.

    Vocabulary and document frequencies are fitted on the case's note
    sentences only; query terms outside that vocabulary are ignored.
    """
    sent_tokens = [tokenize(s.text) for s in case.sentences]
    n = len(sent_tokens)
    df: Counter[str] = Counter()
    for toks in sent_tokens:
        df.update(set(toks))
    idf = {t: math.log((1.0 + n) / (1.0 + dft)) + 1.0 for t, dft in df.items()}

    def unit_vector(tokens: Sequence[str]) -> dict[str, float]:
        counts = Counter(t for t in tokens if t in idf)
        return _l2_unit({t: c * idf[t] for t, c in counts.items()})

    q_vec = unit_vector(tokenize(query_text))
    scores: dict[int, float] = {}
    for sentence, toks in zip(case.sentences, sent_tokens):
        s_vec = unit_vector(toks)
        dot = sum(q_vec[t] * s_vec[t] for t in sorted(q_vec.keys() & s_vec.keys()))
        # Cauchy-Schwarz bounds the true value to [0,1]; clamp rounding spill
        scores[sentence.id] = min(1.0, max(0.0, dot))
    return scores


def normalize_relative(raw: Mapping[int, float]) -> dict[int, float] | None:
    """Divide by the per-case maximum; None (method abstains) if max <= 0."""
    if not raw:
        return None
    s_max = max(raw.values())
    if s_max <= 0.0:
        return None
    return {i: v / s_max for i, v in raw.items()}


def votes_from_scores(normalized: Mapping[int, float] | None, tau: float) -> set[int]:
    """Ids with normalized score >= tau (inclusive); empty on abstention.

    Inclusivity is robust to quotient rounding: a score within 1e-12
    relative of tau counts as at the threshold (0.09/0.9 must reach
    tau=0.10 even though the double falls one ulp short).
    """
    if normalized is None:
        return set()
    return {
        i
        for i, v in normalized.items()
        if v >= tau or math.isclose(v, tau, rel_tol=1e-12)
    }


class Method(str, Enum):
    BM25 = "bm25"
    TFIDF = "tfidf"
    EXTERNAL = "external"


@dataclass(frozen=True)
class ScoreVector:
    """One method's raw and normalized scores for one case.

    `normalized` is None when the method abstains for the case (all raw
    scores <= 0, so relative normalization is undefined).
    """

    case_id: str
    method: Method
    raw: Mapping[int, float]
    normalized: Mapping[int, float] | None = field(default=None)

    def __post_init__(self) -> None:
        if self.normalized is not None and set(self.normalized) != set(self.raw):
            raise ValidationError(
                f"case {self.case_id}: raw and normalized key sets differ"
            )

    @classmethod
    def from_raw(cls, case_id: str, method: Method, raw: Mapping[int, float]) -> "ScoreVector":
        raw = dict(raw)
        return cls(case_id=case_id, method=method, raw=raw, normalized=normalize_relative(raw))

    def votes(self, tau: float) -> set[int]:
        return votes_from_scores(self.normalized, tau)
