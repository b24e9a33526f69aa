import io
import math
from xml.sax.saxutils import escape

import pytest

from evalign.corpus import (
    AnswerSentence,
    CaseRecord,
    GoldAnswer,
    NoteSentence,
    RelevanceLabel,
    parse_cases,
)

E = RelevanceLabel.ESSENTIAL
S = RelevanceLabel.SUPPLEMENTARY
NR = RelevanceLabel.NOT_RELEVANT


def build_case(case_id, texts, labels=None, patient_q="Patient question?", clinician_q="Clinician question?"):
    return CaseRecord(
        case_id=case_id,
        patient_question=patient_q,
        clinician_question=clinician_q,
        sentences=tuple(NoteSentence(id=i, text=t) for i, t in enumerate(texts, start=1)),
        labels=labels,
    )


def cases_to_xml(cases):
    """Serialize CaseRecords into the case XML grammar (test helper)."""
    parts = ["<cases>"]
    for c in cases:
        parts.append(f'  <case id="{escape(c.case_id)}">')
        parts.append(f"    <patient_question>{escape(c.patient_question)}</patient_question>")
        parts.append(f"    <clinician_question>{escape(c.clinician_question)}</clinician_question>")
        parts.append("    <note_excerpt_sentences>")
        for s in c.sentences:
            parts.append(f'      <sentence id="{s.id}">{escape(s.text)}</sentence>')
        parts.append("    </note_excerpt_sentences>")
        if c.labels is not None:
            parts.append("    <labels>")
            for sid in sorted(c.labels):
                parts.append(f'      <label sentence="{sid}">{c.labels[sid].value}</label>')
            parts.append("    </labels>")
        parts.append("  </case>")
    parts.append("</cases>")
    return "\n".join(parts) + "\n"


def roundtrip_case(case):
    """Push a CaseRecord through the XML grammar and parse it back."""
    return parse_cases(io.StringIO(cases_to_xml([case])))[0]


def golds_to_json(golds):
    import json

    doc = {
        "cases": [
            {
                "case_id": g.case_id,
                "answer_sentences": [
                    {"text": a.text, "citations": list(a.citations)} for a in g.answer_sentences
                ],
            }
            for g in golds
        ]
    }
    return json.dumps(doc, indent=2) + "\n"


# -- independent scoring oracles (shared by unit and acceptance tests) -------
# Deliberately naive re-evaluations of the stated formulas; no shared code
# with the implementation beyond the formulas themselves.


def bm25_oracle(query, docs, k1, b):
    n = len(docs)
    avglen = sum(len(d) for d in docs) / n
    out = []
    for d in docs:
        score = 0.0
        for t in sorted(set(query)):
            df = sum(1 for other in docs if t in other)
            tf = d.count(t)
            if df == 0 or tf == 0:
                continue
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * len(d) / avglen))
        out.append(score)
    return out


def tfidf_oracle(query_tokens, doc_tokens):
    import numpy as np

    vocab = sorted({t for d in doc_tokens for t in d})
    n = len(doc_tokens)
    idf = np.array(
        [math.log((1.0 + n) / (1.0 + sum(1 for d in doc_tokens if t in d))) + 1.0 for t in vocab]
    )

    def unit(tokens):
        v = np.array([tokens.count(t) for t in vocab], dtype=float) * idf
        norm = np.linalg.norm(v)
        return v / norm if norm > 0 else v

    q = unit(query_tokens)
    return [float(np.dot(q, unit(d))) for d in doc_tokens]


def random_token_case(rng, max_sentences=10, vocab_size=20):
    vocab = [f"w{i}" for i in range(vocab_size)]
    n = rng.randint(1, max_sentences)
    docs = [[rng.choice(vocab) for _ in range(rng.randint(1, 8))] for _ in range(n)]
    query = [rng.choice(vocab + ["zzzunseen"]) for _ in range(rng.randint(1, 6))]
    return docs, query


# Cardiology case shaped like the 21-sentence dev example: labels on the
# same ids, synthetic wording (source notes are not redistributable).
_CARDIO_TEXTS = [
    "History of Present Illness:",
    "While on the cardiology service his nausea and vomiting were attributed to congestive hepatopathy and his cough to fluid overload.",
    "Device interrogation showed no recorded events.",
    "He was diuresed aggressively with a large net negative fluid balance since admission.",
    "He underwent a right heart catheterization to trial milrinone, and the trial was judged successful.",
    "Filling pressures and cardiac index improved on the trial.",
    "Brief Hospital Course: middle-aged man with dilated cardiomyopathy and a reduced ejection fraction who presents with syncope and acute on chronic heart failure.",
    "# ACUTE ON CHRONIC SYSTOLIC HEART FAILURE",
    "An exacerbation of his chronic heart failure likely explains his presenting symptoms including syncope and abdominal pain.",
    "The most recent echocardiogram showed a severely reduced ejection fraction.",
    "He was admitted with a low output state causing raised abdominal pressures and liver congestion with pain.",
    "Abdominal distension was also thought to contribute to syncope.",
    "After the milrinone infusion his cardiac output and wedge pressure improved markedly.",
    "In the ICU he was maintained on a stable milrinone infusion and transferred to the floor.",
    "A loop diuretic was restarted and he was discharged on milrinone.",
    "The heart failure team discussed long-term prognosis with the patient.",
    "Discharge Instructions:",
    "You came into the hospital because your heart failure had gotten worse.",
    "A catheterization study showed that you would benefit from a medication called milrinone.",
    "After starting the milrinone drip your heart's pumping function improved.",
    "You were also diuresed to remove extra fluid.",
]

_CARDIO_LABELS = {
    **{i: NR for i in range(1, 22)},
    5: E, 10: E, 11: E, 13: E, 18: E, 19: E, 20: E,
    7: S, 9: S,
}


@pytest.fixture
def cardio_case():
    return build_case(
        "4",
        _CARDIO_TEXTS,
        labels=_CARDIO_LABELS,
        patient_q="My doctor did a heart catheterization. Was such an invasive procedure really needed.",
        clinician_q="Why was cardiac catheterization recommended for this patient?",
    )


@pytest.fixture
def cardio_gold():
    return GoldAnswer(
        case_id="4",
        answer_sentences=(
            AnswerSentence(
                text="A cardiac catheterization was recommended because of worsening heart failure and a very low ejection fraction on echocardiogram.",
                citations=(5, 10, 18),
            ),
            AnswerSentence(
                text="Low output heart failure raised abdominal pressure and congested the liver, causing pain.",
                citations=(11,),
            ),
            AnswerSentence(
                text="The catheterization showed that milrinone would help.",
                citations=(19,),
            ),
            AnswerSentence(
                text="Milrinone improved the heart's pumping, with better cardiac output and wedge pressure.",
                citations=(13, 20),
            ),
        ),
    )


# Neurology case shaped like the 9-sentence dev example: six answer
# sentences citing [2], [3,4], [5,6], [], [], [9].
_NEURO_TEXTS = [
    "Discharge Instructions: You were evaluated on the neurology ward for headaches of an unusual quality.",
    "We ran several tests to investigate the cause of your headaches, including brain imaging, laboratory work, and a lumbar puncture.",
    "These tests ruled out serious intracranial causes of headache, including a condition in which raised pressure inside the head damages vision.",
    "A venogram of the brain also ruled out a clot in the veins of your brain.",
    "We started you on a new medication called verapamil.",
    "Take this medication once every day even on days without a headache.",
    "Please tell your primary doctor about this change and keep your follow-up appointments.",
    "You can ask your primary doctor for a referral to a community neurologist if you prefer.",
    "To keep your migraines controlled, avoid caffeine and keep a regular sleep schedule.",
]

_NEURO_LABELS = {1: NR, 2: E, 3: E, 4: E, 5: E, 6: E, 7: NR, 8: NR, 9: E}


@pytest.fixture
def neuro_case():
    return build_case(
        "20",
        _NEURO_TEXTS,
        labels=_NEURO_LABELS,
        patient_q="What is causing the dizziness; I never heard of a migraine that makes your head spin like that.",
        clinician_q="How was migraine diagnosed as the cause of the spinning sensation?",
    )


@pytest.fixture
def neuro_gold():
    return GoldAnswer(
        case_id="20",
        answer_sentences=(
            AnswerSentence(
                text="The neurology team ran a series of tests and procedures to find the cause of the headaches.",
                citations=(2,),
            ),
            AnswerSentence(
                text="They ruled out raised intracranial pressure and blood clots.",
                citations=(3, 4),
            ),
            AnswerSentence(
                text="A daily medication, verapamil, was begun to prevent the headaches.",
                citations=(5, 6),
            ),
            AnswerSentence(
                text="A spinning sensation with a migraine is vertigo caused by the migraine itself.",
                citations=(),
            ),
            AnswerSentence(
                text="Migraine with aura can also produce dizziness.",
                citations=(),
            ),
            AnswerSentence(
                text="Avoiding caffeine and keeping a regular sleep cycle were recommended for migraine control.",
                citations=(9,),
            ),
        ),
    )


@pytest.fixture
def tiny_case():
    return build_case(
        "7",
        [
            "He was admitted with volume overload.",
            "Furosemide was started with good urine output.",
        ],
        patient_q="Why was I given a water pill?",
        clinician_q="Why was furosemide started for this patient?",
    )
