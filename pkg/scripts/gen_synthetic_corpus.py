#!/usr/bin/env python3
"""Regenerate the bundled synthetic corpus under data/synthetic/.

Deterministic (fixed seed).  Twenty cases shaped like a dev split: numbered
note sentences with relevance labels, gold answers whose sentences cite
note sentences (plus a few empty-citation answer sentences), and a planted
reranker score file in which cited sentences usually, but not always,
score high.  Answer sentences reuse content words from their cited note
sentences so the lexical scorers have real signal.

Usage: python scripts/gen_synthetic_corpus.py [outdir]
"""

from __future__ import annotations

import io
import json
import random
import sys
from pathlib import Path
from xml.sax.saxutils import escape

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from evalign.scorefile import write_score_file  # noqa: E402

SEED = 20

TOPICS = [
    ("heart failure", "furosemide", "volume overload", "shortness of breath", "an echocardiogram"),
    ("pneumonia", "antibiotics", "a right sided infiltrate", "productive cough", "a chest xray"),
    ("atrial fibrillation", "anticoagulation", "a rapid ventricular rate", "palpitations", "an electrocardiogram"),
    ("acute pancreatitis", "intravenous fluids", "an elevated lipase", "epigastric pain", "laboratory testing"),
    ("acute kidney injury", "gentle hydration", "a rising creatinine", "decreased urine output", "renal labs"),
    ("copd exacerbation", "steroids and nebulizers", "diffuse wheezing", "worsening dyspnea", "an examination"),
    ("ischemic stroke", "antiplatelet therapy", "a small infarct", "left sided weakness", "brain imaging"),
    ("gastrointestinal bleeding", "a blood transfusion", "a falling hemoglobin", "dark stools", "serial blood counts"),
    ("hyponatremia", "fluid restriction", "a low serum sodium", "confusion", "a metabolic panel"),
    ("cellulitis", "intravenous antibiotics", "spreading redness", "leg swelling", "a clinical examination"),
    ("sepsis", "broad spectrum antibiotics", "an elevated lactate", "fevers and rigors", "blood cultures"),
    ("pulmonary embolism", "therapeutic anticoagulation", "a segmental clot", "pleuritic chest pain", "a ct angiogram"),
    ("diabetic ketoacidosis", "an insulin infusion", "a high anion gap", "nausea and vomiting", "serum chemistries"),
    ("urinary tract infection", "a short antibiotic course", "positive urine studies", "burning with urination", "a urinalysis"),
]

FILLERS = [
    "Vital signs remained stable on the floor.",
    "Diet was advanced as tolerated.",
    "Physical therapy evaluated the patient before discharge.",
    "He remained afebrile overnight.",
    "Home medications were reviewed with the pharmacist.",
    "Follow up was arranged with the primary care doctor.",
    "Please keep all scheduled appointments.",
    "The family was updated at the bedside.",
    "He tolerated the plan without complaint.",
    "Nursing monitored intake and output each shift.",
]

KNOWLEDGE_ANSWERS = [
    "Based on general clinical knowledge, rest and hydration support recovery.",
    "Many patients feel tired for several days after such an illness.",
    "This kind of symptom often improves gradually at home.",
    "General guidance is to return if symptoms suddenly worsen.",
]


def build_case(rng: random.Random, case_id: str):
    condition, treatment, finding, symptom, test = TOPICS[rng.randrange(len(TOPICS))]
    evidence = [
        f"He presented with {symptom} and was found to have {condition}.",
        f"{test.capitalize()} showed {finding}.",
        f"{treatment.capitalize()} was started with improvement in {symptom}.",
        f"He was admitted for management of {condition}.",
        f"Repeat testing showed improvement of {finding}.",
        f"On discharge his {symptom} had largely resolved on {treatment}.",
    ]
    rng.shuffle(evidence)
    n_evidence = rng.randint(3, len(evidence))
    evidence = evidence[:n_evidence]

    supplementary = [
        f"He has a longstanding history of {rng.choice(TOPICS)[0]}.",
        "His outpatient regimen was continued during the stay.",
    ][: rng.randint(0, 2)]

    n_filler = rng.randint(3, 8)
    fillers = rng.sample(FILLERS, n_filler)

    body = (
        [("header", "Brief Hospital Course:")]
        + [("evidence", s) for s in evidence]
        + [("supplementary", s) for s in supplementary]
        + [("filler", s) for s in fillers]
    )
    tail = body[1:]
    rng.shuffle(tail)
    body = body[:1] + tail

    sentences = [(i, kind, text) for i, (kind, text) in enumerate(body, start=1)]
    essential_ids = [i for i, kind, _ in sentences if kind == "evidence"]
    supplementary_ids = [i for i, kind, _ in sentences if kind == "supplementary"]

    labels = {}
    for i, kind, _ in sentences:
        labels[i] = {"evidence": "essential", "supplementary": "supplementary"}.get(
            kind, "not-relevant"
        )

    # answer sentences: each cites 1-2 essential sentences and reuses their
    # content words; occasionally an uncited general-knowledge sentence
    glue = {"a", "an", "the", "and", "of", "in", "on", "to", "was", "with", "he", "his", "for", "had"}
    remaining = list(essential_ids)
    rng.shuffle(remaining)
    answer_sentences = []
    while remaining:
        take = remaining[: rng.randint(1, 2)]
        remaining = remaining[len(take) :]
        cited_texts = [t for i, _, t in sentences if i in take]
        words = []
        for t in cited_texts:
            ws = [w.strip(".").lower() for w in t.split()]
            words.extend(w for w in ws if w not in glue)
        summary = " ".join(dict.fromkeys(words))
        answer_sentences.append(
            {"text": f"In the hospital, {summary}.", "citations": sorted(take)}
        )
    if rng.random() < 0.6:
        answer_sentences.append({"text": rng.choice(KNOWLEDGE_ANSWERS), "citations": []})
    rng.shuffle(answer_sentences)

    case = {
        "case_id": case_id,
        "patient_question": f"Why did I need {treatment} while I was in the hospital?",
        "clinician_question": f"Why was {treatment} indicated for this patient's {condition}?",
        "sentences": [(i, text) for i, _, text in sentences],
        "labels": labels,
    }
    gold = {"case_id": case_id, "answer_sentences": answer_sentences}
    cited_union = sorted({c for a in answer_sentences for c in a["citations"]})
    return case, gold, cited_union, supplementary_ids


def plant_ce_scores(rng: random.Random, case, cited_union):
    # scores live in sigmoid space; after per-case max-normalization,
    # anything above ~0.1 * max earns a reranker vote, so irrelevant
    # sentences sit near zero with occasional confuser bumps
    rows = []
    for sid, _ in case["sentences"]:
        if sid in cited_union:
            score = rng.uniform(0.001, 0.05) if rng.random() < 0.10 else rng.uniform(0.60, 0.98)
        else:
            score = rng.uniform(0.15, 0.45) if rng.random() < 0.12 else rng.uniform(0.0005, 0.04)
        rows.append((case["case_id"], sid, round(score, 6)))
    return rows


def cases_to_xml(cases) -> str:
    parts = ["<cases>"]
    for c in cases:
        parts.append(f'  <case id="{escape(c["case_id"])}">')
        parts.append(f'    <patient_question>{escape(c["patient_question"])}</patient_question>')
        parts.append(
            f'    <clinician_question>{escape(c["clinician_question"])}</clinician_question>'
        )
        parts.append("    <note_excerpt_sentences>")
        for sid, text in c["sentences"]:
            parts.append(f'      <sentence id="{sid}">{escape(text)}</sentence>')
        parts.append("    </note_excerpt_sentences>")
        parts.append("    <labels>")
        for sid in sorted(c["labels"]):
            parts.append(f'      <label sentence="{sid}">{c["labels"][sid]}</label>')
        parts.append("    </labels>")
        parts.append("  </case>")
    parts.append("</cases>")
    return "\n".join(parts) + "\n"


def main() -> None:
    outdir = Path(sys.argv[1]) if len(sys.argv) > 1 else REPO / "data" / "synthetic"
    outdir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)

    cases, golds, score_rows = [], [], []
    for i in range(1, 21):
        case, gold, cited_union, _ = build_case(rng, str(i))
        cases.append(case)
        golds.append(gold)
        score_rows.extend(plant_ce_scores(rng, case, cited_union))

    (outdir / "cases.xml").write_text(cases_to_xml(cases), encoding="utf-8")
    (outdir / "gold.json").write_text(
        json.dumps({"cases": golds}, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    buf = io.StringIO()
    write_score_file(score_rows, buf)
    (outdir / "ce_scores.tsv").write_text(buf.getvalue(), encoding="utf-8")
    print(f"wrote {len(cases)} cases, {len(score_rows)} score rows -> {outdir}")


if __name__ == "__main__":
    main()
