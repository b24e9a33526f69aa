from pathlib import Path

import pytest

from evalign.corpus import AnswerSentence, CaseRecord, GoldAnswer, NoteSentence

_REPO = Path(__file__).resolve().parent.parent.parent


def _build_case(case_id, texts):
    return CaseRecord(
        case_id=case_id,
        patient_question="Patient question?",
        clinician_question="Clinician question?",
        sentences=tuple(NoteSentence(id=i, text=t) for i, t in enumerate(texts, start=1)),
    )


@pytest.fixture
def case_builder():
    return _build_case


@pytest.fixture(scope="session")
def synthetic_dir():
    return _REPO / "data" / "synthetic"


@pytest.fixture
def nine_sentence_case():
    """Nine-sentence neurology-shaped case used for pair-count checks."""
    return _build_case(
        "20",
        [
            "Discharge Instructions: You were evaluated on the neurology ward for headaches.",
            "We ran several tests to investigate the cause of your headaches.",
            "These tests ruled out serious intracranial causes of headache.",
            "A venogram of the brain also ruled out a clot in the veins of your brain.",
            "We started you on a new medication called verapamil.",
            "Take this medication once every day even on days without a headache.",
            "Please tell your primary doctor about this change.",
            "You can ask your primary doctor for a referral to a community neurologist.",
            "To keep your migraines controlled, avoid caffeine and keep a regular sleep schedule.",
        ],
    )


@pytest.fixture
def nine_sentence_gold():
    """Answer sentences citing [2], [3,4], [5,6], [], [], [9]."""
    return GoldAnswer(
        case_id="20",
        answer_sentences=(
            AnswerSentence(text="The team ran a series of tests to find the cause.", citations=(2,)),
            AnswerSentence(text="They ruled out raised pressure and blood clots.", citations=(3, 4)),
            AnswerSentence(text="Verapamil was begun daily to prevent headaches.", citations=(5, 6)),
            AnswerSentence(text="Spinning sensation with a migraine is vertigo from the migraine.", citations=()),
            AnswerSentence(text="Migraine with aura can also produce dizziness.", citations=()),
            AnswerSentence(text="Avoiding caffeine and regular sleep were recommended.", citations=(9,)),
        ),
    )
