import dataclasses
import io
import itertools

import pytest
from hypothesis import given, strategies as st

from conftest import build_case
from evalign.corpus import AnswerSentence, GoldAnswer
from evalign.ensemble import (
    EnsembleConfig,
    cited_at,
    combine_votes,
    config_to_dict,
    decide,
    lexical_only,
    load_config,
    run_case,
)
from evalign.errors import ValidationError
from evalign.lexical import BM25Params
from evalign.scorefile import ScoreTable

SHIPPED_CFG = EnsembleConfig()  # calibrated defaults: 0.527/0.493/0.855, tau_ens=0.85


def three_sentence_case(case_id="1"):
    return build_case(case_id, ["alpha beta.", "gamma delta.", "epsilon zeta."])


# -- config --

def test_config_defaults():
    cfg = EnsembleConfig()
    assert (cfg.w_bm25, cfg.w_tfidf, cfg.w_ce) == (0.527, 0.493, 0.855)
    assert (cfg.tau_bm25, cfg.tau_tfidf, cfg.tau_ce, cfg.tau_ens) == (0.50, 0.20, 0.10, 0.85)
    assert cfg.bm25_params == BM25Params(k1=1.2, b=0.75)
    assert cfg.allow_missing_external is False


def test_config_rejects_unreachable_tau_ens():
    with pytest.raises(ValidationError, match="exceeds the weight sum"):
        EnsembleConfig(tau_ens=2.0)


def test_config_rejects_all_zero_weights():
    with pytest.raises(ValidationError, match="at least one"):
        EnsembleConfig(w_bm25=0.0, w_tfidf=0.0, w_ce=0.0, tau_ens=0.0)


def test_config_rejects_negative_weight():
    with pytest.raises(ValidationError):
        EnsembleConfig(w_bm25=-0.1)


def test_config_json_roundtrip():
    cfg = EnsembleConfig(tau_ens=0.5, allow_missing_external=True)
    doc = config_to_dict(cfg)
    assert load_config(io.StringIO(__import__("json").dumps(doc))) == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ValidationError, match="unknown config keys"):
        load_config(io.StringIO('{"w_bm2": 0.5}'))


# -- combine_votes / decide --

def test_combine_votes_shipped_weight_sums():
    case = three_sentence_case()
    record = combine_votes({1}, {1}, set(), SHIPPED_CFG, case)
    assert record.votes[1].total == 0.527 + 0.493
    assert record.votes[2].total == 0.0
    record_all = combine_votes({1}, {1}, {1}, SHIPPED_CFG, case)
    assert record_all.votes[1].total == 0.527 + 0.493 + 0.855


def test_combine_votes_covers_unvoted_sentences():
    case = three_sentence_case()
    record = combine_votes({1}, set(), set(), SHIPPED_CFG, case)
    assert set(record.votes) == {1, 2, 3}
    assert record.votes[3].total == 0.0


def test_combine_votes_rejects_unknown_sentence_id():
    case = three_sentence_case()
    with pytest.raises(ValidationError, match="unknown sentence ids \\[9\\]"):
        combine_votes({9}, set(), set(), SHIPPED_CFG, case)


def test_decide_shipped_threshold_examples():
    case = three_sentence_case()
    # bm25+tfidf agreement suffices; either lexical method alone does not
    record = combine_votes({1, 2}, {1}, {3}, SHIPPED_CFG, case)
    assert decide(record, SHIPPED_CFG).cited == (1, 3)


def test_decision_rule_equivalence_all_eight_combos():
    case = build_case("1", ["one."])
    for c_bm25, c_tfidf, c_ce in itertools.product([False, True], repeat=3):
        record = combine_votes(
            {1} if c_bm25 else set(),
            {1} if c_tfidf else set(),
            {1} if c_ce else set(),
            SHIPPED_CFG,
            case,
        )
        cited = 1 in decide(record, SHIPPED_CFG).cited
        assert cited == (c_ce or (c_bm25 and c_tfidf))


def test_decide_tau_zero_cites_everything():
    case = three_sentence_case()
    record = combine_votes(set(), set(), set(), SHIPPED_CFG, case)
    assert cited_at(record, 0.0).cited == (1, 2, 3)


@given(
    st.sets(st.integers(1, 6)),
    st.sets(st.integers(1, 6)),
    st.sets(st.integers(1, 6)),
    st.floats(0.0, 1.875),
    st.floats(0.0, 1.875),
)
def test_monotone_in_tau_ens(vb, vt, vc, tau1, tau2):
    tau1, tau2 = min(tau1, tau2), max(tau1, tau2)
    case = build_case("1", [f"word{i}." for i in range(1, 7)])
    record = combine_votes(vb, vt, vc, SHIPPED_CFG, case)
    assert set(cited_at(record, tau2).cited) <= set(cited_at(record, tau1).cited)


@given(
    st.sets(st.integers(1, 6)),
    st.sets(st.integers(1, 6)),
    st.sets(st.integers(1, 6)),
    st.integers(1, 6),
    st.sampled_from(["bm25", "tfidf", "ce"]),
)
def test_adding_a_vote_never_removes_citations(vb, vt, vc, sid, method):
    case = build_case("1", [f"word{i}." for i in range(1, 7)])
    before = decide(combine_votes(vb, vt, vc, SHIPPED_CFG, case), SHIPPED_CFG)
    grown = {
        "bm25": (vb | {sid}, vt, vc),
        "tfidf": (vb, vt | {sid}, vc),
        "ce": (vb, vt, vc | {sid}),
    }[method]
    after = decide(combine_votes(*grown, SHIPPED_CFG, case), SHIPPED_CFG)
    assert set(before.cited) <= set(after.cited)


# -- run_case --

def lexical_overlap_fixture():
    case = build_case(
        "1",
        [
            "milrinone improved cardiac output and wedge pressure.",
            "he was discharged home with follow up.",
            "renal function remained stable on treatment.",
        ],
    )
    gold = GoldAnswer(
        case_id="1",
        answer_sentences=(
            AnswerSentence(text="Milrinone improved cardiac output and wedge pressure.", citations=(1,)),
        ),
    )
    return case, gold


def test_run_case_lexical_only_agreement_cites():
    case, gold = lexical_overlap_fixture()
    cfg = lexical_only(SHIPPED_CFG)
    record, cited = run_case(case, gold, cfg)
    # sentence 1 matches the query almost verbatim: both lexical methods vote
    assert record.votes[1].bm25 and record.votes[1].tfidf
    assert 1 in cited.cited
    assert record.votes[1].total == 0.527 + 0.493


def test_run_case_ce_alone_cites_with_shipped_config():
    case = build_case("9", [f"filler sentence number {i}." for i in range(1, 8)])
    gold = GoldAnswer(
        case_id="9",
        answer_sentences=(AnswerSentence(text="completely disjoint answer words.", citations=()),),
    )
    scores = {("9", i): 0.01 for i in range(1, 8)}
    scores[("9", 7)] = 0.99
    record, cited = run_case(case, gold, SHIPPED_CFG, ScoreTable(scores=scores))
    assert cited.cited == (7,)
    assert record.votes[7].ce and not record.votes[7].bm25


def test_run_case_empty_query_leaves_decision_to_ce():
    case = build_case("2", ["alpha beta gamma.", "delta epsilon."])
    gold = GoldAnswer(
        case_id="2", answer_sentences=(AnswerSentence(text="...", citations=()),)
    )
    table = ScoreTable(scores={("2", 1): 0.9, ("2", 2): 0.05})
    record, cited = run_case(case, gold, SHIPPED_CFG, table)
    assert not record.votes[1].bm25 and not record.votes[1].tfidf
    assert cited.cited == (1,)


def test_run_case_missing_external_requires_flag():
    case, gold = lexical_overlap_fixture()
    with pytest.raises(ValidationError, match="external scores absent"):
        run_case(case, gold, SHIPPED_CFG)


def test_run_case_missing_external_ok_with_zero_weight():
    case, gold = lexical_overlap_fixture()
    cfg = dataclasses.replace(SHIPPED_CFG, w_ce=0.0)
    record, cited = run_case(case, gold, cfg)
    assert 1 in cited.cited


def test_run_case_rejects_mismatched_gold():
    case, _ = lexical_overlap_fixture()
    gold = GoldAnswer(case_id="x", answer_sentences=(AnswerSentence(text="t"),))
    with pytest.raises(ValidationError, match="does not match"):
        run_case(case, gold, lexical_only(SHIPPED_CFG))


def test_lexical_only_equivalent_to_explicit_config():
    case, gold = lexical_overlap_fixture()
    explicit = dataclasses.replace(SHIPPED_CFG, w_ce=0.0, allow_missing_external=True)
    _, cited_a = run_case(case, gold, lexical_only(SHIPPED_CFG))
    _, cited_b = run_case(case, gold, explicit)
    assert cited_a == cited_b
