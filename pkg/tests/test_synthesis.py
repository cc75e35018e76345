import pytest

from hopsynth.corpus import Document
from hopsynth.entities import HeuristicRecognizer
from hopsynth.genbackend import MockBackend, prompt_key
from hopsynth.pairing import DocumentPair
from hopsynth.promptkit import (
    FEVER_VERIFY,
    MQA_ANSWER,
    MQA_QUERY_GEN,
    MQA_QUESTION_GEN,
    builtin_examples,
    render_prompt,
)
from hopsynth.synthesis import (
    FilterConfig,
    QuestionDraft,
    answer_question,
    classify_hops,
    decide_answerable,
    entity_count_filter,
    generate_queries,
    generate_question,
)


def example_pair(setting, index):
    """Build a DocumentPair carrying the texts of a built-in example."""
    ex = builtin_examples(MQA_QUESTION_GEN, setting)[index]
    d1 = Document(f"{setting}{index}a", f"T{setting}{index}a", ex.documents[0], (), None)
    d2 = Document(f"{setting}{index}b", f"T{setting}{index}b", ex.documents[1], (), None)
    return DocumentPair(d1, d2, setting), ex


def table_for(task, setting, pair, completion, answer=None, question=None):
    prompt = render_prompt(
        task, setting, builtin_examples(task, setting),
        [pair.d1.text, pair.d2.text], answer=answer, question=question,
    )
    return {prompt_key(prompt.text): completion}


def test_generate_question_reproduces_appendix():
    pair, ex = example_pair("topic", 1)  # the Saimaa Gesture example
    backend = MockBackend(
        table=table_for(
            MQA_QUESTION_GEN, "topic", pair, " " + ex.question_or_claim, answer=ex.answer
        )
    )
    draft = generate_question(pair, ex.answer, backend)
    assert draft is not None
    assert draft.text == (
        "Which documentary is about Finnish rock groups, Adam Clayton Powell or The Saimaa Gesture?"
    )
    assert draft.prepared_answer == "The Saimaa Gesture"


def test_generate_question_empty_completion_drops():
    pair, ex = example_pair("topic", 0)
    backend = MockBackend(table={})
    assert generate_question(pair, ex.answer, backend) is None


def test_generate_question_repairs_question_mark():
    pair, ex = example_pair("hyper", 0)
    backend = MockBackend(rule=lambda text, seed: " Which range rises")
    draft = generate_question(pair, ex.answer, backend)
    assert draft.text == "Which range rises?"
    backend = MockBackend(rule=lambda text, seed: " Which range? Also trailing babble")
    draft = generate_question(pair, ex.answer, backend)
    assert draft.text == "Which range?"


def test_fever_requires_hyper_pair():
    pair, ex = example_pair("topic", 0)
    backend = MockBackend(table={})
    with pytest.raises(ValueError):
        generate_question(pair, "SUPPORTS", backend, task="fever")


def draft_for(setting, text, index=0):
    pair, ex = example_pair(setting, index)
    return QuestionDraft(pair=pair, task="mqa", text=text, prepared_answer=ex.answer)


def test_entity_filter_thresholds():
    rec = HeuristicRecognizer()
    config = FilterConfig()
    hyper_one = draft_for("hyper", "Where was the composer of film Avidathe Pole Ivideyum born?")
    assert entity_count_filter(hyper_one, rec, config)
    topic_one = draft_for("topic", "Where was the composer of film Avidathe Pole Ivideyum born?")
    assert not entity_count_filter(topic_one, rec, config)
    topic_two = draft_for("topic", "Does The Border Surrender or Unsane have more members?")
    assert entity_count_filter(topic_two, rec, config)
    zero = draft_for("hyper", "What is the birthplace of the man?")
    assert not entity_count_filter(zero, rec, config)


def test_entity_filter_recognizer_failure_drops(caplog):
    def broken(texts):
        raise RuntimeError("recognizer down")

    draft = draft_for("hyper", "Does The Border Surrender or Unsane have more members?")
    with caplog.at_level("WARNING"):
        assert not entity_count_filter(draft, broken, FilterConfig())
    assert any("recognizer" in r.message for r in caplog.records)


def test_answer_question_pagemaster_fixture():
    pair, ex = example_pair("hyper", 3)
    backend = MockBackend(
        table=table_for(
            MQA_ANSWER, "hyper", pair, " Turner Pictures\n\nDocument: noise",
            question=ex.question_or_claim,
        )
    )
    got = answer_question(ex.question_or_claim, [pair.d1, pair.d2], backend, setting="hyper")
    assert got == "Turner Pictures"


def test_answer_question_single_doc_and_empty():
    pair, ex = example_pair("hyper", 3)
    backend = MockBackend(rule=lambda text, seed: " some guess")
    got = answer_question(ex.question_or_claim, [pair.d1], backend, setting="hyper")
    assert got == "some guess"
    backend = MockBackend(table={})
    assert answer_question(ex.question_or_claim, [pair.d1], backend, setting="hyper") == ""
    with pytest.raises(ValueError):
        answer_question("q", [], backend)


def test_decide_answerable():
    config = FilterConfig()
    assert decide_answerable("Boston Celtics", "Boston Celtics", config)
    assert not decide_answerable("Celtics", "Boston Celtics", config)  # F1 = 2/3
    # ten tokens each side, seven shared: F1 lands exactly on 0.70
    pred = "c1 c2 c3 c4 c5 c6 c7 x8 x9 x10"
    gold = "c1 c2 c3 c4 c5 c6 c7 y8 y9 y10"
    assert not decide_answerable(pred, gold, config)


def test_decide_answerable_fever_labels():
    config = FilterConfig()
    assert decide_answerable("SUPPORTS", "supports", config, task="fever")
    assert not decide_answerable("SUPPORTS", "REFUTES", config, task="fever")
    assert not decide_answerable("", "SUPPORTS", config, task="fever")


def test_decide_answerable_monotone_in_threshold():
    import random

    rng = random.Random(5)
    words = ["alpha", "beta", "gamma", "delta"]
    for _ in range(100):
        pred = " ".join(rng.choices(words, k=rng.randint(1, 5)))
        gold = " ".join(rng.choices(words, k=rng.randint(1, 5)))
        low = decide_answerable(pred, gold, FilterConfig(f1_threshold=0.3))
        high = decide_answerable(pred, gold, FilterConfig(f1_threshold=0.9))
        assert low or not high  # raising the threshold never flips False -> True


def hop_case(setting, answerable, first, second):
    draft = draft_for(setting, "Some question?", index=0)
    prepared = draft.prepared_answer
    pred_both = prepared if answerable else "totally wrong thing"
    pred_first = pred_both if first else "junk one"
    pred_second = pred_both if second else "junk two"
    return classify_hops(draft, pred_both, pred_first, pred_second, FilterConfig())


def test_classify_hops_truth_table_hyper():
    # agreement keeps the draft even when the prediction differs from the
    # prepared answer; without agreement only the prepared answer saves it
    for first in (False, True):
        for second in (False, True):
            decision = hop_case("hyper", False, first, second)
            if first or second:
                assert (decision.verdict, decision.hops) == ("keep", "one")
            else:
                assert decision.verdict == "drop"
    keep_one = hop_case("hyper", True, True, False)
    assert (keep_one.verdict, keep_one.hops) == ("keep", "one")
    assert keep_one.answerable_in == frozenset({"both", "first"})
    keep_two = hop_case("hyper", True, False, False)
    assert (keep_two.verdict, keep_two.hops) == ("keep", "two")
    assert keep_two.answerable_in == frozenset({"both"})


def test_classify_hops_topic_always_two():
    decision = hop_case("topic", True, True, True)
    assert (decision.verdict, decision.hops) == ("keep", "two")
    assert decision.answerable_in == frozenset({"both", "first", "second"})


def test_classify_hops_agreement_overrides_answer():
    draft = draft_for("hyper", "Q?", index=2)
    decision = classify_hops(draft, "Larry Bird team", "Larry Bird team", "junk", FilterConfig(f1_threshold=0.2))
    assert decision.final_answer == "Larry Bird team"
    decision = classify_hops(draft, draft.prepared_answer, "junk", "junk", FilterConfig())
    assert decision.final_answer == draft.prepared_answer


def test_generate_queries_parsing():
    pair, ex = example_pair("topic", 1)
    completion = " Query: Adam Clayton Powell \nQuery: The Saimaa Gesture"
    backend = MockBackend(
        table=table_for(
            MQA_QUERY_GEN, "topic", pair, completion,
            answer=ex.answer, question=ex.question_or_claim,
        )
    )
    got = generate_queries(pair, ex.question_or_claim, ex.answer, backend)
    assert [c.text for c in got] == [
        "Adam Clayton Powell", "The Saimaa Gesture", ex.question_or_claim,
    ]
    assert [c.origin for c in got] == ["model", "model", "original_question_backup"]
    assert [c.generation_rank for c in got] == [0, 1, 2]


def test_generate_queries_single_line_and_junk():
    pair, ex = example_pair("hyper", 2)
    backend = MockBackend(rule=lambda text, seed: "Query: the 1997-98 Indiana Pacers")
    got = generate_queries(pair, ex.question_or_claim, ex.answer, backend)
    assert len(got) == 2 and got[0].text == "the 1997-98 Indiana Pacers"
    backend = MockBackend(rule=lambda text, seed: "no queries here")
    got = generate_queries(pair, ex.question_or_claim, ex.answer, backend)
    assert len(got) == 1
    assert got[0].origin == "original_question_backup"
    assert got[0].text == ex.question_or_claim


def test_generate_queries_cap_and_ranks():
    pair, ex = example_pair("hyper", 0)
    many = "\n".join(f"Query: candidate {i}" for i in range(9))
    backend = MockBackend(rule=lambda text, seed: many)
    got = generate_queries(pair, ex.question_or_claim, ex.answer, backend)
    models = [c for c in got if c.origin == "model"]
    backups = [c for c in got if c.origin == "original_question_backup"]
    assert len(models) <= 4
    assert len(backups) == 1
    ranks = [c.generation_rank for c in got]
    assert ranks == sorted(ranks) and len(set(ranks)) == len(ranks)


def test_fever_verify_label_flow():
    pair, _ = example_pair("hyper", 0)
    claim = "A claim about the Colorado orogeny."
    backend = MockBackend(
        table=table_for(FEVER_VERIFY, "hyper", pair, " SUPPORTS", question=claim)
    )
    got = answer_question(claim, [pair.d1, pair.d2], backend, task="fever")
    assert got == "SUPPORTS"
