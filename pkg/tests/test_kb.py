import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.exceptions import NotFittedError

from kgstory import kb
from kgstory.exceptions import ConfigError, DataFormatError
from kgstory.keywords import KeywordSet

from oracles import brute_force_retrieve


def test_parse_triples_paper_example(templates):
    triples = kb.parse_triples("eiffel_tower\tAtLocation\tparis\n", templates)
    assert triples == [
        kb.KnowledgeTriple(id=0, subject="eiffel tower", relation="AtLocation", object="paris")
    ]


def test_parse_triples_empty_stream(templates):
    assert kb.parse_triples("", templates) == []


def test_parse_triples_unknown_relation_names_the_tag(templates):
    with pytest.raises(DataFormatError, match="BogusRel"):
        kb.parse_triples("a\tBogusRel\tb\n", templates)


def test_parse_triples_wrong_field_count_reports_line(templates):
    with pytest.raises(DataFormatError, match="line 2"):
        kb.parse_triples("dog\tIsA\tanimal\nbroken line\n", templates)


def test_parse_triples_skips_comments_and_blanks(templates):
    text = "# comment\n\ndog\tIsA\tanimal\n"
    triples = kb.parse_triples(text, templates)
    assert len(triples) == 1 and triples[0].id == 0


def test_parse_triples_normalizes_case_and_underscores(templates):
    triples = kb.parse_triples("Big_Dog\tIsA\tLoud_Animal\n", templates)
    assert triples[0].subject == "big dog"
    assert triples[0].object == "loud animal"


def test_parse_triples_ids_dense_in_file_order(templates):
    triples = kb.parse_triples("a\tIsA\tb\nc\tIsA\td\ne\tIsA\tf\n", templates)
    assert [t.id for t in triples] == [0, 1, 2]


def test_template_examples():
    table = {"AtLocation": "{s} is at {o}", "IsA": "{s} is a {o}", "Causes": "{s} causes {o}"}
    cases = [
        (("eiffel tower", "AtLocation", "paris"), "eiffel tower is at paris"),
        (("dog", "IsA", "animal"), "dog is a animal"),
        (("rain", "Causes", "flood"), "rain causes flood"),
    ]
    for (s, r, o), expected in cases:
        sentence = kb.template(kb.KnowledgeTriple(0, s, r, o), table)
        assert sentence.text == expected
        assert sentence.token_set == frozenset(expected.split())


def test_template_missing_relation_is_config_error():
    with pytest.raises(ConfigError):
        kb.template(kb.KnowledgeTriple(0, "a", "Nope", "b"), {"IsA": "{s} is a {o}"})


def test_load_templates_rejects_bad_pattern():
    with pytest.raises(ConfigError):
        kb.load_templates("IsA\t{s} is a\n")
    with pytest.raises(ConfigError):
        kb.load_templates("IsA\t{s} {o} {o}\n")


def test_build_index_single_document(templates):
    index = kb.build_index(kb.parse_triples("rain\tCauses\tflood\n", templates), templates)
    assert {t: ids for t, ids in index.postings.items()} == {
        "rain": [0],
        "causes": [0],
        "flood": [0],
    }


def test_build_index_empty(templates):
    index = kb.build_index([], templates)
    assert len(index) == 0 and index.postings == {}


def test_build_index_shared_token_sorted(templates):
    triples = kb.parse_triples("rain\tCauses\tflood\nrain\tIsA\tweather\n", templates)
    index = kb.build_index(triples, templates)
    assert index.postings["rain"] == [0, 1]


entity = st.text(alphabet="abcdefg", min_size=1, max_size=4)
triple_lines = st.lists(
    st.tuples(entity, st.sampled_from(["IsA", "Causes", "AtLocation"]), entity),
    min_size=0,
    max_size=30,
)


@given(triple_lines)
def test_index_invariants_hold_on_random_triples(rows):
    table = kb.default_templates()
    triples = [kb.KnowledgeTriple(i, s, r, o) for i, (s, r, o) in enumerate(rows)]
    index = kb.build_index(triples, table)
    # soundness: every posted id holds the token
    for token, ids in index.postings.items():
        assert ids == sorted(ids)
        for i in ids:
            assert token in index.sentences[i].token_set
    # completeness: every token of every sentence is posted
    for sentence in index.sentences:
        for token in sentence.token_set:
            assert sentence.triple_id in index.postings[token]


def test_retrieve_token_match(toy_index):
    hits = kb.retrieve(toy_index, KeywordSet(step_index=2, keywords=(("driving",),), source="human"))
    assert [h.text for h in hits] == ["driving causes accident"]


def test_retrieve_no_posting(toy_index):
    assert kb.retrieve(toy_index, [("zzyx",)]) == []


def test_retrieve_deduplicates_across_keywords(templates):
    index = kb.build_index(kb.parse_triples("rain\tCauses\tflood\n", templates), templates)
    hits = kb.retrieve(index, ["rain", "flood"])
    assert [h.triple_id for h in hits] == [0]


def test_retrieve_empty_keywords(toy_index):
    assert kb.retrieve(toy_index, KeywordSet(step_index=2)) == []


def test_retrieve_multiword_requires_all_tokens(toy_index):
    assert [h.text for h in kb.retrieve(toy_index, ["eiffel tower"])] == ["eiffel tower is at paris"]
    # "eiffel flood" has no sentence containing both tokens
    assert kb.retrieve(toy_index, ["eiffel flood"]) == []


def test_retrieve_orders_by_ascending_id(templates):
    triples = kb.parse_triples("flood\tIsA\twater\nrain\tCauses\tflood\n", templates)
    index = kb.build_index(triples, templates)
    assert [h.triple_id for h in kb.retrieve(index, ["flood"])] == [0, 1]


@given(
    triple_lines,
    st.lists(st.lists(entity, min_size=1, max_size=2), min_size=0, max_size=4),
)
@settings(max_examples=60)
def test_retrieve_matches_brute_force(rows, phrase_lists):
    table = kb.default_templates()
    triples = [kb.KnowledgeTriple(i, s, r, o) for i, (s, r, o) in enumerate(rows)]
    index = kb.build_index(triples, table)
    phrases = [tuple(p) for p in phrase_lists]
    got = kb.retrieve(index, phrases)
    expected = brute_force_retrieve(index.sentences, phrases)
    assert got == expected


def test_serialize_parse_template_round_trip(toy_triples, templates):
    dump = kb.serialize_triples(toy_triples)
    reparsed = kb.parse_triples(dump, templates)
    assert reparsed == toy_triples
    for t in reparsed:
        assert kb.template(t, templates).text == kb.template(toy_triples[t.id], templates).text


def test_knowledge_retriever_estimator(toy_triples):
    retriever = kb.KnowledgeRetriever()
    assert "templates" in retriever.get_params()
    with pytest.raises(NotFittedError):
        retriever.transform([["rain"]])
    retriever.fit(toy_triples)
    out = retriever.transform([["driving"], ["zzyx"]])
    assert [s.text for s in out[0]] == ["driving causes accident"]
    assert out[1] == []
