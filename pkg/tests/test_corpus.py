import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kgstory import corpus
from kgstory.corpus import Story, delexicalize, load_stories, normalize, serialize_stories
from kgstory.exceptions import DataFormatError


def test_normalize_moves_period_and_lowercases():
    assert normalize("She left .") == "she left."


def test_normalize_empty():
    assert normalize("") == ""


def test_normalize_preserves_placeholders_and_collapses_spaces():
    assert normalize("[MALE]  ran .") == "[MALE] ran."
    assert normalize("[FEMALE] Saw [PLACE] .") == "[FEMALE] saw [PLACE]."


def test_normalize_handles_doubled_periods():
    out = normalize("a .. b")
    assert normalize(out) == out


printable = st.text(
    alphabet=st.sampled_from(list("abcDEF .[]MALE")), min_size=0, max_size=30
)


@given(printable)
def test_normalize_idempotent(text):
    once = normalize(text)
    assert normalize(once) == once


def test_delexicalize_names_and_places():
    lexicon = {"anna": "[FEMALE]", "paris": "[PLACE]"}
    assert delexicalize("anna drove to paris", lexicon) == "[FEMALE] drove to [PLACE]"


def test_delexicalize_no_hits_unchanged():
    assert delexicalize("the dog slept", {"anna": "[FEMALE]"}) == "the dog slept"


def test_delexicalize_idempotent_on_placeholders():
    lexicon = {"anna": "[FEMALE]"}
    once = delexicalize("anna smiled at anna.", lexicon)
    assert once == "[FEMALE] smiled at [FEMALE]."
    assert delexicalize(once, lexicon) == once


def test_delexicalize_longest_match_wins():
    lexicon = {"york": "[NEUTRAL]", "new york": "[PLACE]"}
    assert delexicalize("she flew to new york", lexicon) == "she flew to [PLACE]"


def test_delexicalize_case_insensitive_with_punctuation():
    lexicon = corpus.default_name_lexicon()
    assert delexicalize("Anna drove to Paris.", lexicon) == "[FEMALE] drove to [PLACE]."


def test_load_stories_round_trip():
    text = "One .\ttwo .\tthree .\tfour .\tfive .\n"
    stories = load_stories(text)
    assert stories[0].sentences == ("one.", "two.", "three.", "four.", "five.")
    again = load_stories(serialize_stories(stories))
    assert again == stories


def test_load_stories_empty_file():
    assert load_stories("") == []


def test_load_stories_wrong_sentence_count_reports_line():
    with pytest.raises(DataFormatError, match="line 2"):
        load_stories("a\tb\tc\td\te\nx\ty\tz\n")


def test_load_stories_canonical_size_warning():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        load_stories("a\tb\tc\td\te\n", split="train", expect_canonical=True)
    assert any("88344" in str(w.message) for w in caught)


def test_story_invariants():
    with pytest.raises(ValueError):
        Story(story_id="x", sentences=("a", "b", "c", "d"))
    with pytest.raises(ValueError):
        Story(story_id="x", sentences=("a", "b", "c", "d", "e"), split="dev")


def test_name_lexicon_rejects_unknown_placeholder():
    with pytest.raises(DataFormatError):
        corpus.load_name_lexicon("bob\t[ROBOT]\n")
