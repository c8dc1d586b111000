import numpy as np
import pytest

from kgstory.mocks import (
    MockEmbeddingBackend,
    MockGeneratorBackend,
    MockKeywordBackend,
    top_k_sample,
)
from kgstory.weaklabel import cosine


def test_embed_deterministic_across_instances():
    a = MockEmbeddingBackend(dim=16, seed=0).embed(["rain causes flood", "hello"])
    b = MockEmbeddingBackend(dim=16, seed=0).embed(["rain causes flood", "hello"])
    assert np.array_equal(a, b)
    assert a.shape == (2, 16)


def test_embed_seed_changes_vectors():
    a = MockEmbeddingBackend(dim=16, seed=0).embed(["rain"])
    b = MockEmbeddingBackend(dim=16, seed=1).embed(["rain"])
    assert not np.array_equal(a, b)


def test_embed_empty_text_is_zero_vector():
    v = MockEmbeddingBackend(dim=8).embed([""])
    assert np.array_equal(v, np.zeros((1, 8)))


def test_embed_shared_tokens_raise_similarity():
    backend = MockEmbeddingBackend(dim=16, seed=0)
    a, b, c = backend.embed(["rain causes flood", "rain causes damage", "quiet zebra sleeps"])
    assert cosine(a, b) > cosine(a, c)


def test_keyword_mock_fixed_replies_repeat_last():
    backend = MockKeywordBackend(mode="fixed", replies=["go ; decides", "come"])
    assert backend.predict("EOK a . OS") == "go ; decides"
    assert backend.predict("EOK a . OS") == "come"
    assert backend.predict("EOK a . OS") == "come"


def test_keyword_mock_rake_uses_last_sentence():
    backend = MockKeywordBackend(mode="rake")
    reply = backend.predict("EOK there was rain . OS EOK the flood arrived quickly . OS")
    assert reply == "flood arrived quickly"
    assert "rain" not in reply


def test_keyword_mock_validates_mode():
    with pytest.raises(ValueError):
        MockKeywordBackend(mode="unknown")
    with pytest.raises(ValueError):
        MockKeywordBackend(mode="fixed")


def test_echo_generator_returns_first_knowledge_plus_period():
    backend = MockGeneratorBackend(mode="echo")
    result = backend.generate("EOK hi . OS rain causes flood SEP x y EOK", 40, 0.7, 0, "OS")
    assert result.text == "rain causes flood ."
    assert len(result.token_logprobs) == 4
    assert all(lp == 0.0 for lp in result.token_logprobs)


def test_echo_generator_fallback_without_knowledge():
    backend = MockGeneratorBackend(mode="echo")
    result = backend.generate("EOK hi . OS EOK", 40, 0.7, 0, "OS")
    assert result.text == MockGeneratorBackend.FALLBACK_SENTENCE + " ."


def test_sample_generator_deterministic_and_seed_sensitive():
    backend = MockGeneratorBackend(mode="sample")
    conditioning = "EOK hi . OS rain causes flood EOK"
    a = backend.generate(conditioning, 40, 0.7, 1, "OS")
    b = backend.generate(conditioning, 40, 0.7, 1, "OS")
    c = backend.generate(conditioning, 40, 0.7, 2, "OS")
    assert a == b
    assert a.text != c.text or a.token_logprobs != c.token_logprobs


def test_sample_generator_vocabulary_favors_knowledge():
    backend = MockGeneratorBackend(mode="sample")
    result = backend.generate("EOK hi . OS rain causes flood EOK", 40, 0.7, 5, "OS")
    tokens = result.text.split()
    assert tokens[-1] == "."
    allowed = {"rain", "causes", "flood", ".", "the", "a", "was", "very", "then", "it", "day", "time"}
    assert set(tokens) <= allowed
    assert len(result.token_logprobs) == len(tokens)
    assert all(lp <= 0.0 for lp in result.token_logprobs)


def test_top_k_sample_greedy_when_k_is_one():
    logits = np.array([0.1, 2.0, 0.5])
    rng = np.random.default_rng(0)
    for _ in range(5):
        index, logprob = top_k_sample(logits, 1, 0.7, rng)
        assert index == 1 and logprob == 0.0


def test_top_k_sample_restricts_support():
    logits = np.array([5.0, 4.0, 3.0, -10.0, -20.0])
    rng = np.random.default_rng(0)
    seen = {top_k_sample(logits, 3, 1.0, rng)[0] for _ in range(200)}
    assert seen <= {0, 1, 2}
    assert len(seen) > 1  # actually samples, not greedy


def test_top_k_sample_tie_prefers_lower_index():
    logits = np.array([1.0, 1.0, 1.0])
    rng = np.random.default_rng(0)
    index, _ = top_k_sample(logits, 1, 1.0, rng)
    assert index == 0


def test_top_k_sample_validates_arguments():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        top_k_sample(np.array([1.0]), 0, 1.0, rng)
    with pytest.raises(ValueError):
        top_k_sample(np.array([1.0]), 1, 0.0, rng)
