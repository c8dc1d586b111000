"""Deterministic in-process mock backends.

These stand in for the embedding, keyword, and generator services so the
whole pipeline (and its tests) runs with no external model server. All
outputs are pure functions of their inputs and the configured seed:
hashes go through sha256, never Python's randomized ``hash``.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

import numpy as np

from .backends import GenerationResult
from .keywords import default_stopwords, rake_extract
from .story import last_context_sentence, pending_knowledge

FILLER_TOKENS = ("the", "a", "was", "very", "then", "it", "day", "time")


def _digest_seed(*parts: object) -> int:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class MockEmbeddingBackend:
    """Hash-derived bag-of-tokens embeddings (default dim 16).

    Each token maps to a fixed unit gaussian vector; a text embeds as the
    normalized token sum, so texts sharing words land closer together.
    An empty text embeds to the zero vector.
    """

    def __init__(self, dim: int = 16, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._token_cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        vector = self._token_cache.get(token)
        if vector is None:
            rng = np.random.default_rng(_digest_seed("embed", self.seed, token))
            vector = rng.standard_normal(self.dim)
            vector /= np.linalg.norm(vector)
            self._token_cache[token] = vector
        return vector

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for row, text in enumerate(texts):
            # summing in sorted token order keeps the bag model exactly
            # order-insensitive (bit-identical vectors for permuted texts)
            tokens = sorted(text.split())
            if not tokens:
                continue
            total = np.sum([self._token_vector(t) for t in tokens], axis=0)
            norm = np.linalg.norm(total)
            out[row] = total / norm if norm > 0 else total
        return out


class MockKeywordBackend:
    """Keyword predictor mock.

    In ``rake`` mode it extracts keywords from the most recent sentence of
    the serialized context; in ``fixed`` mode it replays the configured
    replies in order (repeating the last one when exhausted).
    """

    def __init__(
        self,
        mode: str = "rake",
        replies: Sequence[str] | None = None,
        stopwords: frozenset[str] | None = None,
        max_keywords: int = 3,
    ):
        if mode not in ("rake", "fixed"):
            raise ValueError(f"unknown mock keyword mode {mode!r}")
        if mode == "fixed" and not replies:
            raise ValueError("fixed mode needs at least one reply")
        self.mode = mode
        self.replies = list(replies or [])
        self.stopwords = stopwords if stopwords is not None else default_stopwords()
        self.max_keywords = max_keywords
        self.calls = 0

    def predict(self, context: str) -> str:
        call = self.calls
        self.calls += 1
        if self.mode == "fixed":
            return self.replies[min(call, len(self.replies) - 1)]
        sentence = last_context_sentence(context)
        keyword_set = rake_extract(sentence, self.stopwords, max_keywords=self.max_keywords)
        return " ; ".join(keyword_set.phrases())


def top_k_sample(
    logits: np.ndarray, k: int, temperature: float, rng: np.random.Generator
) -> tuple[int, float]:
    """Draw one index by top-k sampling with temperature scaling.

    Returns the chosen index into ``logits`` and its natural-log
    probability under the renormalized top-k distribution.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    scaled = np.asarray(logits, dtype=float) / temperature
    k = min(k, scaled.shape[0])
    # stable selection: ties resolved by lower index
    top = np.lexsort((np.arange(scaled.shape[0]), -scaled))[:k]
    weights = np.exp(scaled[top] - np.max(scaled[top]))
    probs = weights / weights.sum()
    choice = int(rng.choice(k, p=probs))
    return int(top[choice]), float(np.log(probs[choice]))


class MockGeneratorBackend:
    """Conditional generator mock.

    ``echo`` mode returns the first pending knowledge sentence's tokens
    plus a final "." (or a fixed fallback sentence when no knowledge is
    pending). ``sample`` mode runs seeded top-k/temperature sampling over
    a toy vocabulary built from the pending knowledge tokens plus fillers,
    so decoding behaves like a real backend while staying deterministic.
    """

    FALLBACK_SENTENCE = "nothing else happened"

    def __init__(self, mode: str = "sample", echo_logprob: float = 0.0):
        if mode not in ("echo", "sample"):
            raise ValueError(f"unknown mock generator mode {mode!r}")
        self.mode = mode
        self.echo_logprob = echo_logprob

    def generate(
        self, input_text: str, top_k: int, temperature: float, seed: int, stop: str
    ) -> GenerationResult:
        knowledge = pending_knowledge(input_text)
        if self.mode == "echo":
            base = knowledge[0] if knowledge else self.FALLBACK_SENTENCE
            text = base + " ."
            return GenerationResult(
                text=text, token_logprobs=tuple([self.echo_logprob] * len(text.split()))
            )
        return self._sample(knowledge, input_text, top_k, temperature, seed)

    def _sample(
        self,
        knowledge: Sequence[str],
        input_text: str,
        top_k: int,
        temperature: float,
        seed: int,
    ) -> GenerationResult:
        knowledge_tokens = sorted({t for text in knowledge for t in text.split()})
        vocab = list(knowledge_tokens) + [t for t in FILLER_TOKENS if t not in knowledge_tokens]
        logits = np.array(
            [
                (_digest_seed("logit", token) % 1000) / 1000.0
                + (1.5 if token in knowledge_tokens else 0.0)
                for token in vocab
            ]
        )
        rng = np.random.default_rng(_digest_seed("generate", seed, input_text))
        length = int(rng.integers(5, 11))
        tokens: list[str] = []
        logprobs: list[float] = []
        for _ in range(length):
            index, logprob = top_k_sample(logits, top_k, temperature, rng)
            tokens.append(vocab[index])
            logprobs.append(logprob)
        tokens.append(".")
        logprobs.append(0.0)  # terminal period is certain under the toy model
        return GenerationResult(text=" ".join(tokens), token_logprobs=tuple(logprobs))


def mock_backend_suite(
    embed_dim: int = 16,
    seed: int = 0,
    keyword_mode: str = "rake",
    generator_mode: str = "sample",
    keyword_replies: Sequence[str] | None = None,
):
    """The standard trio of mocks wired into a BackendSuite."""
    from .backends import BackendSuite

    return BackendSuite(
        embedder=MockEmbeddingBackend(dim=embed_dim, seed=seed),
        keyword_predictor=MockKeywordBackend(
            mode=keyword_mode, replies=keyword_replies
        ),
        generator=MockGeneratorBackend(mode=generator_mode),
    )


__all__ = [
    "MockEmbeddingBackend",
    "MockKeywordBackend",
    "MockGeneratorBackend",
    "mock_backend_suite",
    "top_k_sample",
]
