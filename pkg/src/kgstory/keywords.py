"""Keyword extraction and the keyword-prediction backend contract.

RAKE supplies training labels and fixture keywords: candidate phrases are
maximal runs of tokens delimited by stopwords, punctuation tokens, and
delexicalization placeholders; each word scores degree/frequency over the
candidates and a phrase scores the sum of its word scores.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ProtocolError

KEYWORD_SEPARATOR = ";"
PLACEHOLDER_RE = re.compile(r"^\[[A-Z]+\]$")
_PUNCT = string.punctuation


@dataclass(frozen=True)
class KeywordSet:
    """Ordered keyword phrases for one story step.

    Phrases are tuples of lowercase tokens; ``source`` records whether they
    were predicted by a backend, extracted with RAKE, or given by a human.
    A set may be empty: the number of keywords per sentence varies and can
    be zero.
    """

    step_index: int
    keywords: tuple[tuple[str, ...], ...] = ()
    source: str = "extracted"

    def __post_init__(self):
        if self.step_index < 1:
            raise ValueError("step_index must be >= 1")
        if self.source not in ("predicted", "extracted", "human"):
            raise ValueError(f"unknown keyword source {self.source!r}")
        if len(set(self.keywords)) != len(self.keywords):
            raise ValueError("duplicate keyword phrases")

    def phrases(self) -> list[str]:
        """Phrases as space-joined strings, in order."""
        return [" ".join(p) for p in self.keywords]

    def __bool__(self) -> bool:
        return bool(self.keywords)


def load_stopwords(stream: Iterable[str] | str) -> frozenset[str]:
    """Load a stopword file: one lowercase token per line, ``#`` comments."""
    if isinstance(stream, str):
        stream = stream.splitlines()
    words = set()
    for line in stream:
        word = line.strip()
        if word and not word.startswith("#"):
            words.add(word.lower())
    return frozenset(words)


def default_stopwords() -> frozenset[str]:
    """Stopword list shipped with the package (standard English list plus
    the delexicalization placeholders)."""
    text = resources.files("kgstory.data").joinpath("stopwords.txt").read_text("utf-8")
    return load_stopwords(text)


def _strip_punct(token: str) -> str:
    return token.strip(_PUNCT)


def candidate_phrases(sentence: str, stopwords: frozenset[str]) -> list[tuple[str, ...]]:
    """Split a sentence into candidate phrases for RAKE.

    Stopwords, placeholder tokens like ``[MALE]``, and tokens that are pure
    punctuation all act as phrase boundaries. Surviving words are stripped
    of surrounding punctuation and lowercased.
    """
    phrases: list[tuple[str, ...]] = []
    run: list[str] = []
    for token in sentence.split():
        lowered = token.lower()
        stripped = _strip_punct(lowered)
        boundary = (
            PLACEHOLDER_RE.match(token) is not None
            or lowered in stopwords
            or stripped in stopwords
            or not stripped
        )
        if boundary:
            if run:
                phrases.append(tuple(run))
                run = []
        else:
            run.append(stripped)
    if run:
        phrases.append(tuple(run))
    return phrases


def rake_extract(
    sentence: str,
    stopwords: frozenset[str],
    max_keywords: int = 3,
    step_index: int = 1,
) -> KeywordSet:
    """Extract the top-scoring RAKE phrases from one sentence.

    Word score is degree/frequency over the candidate co-occurrence graph;
    a phrase scores the sum of its member word scores. Ties are broken by
    first occurrence. An all-stopword sentence yields an empty set.
    """
    if max_keywords < 1:
        raise ValueError("max_keywords must be >= 1")
    if not stopwords:
        raise ValueError("stopword list must be non-empty")
    phrases = candidate_phrases(sentence, stopwords)

    freq: dict[str, int] = {}
    degree: dict[str, int] = {}
    for phrase in phrases:
        for word in phrase:
            freq[word] = freq.get(word, 0) + 1
            degree[word] = degree.get(word, 0) + len(phrase)

    scored: list[tuple[float, int, tuple[str, ...]]] = []
    seen: set[tuple[str, ...]] = set()
    for position, phrase in enumerate(phrases):
        if phrase in seen:
            continue
        seen.add(phrase)
        score = sum(degree[w] / freq[w] for w in phrase)
        scored.append((score, position, phrase))
    scored.sort(key=lambda item: (-item[0], item[1]))

    top = tuple(phrase for _, _, phrase in scored[:max_keywords])
    return KeywordSet(step_index=step_index, keywords=top, source="extracted")


def phrase_score(phrase: str | Sequence[str], sentence: str, stopwords: frozenset[str]) -> float:
    """RAKE score of one candidate phrase within a sentence (for inspection)."""
    wanted = tuple(phrase.split()) if isinstance(phrase, str) else tuple(phrase)
    phrases = candidate_phrases(sentence, stopwords)
    freq: dict[str, int] = {}
    degree: dict[str, int] = {}
    for p in phrases:
        for word in p:
            freq[word] = freq.get(word, 0) + 1
            degree[word] = degree.get(word, 0) + len(p)
    if wanted not in phrases:
        raise ValueError(f"{wanted!r} is not a candidate phrase of {sentence!r}")
    return sum(degree[w] / freq[w] for w in wanted)


def parse_keyword_reply(reply: str, step_index: int, source: str = "predicted") -> KeywordSet:
    """Parse a backend keyword string ("kw1 ; kw2 ; ...") into a KeywordSet.

    Tokens are lowercased; empty phrases and duplicates are dropped while
    preserving order. An empty reply is a legal empty prediction.
    """
    if not isinstance(reply, str):
        raise ProtocolError(f"keyword reply must be a string, got {type(reply).__name__}")
    phrases: list[tuple[str, ...]] = []
    for chunk in reply.split(KEYWORD_SEPARATOR):
        tokens = tuple(chunk.lower().split())
        if tokens and tokens not in phrases:
            phrases.append(tokens)
    return KeywordSet(step_index=step_index, keywords=tuple(phrases), source=source)


def predict_keywords(backend, context_text: str, step_index: int) -> KeywordSet:
    """Ask the keyword backend for the next step's keywords.

    ``context_text`` is the planner serialization of the story so far with
    knowledge omitted. Transport failures propagate as retryable errors
    from the backend client; a malformed reply raises ProtocolError.
    """
    reply = backend.predict(context_text)
    return parse_keyword_reply(reply, step_index=step_index, source="predicted")


class RakeKeywordExtractor(BaseEstimator, TransformerMixin):
    """Stateless transformer mapping sentences to RAKE keyword phrases."""

    def __init__(self, stopwords: frozenset[str] | None = None, max_keywords: int = 3):
        self.stopwords = stopwords
        self.max_keywords = max_keywords

    def fit(self, X, y=None):
        return self

    def transform(self, X: Iterable[str]) -> list[list[str]]:
        stopwords = self.stopwords if self.stopwords is not None else default_stopwords()
        return [
            rake_extract(sentence, stopwords, self.max_keywords).phrases()
            for sentence in X
        ]
