"""Triple knowledge base: ingestion, templating, and keyword retrieval.

Triples are rendered to natural-language "knowledge sentences" through a
relation template table, and an inverted index over sentence tokens serves
keyword lookups. The index is immutable after construction and safe to
share between concurrent readers.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigError, DataFormatError
from .keywords import KeywordSet


@dataclass(frozen=True)
class KnowledgeTriple:
    """A (subject, relation, object) fact with a dense ingest id."""

    id: int
    subject: str
    relation: str
    object: str


@dataclass(frozen=True)
class KnowledgeSentence:
    """Natural-language rendering of one triple."""

    triple_id: int
    text: str
    token_set: frozenset[str]


@dataclass
class KnowledgeIndex:
    """Inverted index from token to the sorted triple ids containing it."""

    sentences: list[KnowledgeSentence] = field(default_factory=list)
    postings: dict[str, list[int]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.sentences)


def _normalize_entity(raw: str) -> str:
    return " ".join(raw.replace("_", " ").lower().split())


def load_templates(stream: Iterable[str] | str) -> dict[str, str]:
    """Parse a relation template table: ``Relation<TAB>pattern`` per line.

    Each pattern must contain exactly one ``{s}`` and one ``{o}``
    placeholder. Blank lines and ``#`` comments are skipped.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    table: dict[str, str] = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataFormatError(
                f"expected 'Relation<TAB>pattern', got {len(parts)} fields", lineno
            )
        relation, pattern = parts[0].strip(), parts[1].strip()
        if pattern.count("{s}") != 1 or pattern.count("{o}") != 1:
            raise ConfigError(
                f"template for {relation!r} must contain exactly one {{s}} and one {{o}}: {pattern!r}"
            )
        table[relation] = pattern
    return table


def default_templates() -> dict[str, str]:
    """Template table shipped with the package (common ConceptNet relations)."""
    text = resources.files("kgstory.data").joinpath("relation_templates.tsv").read_text("utf-8")
    return load_templates(text)


def parse_triples(stream: Iterable[str] | str, templates: dict[str, str]) -> list[KnowledgeTriple]:
    """Parse a triple dump: ``subject<TAB>relation<TAB>object`` per line.

    Subjects and objects are lowercased with underscores replaced by
    spaces. Blank lines and ``#`` comments are skipped; ids are dense in
    file order.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    triples: list[KnowledgeTriple] = []
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataFormatError(
                f"expected 'subject<TAB>relation<TAB>object', got {len(parts)} fields", lineno
            )
        subject = _normalize_entity(parts[0])
        relation = parts[1].strip()
        obj = _normalize_entity(parts[2])
        if relation not in templates:
            raise DataFormatError(f"unknown relation tag {relation!r}", lineno)
        if not subject or not obj:
            raise DataFormatError("empty subject or object", lineno)
        triples.append(KnowledgeTriple(id=len(triples), subject=subject, relation=relation, object=obj))
    return triples


def serialize_triples(triples: Iterable[KnowledgeTriple]) -> str:
    """Render triples back to the dump format (inverse of :func:`parse_triples`)."""
    return "".join(f"{t.subject}\t{t.relation}\t{t.object}\n" for t in triples)


def template(t: KnowledgeTriple, table: dict[str, str]) -> KnowledgeSentence:
    """Render one triple to its knowledge sentence via the relation pattern."""
    try:
        pattern = table[t.relation]
    except KeyError:
        raise ConfigError(f"no template for relation {t.relation!r}") from None
    text = " ".join(pattern.replace("{s}", t.subject).replace("{o}", t.object).split())
    return KnowledgeSentence(triple_id=t.id, text=text, token_set=frozenset(text.split()))


def build_index(triples: Sequence[KnowledgeTriple], table: dict[str, str]) -> KnowledgeIndex:
    """Render all triples and build the token -> sorted-ids inverted index."""
    index = KnowledgeIndex()
    for t in triples:
        sentence = template(t, table)
        index.sentences.append(sentence)
        # ids arrive in ascending order, so each posting list stays sorted
        for token in sentence.token_set:
            index.postings.setdefault(token, []).append(sentence.triple_id)
    return index


def _phrase_tokens(keywords: KeywordSet | Sequence) -> list[tuple[str, ...]]:
    if isinstance(keywords, KeywordSet):
        return list(keywords.keywords)
    phrases = []
    for phrase in keywords:
        if isinstance(phrase, str):
            phrases.append(tuple(phrase.split()))
        else:
            phrases.append(tuple(phrase))
    return phrases


def retrieve(index: KnowledgeIndex, keywords: KeywordSet | Sequence) -> list[KnowledgeSentence]:
    """Return sentences matching any keyword, deduplicated, by ascending id.

    A multi-word keyword matches a sentence only if all of its tokens
    appear in the sentence's token set. Matching is exact lowercase token
    equality; no stemming.
    """
    matched: set[int] = set()
    for phrase in _phrase_tokens(keywords):
        if not phrase:
            continue
        postings = [index.postings.get(token) for token in phrase]
        if any(p is None for p in postings):
            continue
        ids = set(postings[0])
        for p in postings[1:]:
            ids &= set(p)
        matched |= ids
    return [index.sentences[i] for i in sorted(matched)]


class KnowledgeRetriever(BaseEstimator, TransformerMixin):
    """Estimator facade over the inverted index.

    ``fit`` ingests triples and builds the index; ``transform`` maps each
    keyword set to its candidate knowledge sentences.
    """

    def __init__(self, templates: dict[str, str] | None = None):
        self.templates = templates

    def fit(self, X: Sequence[KnowledgeTriple], y=None):
        table = self.templates if self.templates is not None else default_templates()
        self.templates_ = table
        self.index_ = build_index(list(X), table)
        return self

    def transform(self, X: Iterable[KeywordSet | Sequence]) -> list[list[KnowledgeSentence]]:
        check_is_fitted(self, "index_")
        return [retrieve(self.index_, keywords) for keywords in X]
