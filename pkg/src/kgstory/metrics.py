"""Automatic generation metrics: repeat-4, distinct-4, and perplexity.

Tokenization is whitespace over already-normalized text; a story's 4-grams
run across its sentence boundaries (sentences joined by single spaces).
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

NGRAM_ORDER = 4


@dataclass(frozen=True)
class MetricReport:
    repeat4: float
    distinct4: float
    perplexity: float | None
    story_count: int

    def __post_init__(self):
        if self.story_count < 1:
            raise ValueError("a report covers at least one story")


def story_tokens(sentences: Sequence[str]) -> list[str]:
    """Whitespace tokens of one story, sentences joined by single spaces."""
    return " ".join(sentences).split()


def _ngrams(tokens: Sequence[str], n: int = NGRAM_ORDER) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def repeat4(stories: Sequence[Sequence[str]]) -> float:
    """Percentage of stories containing at least one repeated 4-gram.

    Occurrences are counted overlapping; stories shorter than 4 tokens
    count as non-repeating.
    """
    if not stories:
        raise ValueError("no stories given")
    repeating = 0
    for tokens in stories:
        counts = Counter(_ngrams(tokens))
        if counts and max(counts.values()) >= 2:
            repeating += 1
    return 100.0 * repeating / len(stories)


def distinct4(stories: Sequence[Sequence[str]]) -> float:
    """Percentage of distinct 4-grams among all 4-grams of the corpus."""
    if not stories:
        raise ValueError("no stories given")
    total = 0
    unique: set[tuple[str, ...]] = set()
    for tokens in stories:
        grams = _ngrams(tokens)
        total += len(grams)
        unique.update(grams)
    if total == 0:
        warnings.warn("corpus contains no 4-grams; distinct4 defined as 0", stacklevel=2)
        return 0.0
    return 100.0 * len(unique) / total


def aggregate_perplexity(token_logprobs: Sequence[Sequence[float]]) -> float:
    """Corpus perplexity exp(-sum(logprobs) / token count).

    Input is one list of per-token natural-log probabilities per story,
    covering the generated sentences. Raises on empty input.
    """
    total_logprob = 0.0
    total_tokens = 0
    for per_story in token_logprobs:
        total_logprob += sum(per_story)
        total_tokens += len(per_story)
    if total_tokens == 0:
        raise ValueError("no token log-probabilities given")
    return math.exp(-total_logprob / total_tokens)


def evaluate(
    stories: Sequence[Sequence[str]],
    token_logprobs: Sequence[Sequence[float]] | None = None,
) -> MetricReport:
    """Compute the full report over tokenized stories."""
    return MetricReport(
        repeat4=repeat4(stories),
        distinct4=distinct4(stories),
        perplexity=aggregate_perplexity(token_logprobs) if token_logprobs is not None else None,
        story_count=len(stories),
    )


def format_report(report: MetricReport) -> str:
    """Single-line record ``repeat4<TAB>distinct4<TAB>perplexity<TAB>count``
    with fixed 4-decimal numbers; a missing perplexity prints as NA."""
    ppl = "NA" if report.perplexity is None else f"{report.perplexity:.4f}"
    return f"{report.repeat4:.4f}\t{report.distinct4:.4f}\t{ppl}\t{report.story_count}"


def load_logprobs(stream: Iterable[str] | str) -> list[list[float]]:
    """Parse a log-prob sidecar: ``story_id<TAB>space-joined floats`` lines."""
    if isinstance(stream, str):
        stream = stream.splitlines()
    rows = []
    for line in stream:
        line = line.rstrip("\n")
        if not line.strip():
            continue
        _, _, values = line.partition("\t")
        rows.append([float(x) for x in values.split()] if values.strip() else [])
    return rows


def dump_logprobs(rows: Sequence[tuple[str, Sequence[float]]]) -> str:
    return "".join(
        f"{story_id}\t{' '.join(repr(v) for v in values)}\n" for story_id, values in rows
    )
