"""Five-sentence story corpus handling: normalization, delexicalization, IO.

Stories are stored one per line with sentences joined by tabs. Names and
locations are replaced by the placeholders [MALE], [FEMALE], [NEUTRAL],
and [PLACE] through a lexicon so the step is deterministic.
"""

from __future__ import annotations

import io
import re
import string
import warnings
from dataclasses import dataclass
from importlib import resources
from typing import Iterable

from .exceptions import DataFormatError

STORY_LENGTH = 5
PLACEHOLDERS = ("[MALE]", "[FEMALE]", "[NEUTRAL]", "[PLACE]")
CANONICAL_SPLIT_SIZES = {"train": 88344, "validation": 4908, "test": 4909}

_PLACEHOLDER_SPLIT = re.compile(r"(\[(?:MALE|FEMALE|NEUTRAL|PLACE)\])")


@dataclass(frozen=True)
class Story:
    story_id: str
    sentences: tuple[str, ...]
    split: str = "train"

    def __post_init__(self):
        if len(self.sentences) != STORY_LENGTH:
            raise ValueError(f"a story holds exactly {STORY_LENGTH} sentences")
        if any(not s for s in self.sentences):
            raise ValueError("story sentences must be non-empty")
        if self.split not in ("train", "validation", "test"):
            raise ValueError(f"unknown split {self.split!r}")


def normalize(sentence: str) -> str:
    """Normalize one sentence: ``" ."`` becomes ``". "``, spaces collapse,
    and everything except placeholders is lowercased. Idempotent."""
    while " ." in sentence:
        sentence = sentence.replace(" .", ". ")
    sentence = " ".join(sentence.split())
    parts = _PLACEHOLDER_SPLIT.split(sentence)
    return "".join(p if p in PLACEHOLDERS else p.lower() for p in parts)


def load_name_lexicon(stream: Iterable[str] | str) -> dict[str, str]:
    """Parse ``name<TAB>placeholder`` lines into a replacement lexicon."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lexicon: dict[str, str] = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataFormatError(f"expected 'name<TAB>placeholder', got {len(parts)} fields", lineno)
        name, placeholder = parts[0].strip().lower(), parts[1].strip()
        if placeholder not in PLACEHOLDERS:
            raise DataFormatError(f"unknown placeholder {placeholder!r}", lineno)
        lexicon[name] = placeholder
    return lexicon


def default_name_lexicon() -> dict[str, str]:
    text = resources.files("kgstory.data").joinpath("name_placeholders.tsv").read_text("utf-8")
    return load_name_lexicon(text)


def delexicalize(sentence: str, name_lexicon: dict[str, str]) -> str:
    """Replace lexicon names/places with placeholders, longest match first.

    Matching is token-based and case-insensitive; trailing punctuation on
    the final token of a match is preserved. Placeholders are never
    lexicon keys, so the operation is idempotent.
    """
    if not name_lexicon:
        return sentence
    max_words = max(len(k.split()) for k in name_lexicon)
    tokens = sentence.split()
    out: list[str] = []
    i = 0
    while i < len(tokens):
        replaced = False
        for width in range(min(max_words, len(tokens) - i), 0, -1):
            window = tokens[i : i + width]
            stripped_last = window[-1].rstrip(string.punctuation)
            trailing = window[-1][len(stripped_last) :]
            key = " ".join([*window[:-1], stripped_last]).lower()
            if key in name_lexicon:
                out.append(name_lexicon[key] + trailing)
                i += width
                replaced = True
                break
        if not replaced:
            out.append(tokens[i])
            i += 1
    return " ".join(out)


def load_stories(
    stream: Iterable[str] | str,
    split: str = "train",
    expect_canonical: bool = False,
) -> list[Story]:
    """Load a story file: one story per line, 5 sentences joined by tabs.

    Sentences are normalized on load. With ``expect_canonical`` the story
    count is checked against the canonical split size and a mismatch warns
    without failing.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    stories: list[Story] = []
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        sentences = line.split("\t")
        if len(sentences) != STORY_LENGTH:
            raise DataFormatError(
                f"expected {STORY_LENGTH} tab-separated sentences, got {len(sentences)}", lineno
            )
        normalized = tuple(normalize(s) for s in sentences)
        if any(not s for s in normalized):
            raise DataFormatError("story sentence empty after normalization", lineno)
        stories.append(Story(story_id=f"{split}-{len(stories)}", sentences=normalized, split=split))
    if expect_canonical and len(stories) != CANONICAL_SPLIT_SIZES[split]:
        warnings.warn(
            f"{split} split holds {len(stories)} stories, expected "
            f"{CANONICAL_SPLIT_SIZES[split]} for the canonical corpus",
            stacklevel=2,
        )
    return stories


def serialize_stories(stories: Iterable[Story]) -> str:
    """Inverse of :func:`load_stories` (tab-joined sentences per line)."""
    return "".join("\t".join(s.sentences) + "\n" for s in stories)
