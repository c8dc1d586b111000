"""Antonym-substitution controllability harness.

A finished story is scanned for the first keyword with a known antonym;
the story is then regenerated from that step with the keyword replaced by
a uniformly sampled antonym, keeping everything before the pivot verbatim
and letting the model finish the rest.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DataFormatError
from .keywords import KeywordSet
from .planner import StoryPipeline
from .story import StoryState


def load_antonym_lexicon(stream: Iterable[str] | str) -> dict[str, tuple[str, ...]]:
    """Parse ``lemma<TAB>antonym1,antonym2,...`` lines.

    A lemma mapping to itself is a data error; duplicate lemma lines merge.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lexicon: dict[str, tuple[str, ...]] = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataFormatError(f"expected 'lemma<TAB>antonyms', got {len(parts)} fields", lineno)
        lemma = parts[0].strip().lower()
        antonyms = tuple(
            dict.fromkeys(a.strip().lower() for a in parts[1].split(",") if a.strip())
        )
        if not lemma or not antonyms:
            raise DataFormatError("empty lemma or antonym list", lineno)
        if lemma in antonyms:
            raise DataFormatError(f"{lemma!r} listed as its own antonym", lineno)
        merged = tuple(dict.fromkeys(lexicon.get(lemma, ()) + antonyms))
        lexicon[lemma] = merged
    return lexicon


def default_antonyms() -> dict[str, tuple[str, ...]]:
    text = resources.files("kgstory.data").joinpath("antonyms.tsv").read_text("utf-8")
    return load_antonym_lexicon(text)


@dataclass(frozen=True)
class ControlRun:
    """An original story paired with its antonym-controlled rerun."""

    original: StoryState
    pivot_step: int
    pivot_keyword: str
    chosen_antonym: str
    controlled: StoryState

    def __post_init__(self):
        prefix_len = self.pivot_step - 1
        for j in range(prefix_len):
            a, b = self.original.steps[j], self.controlled.steps[j]
            if a.sentence != b.sentence or a.keywords.keywords != b.keywords.keywords:
                raise ValueError(f"controlled story diverges from original before step {self.pivot_step}")


def find_pivot(
    state: StoryState, lexicon: dict[str, tuple[str, ...]]
) -> tuple[int, str, tuple[str, ...]] | None:
    """First keyword (step order, then keyword order) with a known antonym."""
    for i, step in enumerate(state.steps, start=1):
        for phrase in step.keywords.phrases():
            if phrase in lexicon:
                return i, phrase, lexicon[phrase]
    return None


def choose_antonym(antonyms: Sequence[str], rng_seed: int) -> str:
    """Uniform seeded choice among the available antonyms."""
    if not antonyms:
        raise ValueError("no antonyms to choose from")
    rng = np.random.default_rng(rng_seed)
    return antonyms[int(rng.integers(len(antonyms)))]


def _override_keywords(original: KeywordSet, pivot: str, antonym: str, step_index: int) -> KeywordSet:
    phrases: list[tuple[str, ...]] = []
    for tokens in original.keywords:
        replaced = tuple(antonym.split()) if " ".join(tokens) == pivot else tokens
        if replaced not in phrases:
            phrases.append(replaced)
    return KeywordSet(step_index=step_index, keywords=tuple(phrases), source="human")


def antonym_rerun(
    original: StoryState,
    lexicon: dict[str, tuple[str, ...]],
    pipeline: StoryPipeline,
    rng_seed: int = 0,
) -> ControlRun | None:
    """Regenerate a story from its first antonym-bearing keyword.

    Steps before the pivot are reused verbatim; the pivot step is
    regenerated with the keyword replaced by the sampled antonym; later
    steps are re-planned dynamically. Returns None for an uncontrollable
    story (no keyword has a known antonym).
    """
    pivot = find_pivot(original, lexicon)
    if pivot is None:
        return None
    pivot_step, pivot_keyword, antonyms = pivot
    antonym = choose_antonym(antonyms, rng_seed)

    controlled = original.prefix(pivot_step - 1)
    override = _override_keywords(
        original.steps[pivot_step - 1].keywords, pivot_keyword, antonym, pivot_step
    )
    controlled.append(pipeline.next_sentence(controlled, keyword_override=override))
    while not controlled.is_complete:
        controlled.append(pipeline.next_sentence(controlled))
    return ControlRun(
        original=original,
        pivot_step=pivot_step,
        pivot_keyword=pivot_keyword,
        chosen_antonym=antonym,
        controlled=controlled,
    )


def format_control_report(rows: Iterable[tuple[str, ControlRun | None]]) -> str:
    """Report lines ``story_id<TAB>pivot_step<TAB>keyword<TAB>antonym<TAB>changed``.

    ``changed`` is a placeholder for the human judgment and is always
    written as ``false``; uncontrollable stories carry pivot_step -1.
    """
    lines = []
    for story_id, run in rows:
        if run is None:
            lines.append(f"{story_id}\t-1\t\t\tfalse")
        else:
            lines.append(
                f"{story_id}\t{run.pivot_step}\t{run.pivot_keyword}\t{run.chosen_antonym}\tfalse"
            )
    return "\n".join(lines) + ("\n" if lines else "")
