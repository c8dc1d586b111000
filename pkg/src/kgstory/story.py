"""Story state and the marker serialization consumed by the generator.

Serialized form per step j:

    <r1 SEP r2 ... > EOK <sentence j> OS

i.e. the step's knowledge sentences joined by " SEP ", a trailing " EOK ",
the sentence, and a trailing " OS ". A step without knowledge contributes
only "EOK " before its sentence. The conditioning input for the next
sentence ends with the pending knowledge block ("r SEP r EOK"); a
completed story ends with "<|endoftext|>" instead.

Reserved markers are rejected inside user text so the serialization stays
injective and parseable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .kb import KnowledgeSentence
from .keywords import KeywordSet

SEP = "SEP"
EOK = "EOK"
OS = "OS"
END_OF_TEXT = "<|endoftext|>"
RESERVED_MARKERS = frozenset({SEP, EOK, OS, END_OF_TEXT})


@dataclass(frozen=True)
class GenerationConfig:
    """Knobs of the generation loop (defaults: N=10, top_k=40, T=0.7)."""

    knowledge_per_step: int = 10
    top_k: int = 40
    temperature: float = 0.7
    mode: str = "dynamic"
    seed: int = 0
    max_keywords: int = 3

    def __post_init__(self):
        if self.knowledge_per_step < 1:
            raise ValueError("knowledge_per_step must be >= 1")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.mode not in ("dynamic", "static"):
            raise ValueError(f"mode must be 'dynamic' or 'static', got {self.mode!r}")


@dataclass(frozen=True)
class StoryStep:
    """One story sentence with the knowledge and keywords that planned it."""

    sentence: str
    knowledge: tuple[KnowledgeSentence, ...] = ()
    keywords: KeywordSet = field(default_factory=lambda: KeywordSet(step_index=1))
    provenance: str = "generated"

    def __post_init__(self):
        if self.provenance not in ("given", "generated"):
            raise ValueError(f"provenance must be 'given' or 'generated', got {self.provenance!r}")
        check_no_markers(self.sentence)
        for ks in self.knowledge:
            check_no_markers(ks.text)

    def knowledge_texts(self) -> list[str]:
        return [ks.text for ks in self.knowledge]


@dataclass
class StoryState:
    """The running story context: an append-only list of steps."""

    steps: list[StoryStep]
    target_length: int = 5
    config: GenerationConfig = field(default_factory=GenerationConfig)

    def __post_init__(self):
        if self.target_length < 1:
            raise ValueError("target_length must be >= 1")
        if not 1 <= len(self.steps) <= self.target_length:
            raise ValueError(
                f"a story holds between 1 and {self.target_length} steps, got {len(self.steps)}"
            )

    @classmethod
    def start(
        cls,
        first_sentence: str,
        target_length: int = 5,
        config: GenerationConfig | None = None,
    ) -> "StoryState":
        """Open a story from its given first sentence (never planned)."""
        sentence = first_sentence.strip()
        if not sentence:
            raise ValueError("first sentence must be non-empty")
        first = StoryStep(sentence=sentence, provenance="given")
        return cls(
            steps=[first],
            target_length=target_length,
            config=config if config is not None else GenerationConfig(),
        )

    @property
    def is_complete(self) -> bool:
        return len(self.steps) == self.target_length

    @property
    def next_step_index(self) -> int:
        return len(self.steps) + 1

    def append(self, step: StoryStep) -> None:
        if self.is_complete:
            raise ValueError("story already has its target number of sentences")
        if len(step.knowledge) > self.config.knowledge_per_step:
            raise ValueError("step carries more knowledge than the configured limit")
        self.steps.append(step)

    def sentences(self) -> list[str]:
        return [s.sentence for s in self.steps]

    def prefix(self, n_steps: int) -> "StoryState":
        """A fresh state sharing the first ``n_steps`` steps verbatim."""
        if not 1 <= n_steps <= len(self.steps):
            raise ValueError("prefix length out of range")
        return StoryState(
            steps=list(self.steps[:n_steps]),
            target_length=self.target_length,
            config=self.config,
        )

    def with_config(self, config: GenerationConfig) -> "StoryState":
        return StoryState(steps=list(self.steps), target_length=self.target_length, config=config)


def check_no_markers(text: str) -> None:
    """Reject text containing a reserved marker as a standalone token."""
    for token in text.split():
        if token in RESERVED_MARKERS:
            raise ValueError(f"reserved marker {token!r} may not appear in story text")


def _knowledge_prefix(knowledge_texts: Sequence[str]) -> str:
    if knowledge_texts:
        return f" {SEP} ".join(knowledge_texts) + f" {EOK} "
    return f"{EOK} "


def _step_block(knowledge_texts: Sequence[str], sentence: str) -> str:
    return _knowledge_prefix(knowledge_texts) + sentence + f" {OS} "


def serialize_context(steps: Iterable[StoryStep], include_knowledge: bool = True) -> str:
    """Serialize completed steps (the story context) without a pending block."""
    blocks = "".join(
        _step_block(step.knowledge_texts() if include_knowledge else [], step.sentence)
        for step in steps
    )
    return blocks[:-1] if blocks else ""


def serialize_input(state: StoryState, next_knowledge: Sequence[str | KnowledgeSentence]) -> str:
    """Build the generator conditioning input: context plus pending knowledge."""
    texts = [k.text if isinstance(k, KnowledgeSentence) else k for k in next_knowledge]
    for text in texts:
        check_no_markers(text)
    pending = (f" {SEP} ".join(texts) + f" {EOK}") if texts else EOK
    context = serialize_context(state.steps)
    return f"{context} {pending}" if context else pending


def serialize_story(state: StoryState) -> str:
    """Serialize a completed story, terminated by the end-of-text token."""
    blocks = "".join(_step_block(step.knowledge_texts(), step.sentence) for step in state.steps)
    return blocks + END_OF_TEXT


def serialize_for_keywords(state: StoryState) -> str:
    """Context string sent to the keyword predictor (knowledge omitted)."""
    return serialize_context(state.steps, include_knowledge=False)


def _parse_block(block: str) -> tuple[list[str], str]:
    if block.startswith(f"{EOK} "):
        return [], block[len(EOK) + 1 :]
    head, sep, sentence = block.partition(f" {EOK} ")
    if not sep:
        raise ValueError(f"step block without {EOK!r} marker: {block!r}")
    return head.split(f" {SEP} "), sentence


def _parse_pending(block: str) -> list[str]:
    if block == EOK:
        return []
    if block.endswith(f" {EOK}"):
        return block[: -(len(EOK) + 1)].split(f" {SEP} ")
    raise ValueError(f"pending knowledge block without trailing {EOK!r}: {block!r}")


def parse_serialized(text: str) -> tuple[list[tuple[list[str], str]], list[str] | None, bool]:
    """Invert the serialization.

    Returns (steps, pending_knowledge, complete) where each step is a
    (knowledge_texts, sentence) pair. ``pending_knowledge`` is None for the
    context-only and completed-story forms.
    """
    if not text:
        return [], None, False
    if text.endswith(f" {OS}"):
        parts = (text + " ").split(f" {OS} ")[:-1]
        return [_parse_block(p) for p in parts], None, False
    parts = text.split(f" {OS} ")
    step_parts, last = parts[:-1], parts[-1]
    steps = [_parse_block(p) for p in step_parts]
    if last == END_OF_TEXT:
        return steps, None, True
    return steps, _parse_pending(last), False


def pending_knowledge(input_text: str) -> list[str]:
    """The knowledge texts of the pending block in a generator input."""
    _, pending, _ = parse_serialized(input_text)
    return pending if pending is not None else []


def last_context_sentence(context_text: str) -> str:
    """The most recent story sentence in a serialized context."""
    steps, _, _ = parse_serialized(context_text)
    if not steps:
        raise ValueError("serialized context holds no steps")
    return steps[-1][1]


__all__ = [
    "GenerationConfig",
    "StoryStep",
    "StoryState",
    "SEP",
    "EOK",
    "OS",
    "END_OF_TEXT",
    "RESERVED_MARKERS",
    "check_no_markers",
    "serialize_context",
    "serialize_input",
    "serialize_story",
    "serialize_for_keywords",
    "parse_serialized",
    "pending_knowledge",
    "last_context_sentence",
]
