"""The four-step generation loop.

For each sentence to generate: predict keywords for the step, retrieve
matching knowledge sentences, rank them against the serialized story
context, and condition the generator on the top-ranked ones. Dynamic mode
repeats this plan before every sentence; static mode plans once from the
starting sentence and spreads the ranked knowledge over the future steps.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Sequence


from .backends import BackendSuite
from .exceptions import ProtocolError
from .kb import KnowledgeIndex, KnowledgeSentence, retrieve
from .keywords import KeywordSet, predict_keywords
from .ranker import RankerHeads, score
from .story import (
    GenerationConfig,
    StoryState,
    StoryStep,
    check_no_markers,
    serialize_context,
    serialize_for_keywords,
    serialize_input,
)


def step_seed(seed: int, step_index: int) -> int:
    """Per-step generator seed derived from the run seed."""
    digest = hashlib.sha256(f"step|{seed}|{step_index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def split_evenly(items: Sequence, groups: int) -> list[list]:
    """Partition in order into ``groups`` contiguous chunks of near-equal
    size, larger chunks first (so top-ranked items land on early steps)."""
    if groups < 1:
        raise ValueError("groups must be >= 1")
    base, extra = divmod(len(items), groups)
    chunks, start = [], 0
    for g in range(groups):
        size = base + (1 if g < extra else 0)
        chunks.append(list(items[start : start + size]))
        start += size
    return chunks


class StoryPipeline:
    """Bundles the index, trained heads, and backends behind the loop."""

    def __init__(
        self,
        index: KnowledgeIndex,
        heads: RankerHeads,
        backends: BackendSuite,
        config: GenerationConfig | None = None,
    ):
        self.index = index
        self.heads = heads
        self.backends = backends
        self.config = config if config is not None else GenerationConfig()

    def plan_keywords(self, state: StoryState) -> KeywordSet:
        """Predict keywords for the next step from the sentences so far."""
        context = serialize_for_keywords(state)
        return predict_keywords(
            self.backends.keyword_predictor, context, step_index=state.next_step_index
        )

    def rank_candidates(
        self, state: StoryState, keywords: KeywordSet
    ) -> list[tuple[KnowledgeSentence, float]]:
        """Retrieve by keywords, then score every candidate against the context.

        Returns (sentence, score) pairs sorted by descending score with
        ties broken by ascending triple id.
        """
        candidates = retrieve(self.index, keywords)
        if not candidates:
            return []
        context = serialize_context(state.steps)
        vectors = self.backends.embedder.embed([context] + [c.text for c in candidates])
        ctx_vec = vectors[0]
        scored = [
            (candidate, score(self.heads, ctx_vec, vector))
            for candidate, vector in zip(candidates, vectors[1:])
        ]
        scored.sort(key=lambda pair: (-pair[1], pair[0].triple_id))
        return scored

    def generate_sentence(
        self, state: StoryState, knowledge: Sequence[KnowledgeSentence]
    ) -> tuple[str, tuple[float, ...]]:
        """Run the generator backend on the serialized context + knowledge."""
        conditioning = serialize_input(state, list(knowledge))
        result = self.backends.generator.generate(
            conditioning,
            top_k=self.config.top_k,
            temperature=self.config.temperature,
            seed=step_seed(self.config.seed, state.next_step_index),
            stop="OS",
        )
        sentence = result.text.strip()
        if not sentence:
            raise ProtocolError("generator returned an empty sentence")
        try:
            check_no_markers(sentence)
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc
        return sentence, result.token_logprobs

    def _coerce_override(self, override, step_index: int) -> KeywordSet:
        if isinstance(override, KeywordSet):
            phrases = override.keywords
        else:
            phrases = tuple(
                tuple(p.split()) if isinstance(p, str) else tuple(p) for p in override
            )
        return KeywordSet(step_index=step_index, keywords=phrases, source="human")

    def next_sentence(
        self, state: StoryState, keyword_override: KeywordSet | Iterable | None = None
    ) -> StoryStep:
        """Plan and generate the next step. The caller appends it."""
        step, _ = self.next_sentence_with_logprobs(state, keyword_override)
        return step

    def next_sentence_with_logprobs(
        self, state: StoryState, keyword_override: KeywordSet | Iterable | None = None
    ) -> tuple[StoryStep, tuple[float, ...]]:
        if state.is_complete:
            raise ValueError("story already has its target number of sentences")
        i = state.next_step_index
        if keyword_override is not None:
            keywords = self._coerce_override(keyword_override, i)
        else:
            keywords = self.plan_keywords(state)
        scored = self.rank_candidates(state, keywords)
        knowledge = tuple(c for c, _ in scored[: self.config.knowledge_per_step])
        sentence, logprobs = self.generate_sentence(state, knowledge)
        step = StoryStep(
            sentence=sentence, knowledge=knowledge, keywords=keywords, provenance="generated"
        )
        return step, logprobs

    def generate_story(self, first_sentence: str, target_length: int = 5) -> StoryState:
        state, _ = self.generate_story_with_logprobs(first_sentence, target_length)
        return state

    def generate_story_with_logprobs(
        self, first_sentence: str, target_length: int = 5
    ) -> tuple[StoryState, list[tuple[float, ...]]]:
        """Complete a story from its first sentence; also returns the
        generator log-probs of every generated sentence (for perplexity)."""
        state = StoryState.start(first_sentence, target_length=target_length, config=self.config)
        if self.config.mode == "static":
            return self._generate_static(state)
        logprobs: list[tuple[float, ...]] = []
        while not state.is_complete:
            step, step_logprobs = self.next_sentence_with_logprobs(state)
            state.append(step)
            logprobs.append(step_logprobs)
        return state, logprobs

    def _generate_static(self, state: StoryState) -> tuple[StoryState, list[tuple[float, ...]]]:
        # one plan from the starting sentence: a single keyword prediction,
        # one retrieval + ranking, knowledge split evenly over future steps
        future = state.target_length - len(state.steps)
        logprobs: list[tuple[float, ...]] = []
        if future == 0:
            return state, logprobs
        planned = self.plan_keywords(state)
        scored = self.rank_candidates(state, planned)
        budget = [c for c, _ in scored[: self.config.knowledge_per_step * future]]
        chunks = split_evenly(budget, future)
        for chunk in chunks:
            keywords = KeywordSet(
                step_index=state.next_step_index, keywords=planned.keywords, source=planned.source
            )
            sentence, step_logprobs = self.generate_sentence(state, chunk)
            state.append(
                StoryStep(
                    sentence=sentence,
                    knowledge=tuple(chunk),
                    keywords=keywords,
                    provenance="generated",
                )
            )
            logprobs.append(step_logprobs)
        return state, logprobs


def format_story_line(state: StoryState) -> str:
    """One story per line, sentences joined by tabs."""
    return "\t".join(state.sentences())


def format_plan_log(state: StoryState) -> str:
    """Sidecar plan log: ``step<TAB>keywords<TAB>triple_ids`` per step."""
    lines = []
    for i, step in enumerate(state.steps, start=1):
        phrases = " ; ".join(step.keywords.phrases())
        ids = ",".join(str(k.triple_id) for k in step.knowledge)
        lines.append(f"{i}\t{phrases}\t{ids}")
    return "\n".join(lines) + "\n"
