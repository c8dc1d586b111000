"""Pseudo labels for the controlling knowledge of each story sentence.

True controlling knowledge is never observed, so the label for sentence i
is built by weak supervision: extract keywords from the sentence, retrieve
candidate knowledge, embed the local context [s_{i-1}, s_i] and every
candidate, and keep the top-N candidates by cosine similarity.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .exceptions import DataFormatError
from .kb import KnowledgeIndex, retrieve
from .keywords import rake_extract

DEFAULT_TOP_N = 10


@dataclass(frozen=True)
class PseudoLabel:
    """Weakly supervised positives for one story step.

    ``positives`` are the top-N candidates by similarity (descending score,
    ties by ascending triple id); ``candidates`` is the full retrieved set.
    """

    story_id: str
    step_index: int
    positives: tuple[int, ...]
    candidates: tuple[int, ...]

    def __post_init__(self):
        if self.step_index < 1:
            raise ValueError("step_index must be >= 1")
        if not set(self.positives) <= set(self.candidates):
            raise ValueError("positives must be a subset of candidates")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; zero-norm inputs score 0 by definition.

    Inputs are pre-scaled by their largest component so tiny vectors do
    not lose precision to squaring underflow.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    mu = float(np.max(np.abs(u)))
    mv = float(np.max(np.abs(v)))
    if mu == 0.0 or mv == 0.0 or not np.isfinite(mu) or not np.isfinite(mv):
        if np.isnan(mu) or np.isnan(mv):
            raise ValueError("cosine inputs must not contain NaN")
        if not (np.isfinite(mu) and np.isfinite(mv)):
            raise ValueError("cosine inputs must be finite")
        return 0.0
    us = u / mu
    vs = v / mv
    return float(np.dot(us, vs) / (np.linalg.norm(us) * np.linalg.norm(vs)))


def top_n_by_similarity(
    query: np.ndarray,
    candidates: Iterable[tuple[int, np.ndarray]],
    n: int,
) -> list[int]:
    """Top-n candidate ids by cosine to the query, ties by ascending id."""
    scored = [(-cosine(query, vector), triple_id) for triple_id, vector in candidates]
    scored.sort()
    return [triple_id for _, triple_id in scored[:n]]


def build_pseudo_label(
    s_prev: str | None,
    s_cur: str,
    index: KnowledgeIndex,
    embedder,
    stopwords: frozenset[str],
    n: int = DEFAULT_TOP_N,
    max_keywords: int = 3,
    story_id: str = "",
    step_index: int = 1,
) -> PseudoLabel:
    """Label one sentence with its most context-similar retrieved knowledge.

    The labeling context is ``s_prev`` and ``s_cur`` joined by a single
    space; for the first sentence (no predecessor) it degenerates to
    ``s_cur`` alone. Zero retrieved candidates yield an empty label.
    """
    if not s_cur.strip():
        raise ValueError("current sentence must be non-empty")
    if n < 1:
        raise ValueError("n must be >= 1")
    keywords = rake_extract(s_cur, stopwords, max_keywords=max_keywords, step_index=step_index)
    candidates = retrieve(index, keywords)
    if not candidates:
        return PseudoLabel(story_id=story_id, step_index=step_index, positives=(), candidates=())
    context = f"{s_prev} {s_cur}" if s_prev else s_cur
    vectors = embedder.embed([context] + [c.text for c in candidates])
    query, cand_vectors = vectors[0], vectors[1:]
    ranked = top_n_by_similarity(
        query, zip((c.triple_id for c in candidates), cand_vectors), n
    )
    return PseudoLabel(
        story_id=story_id,
        step_index=step_index,
        positives=tuple(ranked),
        candidates=tuple(c.triple_id for c in candidates),
    )


def dump_labels(labels: Iterable[PseudoLabel]) -> str:
    """Render labels as ``story_id<TAB>step<TAB>pos_ids<TAB>cand_ids`` lines."""
    lines = []
    for label in labels:
        positives = ",".join(str(i) for i in label.positives)
        candidates = ",".join(str(i) for i in label.candidates)
        lines.append(f"{label.story_id}\t{label.step_index}\t{positives}\t{candidates}")
    return "\n".join(lines) + ("\n" if lines else "")


def load_labels(stream: Iterable[str] | str) -> list[PseudoLabel]:
    """Parse a pseudo-label dump written by :func:`dump_labels`."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    labels = []
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataFormatError(f"expected 4 tab-separated fields, got {len(parts)}", lineno)
        story_id, step, positives, candidates = parts
        try:
            labels.append(
                PseudoLabel(
                    story_id=story_id,
                    step_index=int(step),
                    positives=tuple(int(x) for x in positives.split(",") if x),
                    candidates=tuple(int(x) for x in candidates.split(",") if x),
                )
            )
        except ValueError as exc:
            raise DataFormatError(str(exc), lineno) from exc
    return labels
