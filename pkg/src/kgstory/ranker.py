"""Contextual knowledge ranking with learned projection heads.

Relevance of a candidate knowledge sentence to the story context is the
inner product of two linear projections: (W1 ctx) . (W2 cand). The heads
are trained with a hinge ranking loss max(0, M - c_pos + c_neg) over
(context, positive, negative) triples sampled from pseudo-labels; the
embedding backend stays frozen and only W1/W2 move.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import story as story_mod
from .backends import CachingEmbedder, EmbeddingBackend
from .exceptions import DataFormatError
from .kb import KnowledgeIndex
from .keywords import KeywordSet
from .weaklabel import build_pseudo_label

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 5.0
DEFAULT_NEGATIVES_PER_CONTEXT = 40
DEFAULT_PAIRS_PER_CONTEXT = 50
CHECKPOINT_FORMAT = "kgstory-ranker-heads"
CHECKPOINT_VERSION = 1


@dataclass
class RankerHeads:
    """Learnable projections and margin of the contextual ranker."""

    W1: np.ndarray  # context head, (d_out, d_in)
    W2: np.ndarray  # knowledge head, (d_out, d_in)
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=float)
        self.W2 = np.asarray(self.W2, dtype=float)
        if self.W1.ndim != 2 or self.W1.shape != self.W2.shape:
            raise ValueError(f"W1 {self.W1.shape} and W2 {self.W2.shape} must be equal 2-d shapes")
        if not (np.isfinite(self.W1).all() and np.isfinite(self.W2).all()):
            raise ValueError("heads must be finite-valued")
        if self.margin <= 0:
            raise ValueError("margin must be > 0")

    @property
    def d_in(self) -> int:
        return self.W1.shape[1]

    @property
    def d_out(self) -> int:
        return self.W1.shape[0]

    def copy(self) -> "RankerHeads":
        return RankerHeads(self.W1.copy(), self.W2.copy(), self.margin)


@dataclass(frozen=True)
class RankTrainingExample:
    """One (context, positive knowledge, negative knowledge) triple."""

    context_embedding: np.ndarray
    positive_embedding: np.ndarray
    negative_embedding: np.ndarray


def init_heads(d_in: int, d_out: int = 128, margin: float = DEFAULT_MARGIN, seed: int = 0) -> RankerHeads:
    """Seeded fan-in uniform initialization in [-1/sqrt(d_in), 1/sqrt(d_in)]."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(d_in)
    return RankerHeads(
        W1=rng.uniform(-bound, bound, size=(d_out, d_in)),
        W2=rng.uniform(-bound, bound, size=(d_out, d_in)),
        margin=margin,
    )


def score(heads: RankerHeads, ctx: np.ndarray, cand: np.ndarray) -> float:
    """Relevance score (W1 ctx) . (W2 cand)."""
    ctx = np.asarray(ctx, dtype=float)
    cand = np.asarray(cand, dtype=float)
    if ctx.shape != (heads.d_in,) or cand.shape != (heads.d_in,):
        raise ValueError(
            f"expected vectors of dim {heads.d_in}, got {ctx.shape} and {cand.shape}"
        )
    return float((heads.W1 @ ctx) @ (heads.W2 @ cand))


def margin_loss(c_pos: float, c_neg: float, margin: float) -> float:
    """Hinge ranking loss max(0, margin - c_pos + c_neg)."""
    if margin <= 0:
        raise ValueError("margin must be > 0")
    return max(0.0, margin - c_pos + c_neg)


def _stack(data: Sequence[RankTrainingExample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ctx = np.stack([np.asarray(e.context_embedding, dtype=float) for e in data])
    pos = np.stack([np.asarray(e.positive_embedding, dtype=float) for e in data])
    neg = np.stack([np.asarray(e.negative_embedding, dtype=float) for e in data])
    if not ctx.shape == pos.shape == neg.shape:
        raise ValueError("all embeddings in a training example must share one dimension")
    return ctx, pos, neg


def batch_loss_and_gradients(
    heads: RankerHeads, ctx: np.ndarray, pos: np.ndarray, neg: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean hinge loss over a batch and its analytic gradients w.r.t. W1, W2."""
    U = ctx @ heads.W1.T
    Vp = pos @ heads.W2.T
    Vn = neg @ heads.W2.T
    c_pos = np.einsum("ij,ij->i", U, Vp)
    c_neg = np.einsum("ij,ij->i", U, Vn)
    hinge = heads.margin - c_pos + c_neg
    active = hinge > 0
    loss = float(np.mean(np.maximum(hinge, 0.0)))

    b = ctx.shape[0]
    weights = active.astype(float)[:, None] / b
    grad_w1 = ((Vn - Vp) * weights).T @ ctx
    grad_w2 = (U * weights).T @ (neg - pos)
    return loss, grad_w1, grad_w2


def train(
    heads: RankerHeads,
    data: Sequence[RankTrainingExample],
    epochs: int = 20,
    learning_rate: float = 0.01,
    batch_size: int = 32,
    rng_seed: int = 0,
) -> tuple[RankerHeads, list[float]]:
    """Mini-batch gradient descent on the mean hinge loss.

    Returns updated heads and the per-epoch mean loss trace (losses are
    evaluated at each batch's pre-update parameters). Deterministic for a
    fixed seed; aborts on a non-finite loss.
    """
    if not data:
        raise ValueError("training data must be non-empty")
    ctx, pos, neg = _stack(data)
    if ctx.shape[1] != heads.d_in:
        raise ValueError(f"training dim {ctx.shape[1]} does not match heads d_in {heads.d_in}")
    heads = heads.copy()
    rng = np.random.default_rng(rng_seed)
    n = ctx.shape[0]
    trace: list[float] = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            loss, grad_w1, grad_w2 = batch_loss_and_gradients(
                heads, ctx[batch], pos[batch], neg[batch]
            )
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss {loss} at epoch {epoch + 1}; try a smaller learning rate"
                )
            epoch_loss += loss * len(batch)
            heads.W1 = heads.W1 - learning_rate * grad_w1
            heads.W2 = heads.W2 - learning_rate * grad_w2
        trace.append(epoch_loss / n)
    return heads, trace


def rank(
    heads: RankerHeads,
    ctx_embedding: np.ndarray,
    candidates: Sequence[tuple[int, np.ndarray]],
    n: int,
) -> list[int]:
    """Top-n candidate ids by score (descending, ties by ascending id)."""
    if not candidates:
        return []
    scored = [
        (-score(heads, ctx_embedding, vector), triple_id) for triple_id, vector in candidates
    ]
    scored.sort()
    return [triple_id for _, triple_id in scored[:n]]


def build_training_set(
    stories: Iterable,
    index: KnowledgeIndex,
    embedder: EmbeddingBackend,
    stopwords: frozenset[str],
    n_positives: int = 10,
    negatives_per_context: int = DEFAULT_NEGATIVES_PER_CONTEXT,
    pairs_per_context: int = DEFAULT_PAIRS_PER_CONTEXT,
    rng_seed: int = 0,
    max_keywords: int = 3,
) -> list[RankTrainingExample]:
    """Assemble (context, positive, negative) triples from pseudo-labels.

    For every story step i >= 2 the pseudo positives come from the
    embedding-similarity label, negatives are drawn from the remaining
    retrieved candidates, and ``pairs_per_context`` pairs are sampled with
    the seeded generator. The context X^{i-1} (earlier sentences with
    their own pseudo knowledge) is embedded once per step and reused.
    Steps with no usable positives or negatives are skipped and counted.
    """
    rng = np.random.default_rng(rng_seed)
    embedder = embedder if isinstance(embedder, CachingEmbedder) else CachingEmbedder(embedder)
    examples: list[RankTrainingExample] = []
    skipped = 0
    for story in stories:
        sentences = list(story.sentences)
        labels = []
        for i, sentence in enumerate(sentences, start=1):
            labels.append(
                build_pseudo_label(
                    sentences[i - 2] if i >= 2 else None,
                    sentence,
                    index,
                    embedder,
                    stopwords,
                    n=n_positives,
                    max_keywords=max_keywords,
                    story_id=str(story.story_id),
                    step_index=i,
                )
            )
        context_steps: list[story_mod.StoryStep] = []
        for i, sentence in enumerate(sentences, start=1):
            label = labels[i - 1]
            if i >= 2:
                positive_ids = list(label.positives)
                negative_pool = sorted(set(label.candidates) - set(label.positives))
                if not positive_ids or not negative_pool:
                    skipped += 1
                else:
                    negative_ids = [
                        int(x)
                        for x in rng.permutation(negative_pool)[:negatives_per_context]
                    ]
                    ctx_text = story_mod.serialize_context(context_steps)
                    ctx_vec = embedder.embed([ctx_text])[0]
                    pos_vecs = embedder.embed([index.sentences[j].text for j in positive_ids])
                    neg_vecs = embedder.embed([index.sentences[j].text for j in negative_ids])
                    for _ in range(pairs_per_context):
                        p = int(rng.integers(len(positive_ids)))
                        q = int(rng.integers(len(negative_ids)))
                        examples.append(
                            RankTrainingExample(
                                context_embedding=ctx_vec,
                                positive_embedding=pos_vecs[p],
                                negative_embedding=neg_vecs[q],
                            )
                        )
            context_steps.append(
                story_mod.StoryStep(
                    sentence=sentence,
                    knowledge=tuple(index.sentences[j] for j in label.positives),
                    keywords=KeywordSet(step_index=i),
                    provenance="given",
                )
            )
    if skipped:
        logger.info("skipped %d story steps with no usable positive/negative pool", skipped)
    return examples


def save_heads(heads: RankerHeads, path) -> None:
    """Write a versioned JSON checkpoint (bit-exact round trip)."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "d_in": heads.d_in,
        "d_out": heads.d_out,
        "margin": heads.margin,
        "W1": heads.W1.tolist(),
        "W2": heads.W2.tolist(),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)
        handle.write("\n")


def load_heads(path) -> RankerHeads:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise DataFormatError(f"not a ranker checkpoint: format={payload.get('format')!r}")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise DataFormatError(f"unsupported checkpoint version {payload.get('version')!r}")
    heads = RankerHeads(
        W1=np.asarray(payload["W1"], dtype=float),
        W2=np.asarray(payload["W2"], dtype=float),
        margin=float(payload["margin"]),
    )
    if heads.d_in != payload["d_in"] or heads.d_out != payload["d_out"]:
        raise DataFormatError("checkpoint header does not match matrix shapes")
    return heads


def format_training_report(trace: Sequence[float]) -> str:
    """Per-epoch mean loss as ``epoch<TAB>loss`` lines."""
    return "".join(f"{epoch}\t{loss:.6f}\n" for epoch, loss in enumerate(trace, start=1))


class ContextualKnowledgeRanker(BaseEstimator):
    """Estimator wrapper: fit the heads on ranking triples, then score/rank.

    ``fit`` accepts a sequence of RankTrainingExample. Fitted attributes
    are ``heads_`` and ``loss_trace_``.
    """

    def __init__(
        self,
        d_out: int = 128,
        margin: float = DEFAULT_MARGIN,
        learning_rate: float = 0.01,
        batch_size: int = 32,
        epochs: int = 20,
        random_state: int = 0,
    ):
        self.d_out = d_out
        self.margin = margin
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.random_state = random_state

    def fit(self, X: Sequence[RankTrainingExample], y=None):
        if len(X) == 0:
            raise ValueError("training data must be non-empty")
        d_in = np.asarray(X[0].context_embedding, dtype=float).shape[0]
        heads = init_heads(d_in, d_out=self.d_out, margin=self.margin, seed=self.random_state)
        self.heads_, self.loss_trace_ = train(
            heads,
            X,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            rng_seed=self.random_state,
        )
        return self

    def score_candidates(self, ctx_embedding: np.ndarray, cand_embeddings: np.ndarray) -> np.ndarray:
        check_is_fitted(self, "heads_")
        cand_embeddings = np.asarray(cand_embeddings, dtype=float)
        return np.array(
            [score(self.heads_, ctx_embedding, cand) for cand in cand_embeddings]
        )

    def rank(
        self,
        ctx_embedding: np.ndarray,
        candidates: Sequence[tuple[int, np.ndarray]],
        n: int,
    ) -> list[int]:
        check_is_fitted(self, "heads_")
        return rank(self.heads_, ctx_embedding, candidates, n)
