"""Knowledge-guided controllable story generation.

The pipeline plans each sentence in four steps: predict keywords, retrieve
matching knowledge sentences from a templated triple base, rank them
against the story context with learned projection heads, and condition a
generator backend on the winners. Humans can steer generation by
overriding keywords or pinning knowledge through the HTTP gateway.
"""

from .backends import BackendEndpoint, BackendSuite
from .control import antonym_rerun, find_pivot, load_antonym_lexicon
from .corpus import Story, delexicalize, load_stories, normalize
from .kb import (
    KnowledgeIndex,
    KnowledgeRetriever,
    KnowledgeSentence,
    KnowledgeTriple,
    build_index,
    parse_triples,
    retrieve,
    template,
)
from .keywords import KeywordSet, RakeKeywordExtractor, rake_extract
from .metrics import MetricReport, aggregate_perplexity, distinct4, repeat4
from .mocks import mock_backend_suite
from .planner import StoryPipeline
from .ranker import (
    ContextualKnowledgeRanker,
    RankerHeads,
    RankTrainingExample,
    margin_loss,
    rank,
    score,
    train,
)
from .story import GenerationConfig, StoryState, StoryStep, serialize_input, serialize_story
from .weaklabel import PseudoLabel, build_pseudo_label, cosine

__version__ = "0.1.0"

__all__ = [
    "BackendEndpoint",
    "BackendSuite",
    "ContextualKnowledgeRanker",
    "GenerationConfig",
    "KeywordSet",
    "KnowledgeIndex",
    "KnowledgeRetriever",
    "KnowledgeSentence",
    "KnowledgeTriple",
    "MetricReport",
    "PseudoLabel",
    "RakeKeywordExtractor",
    "RankTrainingExample",
    "RankerHeads",
    "Story",
    "StoryPipeline",
    "StoryState",
    "StoryStep",
    "aggregate_perplexity",
    "antonym_rerun",
    "build_index",
    "build_pseudo_label",
    "cosine",
    "delexicalize",
    "distinct4",
    "find_pivot",
    "load_antonym_lexicon",
    "load_stories",
    "margin_loss",
    "mock_backend_suite",
    "normalize",
    "parse_triples",
    "rake_extract",
    "rank",
    "repeat4",
    "retrieve",
    "score",
    "serialize_input",
    "serialize_story",
    "template",
    "train",
]
