"""Outbound wire protocol to the embedding, keyword, and generator backends.

Each backend speaks one JSON request/response pair:

    POST {embed_url}/embed     {"texts": [..]}                      -> {"vectors": [[..],..], "dim": d}
    POST {kw_url}/keywords     {"context": ".."}                    -> {"keywords": "kw1 ; kw2"}
    POST {gen_url}/generate    {"input", "top_k", "temperature",
                                "seed", "stop"}                     -> {"text": "..", "token_logprobs": [..]}

Transport failures are retried exactly ``retries`` times before a
TransportError surfaces; malformed bodies raise ProtocolError without
retry.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import requests

from .exceptions import ProtocolError, TransportError

ENV_EMBED_URL = "CNTRL_EMBED_URL"
ENV_KEYWORD_URL = "CNTRL_KW_URL"
ENV_GENERATOR_URL = "CNTRL_GEN_URL"


@dataclass(frozen=True)
class BackendEndpoint:
    """Descriptor of one external backend service."""

    kind: str  # embed | keywords | generate
    url: str
    timeout: float = 10.0
    retries: int = 2

    def __post_init__(self):
        if self.kind not in ("embed", "keywords", "generate"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


@dataclass(frozen=True)
class GenerationResult:
    text: str
    token_logprobs: tuple[float, ...]


class EmbeddingBackend(Protocol):
    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class KeywordBackend(Protocol):
    def predict(self, context: str) -> str: ...


class GeneratorBackend(Protocol):
    def generate(
        self, input_text: str, top_k: int, temperature: float, seed: int, stop: str
    ) -> GenerationResult: ...


def _post_json(endpoint: BackendEndpoint, path: str, payload: dict) -> dict:
    url = endpoint.url.rstrip("/") + path
    last_error: Exception | None = None
    for _ in range(endpoint.retries + 1):
        try:
            response = requests.post(url, json=payload, timeout=endpoint.timeout)
        except requests.RequestException as exc:
            last_error = exc
            continue
        if response.status_code >= 500:
            last_error = TransportError(f"{url} returned {response.status_code}")
            continue
        if response.status_code != 200:
            raise ProtocolError(f"{url} returned {response.status_code}: {response.text[:200]}")
        try:
            body = response.json()
        except ValueError as exc:
            raise ProtocolError(f"{url} returned non-JSON body") from exc
        if not isinstance(body, dict):
            raise ProtocolError(f"{url} returned non-object body")
        return body
    raise TransportError(f"{url} unreachable after {endpoint.retries + 1} attempts: {last_error}")


class HttpEmbeddingBackend:
    """Embedding client; returns one row vector per input text."""

    def __init__(self, endpoint: BackendEndpoint):
        if endpoint.kind != "embed":
            raise ValueError("endpoint kind must be 'embed'")
        self.endpoint = endpoint

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, 0))
        body = _post_json(self.endpoint, "/embed", {"texts": texts})
        try:
            vectors = np.asarray(body["vectors"], dtype=float)
            dim = int(body["dim"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad embed reply: {exc}") from exc
        if vectors.ndim != 2 or vectors.shape != (len(texts), dim):
            raise ProtocolError(
                f"embed reply shape {vectors.shape} does not match {len(texts)} texts of dim {dim}"
            )
        return vectors


class HttpKeywordBackend:
    """Keyword predictor client; returns the raw concatenated keyword string."""

    def __init__(self, endpoint: BackendEndpoint):
        if endpoint.kind != "keywords":
            raise ValueError("endpoint kind must be 'keywords'")
        self.endpoint = endpoint

    def predict(self, context: str) -> str:
        body = _post_json(self.endpoint, "/keywords", {"context": context})
        keywords = body.get("keywords")
        if not isinstance(keywords, str):
            raise ProtocolError("keyword reply missing string field 'keywords'")
        return keywords


class HttpGeneratorBackend:
    """Conditional generator client."""

    def __init__(self, endpoint: BackendEndpoint):
        if endpoint.kind != "generate":
            raise ValueError("endpoint kind must be 'generate'")
        self.endpoint = endpoint

    def generate(
        self, input_text: str, top_k: int, temperature: float, seed: int, stop: str
    ) -> GenerationResult:
        body = _post_json(
            self.endpoint,
            "/generate",
            {
                "input": input_text,
                "top_k": top_k,
                "temperature": temperature,
                "seed": seed,
                "stop": stop,
            },
        )
        text = body.get("text")
        logprobs = body.get("token_logprobs")
        if not isinstance(text, str) or not isinstance(logprobs, list):
            raise ProtocolError("generate reply must carry 'text' and 'token_logprobs'")
        try:
            probs = tuple(float(x) for x in logprobs)
        except (TypeError, ValueError) as exc:
            raise ProtocolError("token_logprobs must be numbers") from exc
        return GenerationResult(text=text, token_logprobs=probs)


class CachingEmbedder:
    """Memoizes an embedding backend by exact text.

    Knowledge sentences recur across labeling and ranking; caching keeps
    batch jobs from re-requesting them.
    """

    def __init__(self, backend: EmbeddingBackend):
        self.backend = backend
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        missing = [t for t in texts if t not in self._cache]
        if missing:
            fresh = self.backend.embed(missing)
            for text, vector in zip(missing, fresh):
                self._cache[text] = np.array(vector, dtype=float)
        return np.array([self._cache[t] for t in texts], dtype=float)


@dataclass
class BackendSuite:
    """The three pluggable model backends used by the pipeline."""

    embedder: EmbeddingBackend
    keyword_predictor: KeywordBackend
    generator: GeneratorBackend
