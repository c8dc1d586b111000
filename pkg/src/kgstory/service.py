"""HTTP gateway for interactive, human-steerable generation sessions.

Each session walks a phase machine per step:

    awaiting_keywords -> keywords_ready -> knowledge_ready -> (next step | complete)

Keyword prediction happens automatically on create and after every step;
the client may override the pending keywords, optionally pin a knowledge
subset, and then trigger the step. Sessions live in memory; a snapshot
can be written on shutdown.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .backends import BackendSuite
from .exceptions import BackendError, TransportError
from .kb import KnowledgeSentence
from .keywords import KeywordSet
from .planner import StoryPipeline
from .story import GenerationConfig, StoryState, StoryStep

PHASES = ("awaiting_keywords", "keywords_ready", "knowledge_ready", "complete")


class SessionConfigBody(BaseModel):
    target_length: int | None = None
    knowledge_per_step: int | None = None
    top_k: int | None = None
    temperature: float | None = None
    mode: str | None = None
    seed: int | None = None


class CreateSessionBody(BaseModel):
    first_sentence: str
    config: SessionConfigBody | None = None


class KeywordsBody(BaseModel):
    keywords: list[str]


class KnowledgeBody(BaseModel):
    triple_ids: list[int]


class EmbedBody(BaseModel):
    texts: list[str]


class KeywordContextBody(BaseModel):
    context: str


class GenerateBody(BaseModel):
    input: str
    top_k: int
    temperature: float
    seed: int
    stop: str


@dataclass
class Session:
    session_id: str
    state: StoryState
    phase: str = "awaiting_keywords"
    pending_keywords: KeywordSet | None = None
    pending_knowledge: list[tuple[KnowledgeSentence, float]] | None = None
    pinned_ids: list[int] | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def _keywords_from_strings(phrases: list[str], step_index: int) -> KeywordSet:
    seen: list[tuple[str, ...]] = []
    for phrase in phrases:
        tokens = tuple(phrase.lower().split())
        if tokens and tokens not in seen:
            seen.append(tokens)
    return KeywordSet(step_index=step_index, keywords=tuple(seen), source="human")


def _step_view(step: StoryStep) -> dict:
    return {
        "sentence": step.sentence,
        "provenance": step.provenance,
        "keywords": step.keywords.phrases(),
        "keyword_source": step.keywords.source,
        "knowledge": [{"triple_id": k.triple_id, "text": k.text} for k in step.knowledge],
    }


def _session_view(session: Session) -> dict:
    return {
        "session_id": session.session_id,
        "phase": session.phase,
        "target_length": session.state.target_length,
        "knowledge_per_step": session.state.config.knowledge_per_step,
        "steps": [_step_view(s) for s in session.state.steps],
        "pending_keywords": session.pending_keywords.phrases() if session.pending_keywords else None,
        "pending_knowledge": (
            [
                {"triple_id": k.triple_id, "text": k.text, "score": score}
                for k, score in session.pending_knowledge
            ]
            if session.pending_knowledge is not None
            else None
        ),
        "pinned_ids": session.pinned_ids,
    }


def create_app(
    pipeline: StoryPipeline,
    default_target_length: int = 5,
    ui_dir: str | None = None,
    snapshot_path: str | None = None,
) -> FastAPI:
    app = FastAPI(title="kgstory gateway")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    def get_session(session_id: str) -> Session:
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    def require_phase(session: Session, phase: str) -> None:
        if session.phase != phase:
            raise HTTPException(
                status_code=409,
                detail=f"operation requires phase {phase!r}, session is in {session.phase!r}",
            )

    def backend_guarded(fn, *args):
        try:
            return fn(*args)
        except TransportError as exc:
            raise HTTPException(
                status_code=502, detail=f"backend unreachable, retry later: {exc}"
            ) from exc
        except BackendError as exc:
            raise HTTPException(status_code=502, detail=f"backend failure: {exc}") from exc

    def predict_pending(session: Session) -> None:
        # awaiting_keywords -> keywords_ready
        session.pending_keywords = backend_guarded(pipeline.plan_keywords, session.state)
        session.pending_knowledge = None
        session.pinned_ids = None
        session.phase = "keywords_ready"

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        overrides = body.config or SessionConfigBody()
        base = pipeline.config
        try:
            config = GenerationConfig(
                knowledge_per_step=overrides.knowledge_per_step or base.knowledge_per_step,
                top_k=overrides.top_k or base.top_k,
                temperature=overrides.temperature or base.temperature,
                mode=overrides.mode or base.mode,
                seed=overrides.seed if overrides.seed is not None else base.seed,
                max_keywords=base.max_keywords,
            )
            state = StoryState.start(
                body.first_sentence,
                target_length=overrides.target_length or default_target_length,
                config=config,
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        session = Session(session_id=uuid.uuid4().hex, state=state)
        if state.is_complete:
            session.phase = "complete"
            predicted: list[str] = []
        else:
            predict_pending(session)
            predicted = session.pending_keywords.phrases()
        with registry_lock:
            sessions[session.session_id] = session
        return {"session_id": session.session_id, "predicted_keywords": predicted}

    @app.get("/sessions/{session_id}")
    def get_session_state(session_id: str):
        return _session_view(get_session(session_id))

    @app.post("/sessions/{session_id}/keywords")
    def override_keywords(session_id: str, body: KeywordsBody):
        session = get_session(session_id)
        with session.lock:
            require_phase(session, "keywords_ready")
            keywords = _keywords_from_strings(body.keywords, session.state.next_step_index)
            session.pending_keywords = keywords
            session.pending_knowledge = backend_guarded(
                pipeline.rank_candidates, session.state, keywords
            )
            session.pinned_ids = None
            session.phase = "knowledge_ready"
            return {
                "keywords": keywords.phrases(),
                "candidates": [
                    {"triple_id": k.triple_id, "text": k.text, "score": score}
                    for k, score in session.pending_knowledge
                ],
            }

    @app.post("/sessions/{session_id}/knowledge")
    def pin_knowledge(session_id: str, body: KnowledgeBody):
        session = get_session(session_id)
        with session.lock:
            require_phase(session, "knowledge_ready")
            limit = session.state.config.knowledge_per_step
            if len(body.triple_ids) > limit:
                raise HTTPException(
                    status_code=400, detail=f"at most {limit} knowledge sentences may be pinned"
                )
            known = {k.triple_id for k, _ in session.pending_knowledge or []}
            unknown = [i for i in body.triple_ids if i not in known]
            if unknown:
                raise HTTPException(
                    status_code=400, detail=f"triple ids not among candidates: {unknown}"
                )
            session.pinned_ids = list(dict.fromkeys(body.triple_ids))
            return {"pinned": session.pinned_ids}

    @app.post("/sessions/{session_id}/step")
    def generate_step(session_id: str):
        session = get_session(session_id)
        with session.lock:
            require_phase(session, "knowledge_ready")
            scored = session.pending_knowledge or []
            if session.pinned_ids is not None:
                pinned = set(session.pinned_ids)
                chosen = [k for k, _ in scored if k.triple_id in pinned]
            else:
                chosen = [k for k, _ in scored[: session.state.config.knowledge_per_step]]
            sentence, _ = backend_guarded(pipeline.generate_sentence, session.state, chosen)
            step = StoryStep(
                sentence=sentence,
                knowledge=tuple(chosen),
                keywords=session.pending_keywords,
                provenance="generated",
            )
            session.state.append(step)
            session.pending_keywords = None
            session.pending_knowledge = None
            session.pinned_ids = None
            if session.state.is_complete:
                session.phase = "complete"
                return {"step": _step_view(step), "complete": True}
            session.phase = "awaiting_keywords"
            predict_pending(session)
            return {
                "step": _step_view(step),
                "complete": False,
                "predicted_keywords": session.pending_keywords.phrases(),
            }

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        with registry_lock:
            if session_id not in sessions:
                raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
            del sessions[session_id]

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    if snapshot_path is not None:

        @app.on_event("shutdown")
        def snapshot_sessions():
            with registry_lock:
                rows = [
                    "\t".join([s.session_id, s.phase, *s.state.sentences()])
                    for s in sessions.values()
                ]
            with open(snapshot_path, "w", encoding="utf-8") as handle:
                handle.write("\n".join(rows) + ("\n" if rows else ""))

    return app


def create_backend_app(suite: BackendSuite) -> FastAPI:
    """Serve a BackendSuite over the outbound wire protocol.

    This is the reference server for the protocol; pointing the gateway's
    HTTP backend clients at it must behave identically to calling the
    suite in-process.
    """
    app = FastAPI(title="kgstory mock backends")

    @app.post("/embed")
    def embed(body: EmbedBody):
        vectors = suite.embedder.embed(body.texts)
        return {"vectors": vectors.tolist(), "dim": int(vectors.shape[1]) if len(body.texts) else 0}

    @app.post("/keywords")
    def keywords(body: KeywordContextBody):
        return {"keywords": suite.keyword_predictor.predict(body.context)}

    @app.post("/generate")
    def generate(body: GenerateBody):
        result = suite.generator.generate(
            body.input, top_k=body.top_k, temperature=body.temperature, seed=body.seed, stop=body.stop
        )
        return {"text": result.text, "token_logprobs": list(result.token_logprobs)}

    return app


__all__ = ["create_app", "create_backend_app", "Session", "PHASES"]
