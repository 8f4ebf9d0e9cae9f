"""HTTP session API over the orchestrator.

A thin adapter: observable history through the API equals what direct
engine calls would produce. Sessions are kept in memory, with optional
append-only JSON-lines persistence per session.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from kgchat.model import EngineConfig, ModelError, SessionState, config_from_mapping
from kgchat.orchestrator import Engine, TurnInFlightError, TurnResult


class MessageBody(BaseModel):
    question: str


@dataclass
class SessionRecord:
    session_id: str
    created_at: float
    config: EngineConfig
    state: SessionState
    results: list[dict] = field(default_factory=list)
    traces: list[Optional[dict]] = field(default_factory=list)
    final_texts: list[Optional[str]] = field(default_factory=list)
    flags: list[list[str]] = field(default_factory=list)


class SessionStore:
    def __init__(self, persist_dir: Optional[str] = None):
        self._records: dict[str, SessionRecord] = {}
        self._lock = threading.Lock()
        self.persist_dir = persist_dir
        if persist_dir:
            os.makedirs(persist_dir, exist_ok=True)

    def create(self, config: EngineConfig) -> SessionRecord:
        record = SessionRecord(
            session_id=uuid.uuid4().hex,
            created_at=time.time(),
            config=config,
            state=SessionState(session_id=uuid.uuid4().hex),
        )
        record.state.session_id = record.session_id
        with self._lock:
            self._records[record.session_id] = record
        return record

    def get(self, session_id: str) -> SessionRecord:
        with self._lock:
            record = self._records.get(session_id)
        if record is None:
            raise KeyError(session_id)
        return record

    def persist_turn(self, record: SessionRecord, result: TurnResult) -> None:
        if not self.persist_dir:
            return
        path = os.path.join(self.persist_dir, f"{record.session_id}.jsonl")
        line = json.dumps(
            {"session_id": record.session_id, "turn": len(record.results), "result": result.as_dict()}
        )
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(line + "\n")


def create_app(
    engine: Engine,
    base_config: Optional[EngineConfig] = None,
    persist_dir: Optional[str] = None,
    cors_origins: tuple[str, ...] = ("*",),
) -> FastAPI:
    app = FastAPI(title="kgchat", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(persist_dir=persist_dir)
    config = base_config or engine.config
    app.state.engine = engine
    app.state.sessions = store

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(overrides: Optional[dict] = None) -> dict:
        try:
            session_config = config_from_mapping(overrides or {}, base=config)
        except ModelError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        record = store.create(session_config)
        return {"session_id": record.session_id}

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody) -> dict:
        try:
            record = store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        try:
            result = engine.process_turn(record.state, body.question, record.config)
        except TurnInFlightError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        record.results.append(result.as_dict())
        record.traces.append(result.trace)
        record.final_texts.append(result.final_text)
        record.flags.append(sorted(result.degraded_flags))
        store.persist_turn(record, result)
        return result.as_dict()

    @app.get("/sessions/{session_id}/history")
    def get_history(session_id: str) -> list[dict]:
        try:
            record = store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        entries = []
        for index, turn in enumerate(record.state.dialogue.turns):
            final_text = record.final_texts[index] if index < len(record.final_texts) else None
            flags = record.flags[index] if index < len(record.flags) else []
            entries.append(
                {
                    "question": turn.question,
                    "answers": [
                        {"kind": a.kind, "value": a.value, "display_label": a.display_label}
                        for a in turn.answers
                    ],
                    "final_text": final_text,
                    "degraded_flags": flags,
                }
            )
        return entries

    @app.get("/sessions/{session_id}/trace/{turn}")
    def get_trace(session_id: str, turn: int) -> dict:
        try:
            record = store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        if turn < 1 or turn > len(record.traces):
            raise HTTPException(status_code=404, detail=f"no trace for turn {turn}")
        trace = record.traces[turn - 1]
        if trace is None:
            raise HTTPException(status_code=404, detail=f"trace disabled for turn {turn}")
        return trace

    return app
