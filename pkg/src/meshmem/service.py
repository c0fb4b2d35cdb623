"""HTTP control API over a running peer.

The daemon serves this app on a local unix socket; the CLI is a thin client
against it. Every response body is machine-parseable JSON.
"""

from __future__ import annotations

from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .cat7 import FieldName
from .errors import MeshMemError, MoodOutOfRange, NotAdmitted, ObserveConflict, UnknownKey
from .peer import MeshPeer
from .wire import encode_entry


class ObserveRequest(BaseModel):
    focus: str
    issue: str
    intent: str
    motivation: str
    commitment: str
    perspective: str
    mood: str
    valence: float
    arousal: float
    body: Optional[dict[str, Any]] = None
    to: Optional[list[str]] = None

    def field_texts(self) -> dict[FieldName, str]:
        return {
            FieldName.FOCUS: self.focus,
            FieldName.ISSUE: self.issue,
            FieldName.INTENT: self.intent,
            FieldName.MOTIVATION: self.motivation,
            FieldName.COMMITMENT: self.commitment,
            FieldName.PERSPECTIVE: self.perspective,
            FieldName.MOOD: self.mood,
        }


class ObserveResponse(BaseModel):
    key: str
    delivery: dict[str, str]


class RecallRequest(BaseModel):
    limit: int = Field(default=10, ge=1)
    query: Optional[dict[str, str]] = None


def _error_response(exc: MeshMemError, status: int) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"type": type(exc).__name__, "detail": str(exc)}},
    )


def create_app(peer: MeshPeer) -> FastAPI:
    app = FastAPI(title="meshmem control", docs_url=None, redoc_url=None)

    @app.exception_handler(MeshMemError)
    async def handle_domain_error(request: Request, exc: MeshMemError):
        status = 404 if isinstance(exc, UnknownKey) else 400
        if isinstance(exc, (MoodOutOfRange, ObserveConflict, NotAdmitted)):
            status = 400
        return _error_response(exc, status)

    @app.post("/observe", response_model=ObserveResponse)
    def observe(req: ObserveRequest) -> ObserveResponse:
        entry, report = peer.observe(
            req.field_texts(),
            (req.valence, req.arousal),
            body=req.body,
            to=set(req.to) if req.to is not None else None,
        )
        return ObserveResponse(key=entry.key, delivery=report)

    @app.post("/recall")
    def recall(req: RecallRequest) -> PlainTextResponse:
        query = None
        if req.query:
            query = {FieldName(k): v for k, v in req.query.items()}
        entries = peer.recall(query, req.limit)
        lines = b"".join(encode_entry(e) + b"\n" for e in entries)
        return PlainTextResponse(lines, media_type="application/x-ndjson")

    @app.get("/fetch/{key}")
    def fetch(key: str) -> PlainTextResponse:
        entry = peer.fetch(key)
        return PlainTextResponse(
            encode_entry(entry) + b"\n", media_type="application/x-ndjson"
        )

    @app.get("/peers")
    def peers() -> list[dict[str, Any]]:
        return peer.peers()

    @app.get("/status")
    def status() -> dict[str, Any]:
        return peer.status()

    return app
