"""HTTP face of the session service.

`create_app` wires a SessionService into FastAPI routes and optionally
mounts a static directory with the browser client. Endpoints are plain
sync functions; the framework's worker threads plus the per-session
locks give the serialization the session layer expects.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles

from . import __version__
from .board import BoardError
from .rules import render_rule, rule_children
from .schemas import (
    ActionRequest,
    ActionResponse,
    AdaptRequest,
    AdaptResponse,
    CreateSessionRequest,
    SessionView,
    StoryResponse,
    VerdictView,
    event_views,
    session_view,
)
from .session import (
    NarrationFailed,
    ServiceConfig,
    Session,
    SessionError,
    SessionService,
    UnknownSession,
)


def create_app(config: ServiceConfig) -> FastAPI:
    service = SessionService(config)
    app = FastAPI(title="tiletales", version=__version__)
    app.state.service = service
    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def fetch(session_id: str) -> Session:
        try:
            return service.get(session_id)
        except UnknownSession:
            raise HTTPException(404, f"no session {session_id!r}") from None

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/sessions", response_model=SessionView, status_code=201)
    def create_session(body: CreateSessionRequest):
        try:
            session = service.create(body.theme, body.difficulty_target, body.seed)
        except SessionError as exc:
            raise HTTPException(400, str(exc)) from None
        except NarrationFailed as exc:
            raise HTTPException(502, str(exc)) from None
        return session_view(session)

    @app.get("/sessions/{session_id}", response_model=SessionView)
    def get_session(session_id: str):
        return session_view(fetch(session_id))

    @app.post("/sessions/{session_id}/actions", response_model=ActionResponse)
    def post_action(session_id: str, body: ActionRequest):
        try:
            session, events, verdicts = service.act(
                session_id, body.action, body.tile_id, body.slot
            )
        except UnknownSession:
            raise HTTPException(404, f"no session {session_id!r}") from None
        except BoardError as exc:
            raise HTTPException(409, str(exc)) from None
        except NarrationFailed as exc:
            raise HTTPException(502, str(exc)) from None
        return ActionResponse(
            events=event_views(tuple(events)),
            verdicts=[
                VerdictView(slot=slot, verdict=verdict.name.lower())
                for slot, verdict in verdicts
            ],
            session=session_view(session),
        )

    @app.post("/sessions/{session_id}/adapt", response_model=AdaptResponse)
    def adapt_session(session_id: str, body: AdaptRequest):
        try:
            session, story = service.adapt(session_id, body.new_target)
        except UnknownSession:
            raise HTTPException(404, f"no session {session_id!r}") from None
        except SessionError as exc:
            raise HTTPException(400, str(exc)) from None
        except NarrationFailed as exc:
            raise HTTPException(502, str(exc)) from None
        return AdaptResponse(
            rules=[render_rule(child) for child in rule_children(session.rule)],
            achieved=session.achieved,
            story=story,
            session=session_view(session),
        )

    @app.get("/sessions/{session_id}/story", response_model=StoryResponse)
    def get_story(session_id: str):
        return StoryResponse(transcript=list(fetch(session_id).transcript))

    ui_dir = Path(config.ui_dir) if config.ui_dir else None
    if ui_dir is not None and ui_dir.is_dir():
        # mounted last so the API routes above keep their paths
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
