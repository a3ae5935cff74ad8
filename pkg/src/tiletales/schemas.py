"""Request and response bodies for the HTTP API, plus their builders.

These models are the service's wire contract; the views deliberately
carry everything a stateless client needs to redraw itself from one
GET (tray, slots, transcript, last feedback, rule renderings).
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, model_validator

from .board import FeedbackEvent
from .rules import render_rule, rule_children
from .session import Session
from .tiles import Tile


class CreateSessionRequest(BaseModel):
    theme: str = ""
    difficulty_target: int
    seed: int


class ActionRequest(BaseModel):
    action: Literal["place", "remove"]
    slot: int
    tile_id: Optional[int] = None

    @model_validator(mode="after")
    def _place_needs_a_tile(self):
        if self.action == "place" and self.tile_id is None:
            raise ValueError("a place action needs tile_id")
        return self


class AdaptRequest(BaseModel):
    new_target: int


class TileView(BaseModel):
    id: int
    name: str
    properties: dict[str, str]


class EventView(BaseModel):
    kind: str
    slot: int
    tile: int


class VerdictView(BaseModel):
    slot: int
    verdict: Literal["ignore", "accept", "reject"]


class SessionView(BaseModel):
    id: str
    title: str
    tileset: str
    tiles: list[TileView]
    slots: list[Optional[TileView]]
    transcript: list[str]
    last_events: list[EventView]
    rules: list[str]
    difficulty_target: int
    achieved: int
    completed: bool
    created: str
    updated: str


class ActionResponse(BaseModel):
    events: list[EventView]
    verdicts: list[VerdictView]
    session: SessionView


class AdaptResponse(BaseModel):
    rules: list[str]
    achieved: int
    story: str
    session: SessionView


class StoryResponse(BaseModel):
    transcript: list[str]


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def tile_view(tile: Tile) -> TileView:
    return TileView(id=tile.id, name=tile.name, properties=dict(tile.properties))


def event_views(events: tuple[FeedbackEvent, ...]) -> list[EventView]:
    return [EventView(kind=e.kind, slot=e.slot, tile=e.tile) for e in events]


def session_view(session: Session) -> SessionView:
    return SessionView(
        id=session.id,
        title=session.title,
        tileset=session.tileset.name,
        tiles=[tile_view(t) for t in session.tileset.tiles],
        slots=[
            None if tid is None else tile_view(session.tileset.tile(tid))
            for tid in session.board.arrangement.slots
        ],
        transcript=list(session.transcript),
        last_events=event_views(session.last_events),
        rules=[render_rule(child) for child in rule_children(session.rule)],
        difficulty_target=session.difficulty_target,
        achieved=session.achieved,
        completed=session.board.completed,
        created=session.created,
        updated=session.updated,
    )
