"""Adaptive game sessions: evolve rules, narrate them, play, persist.

A session ties the pieces into one narrated game: a rule evolved to a
difficulty target, a board playing under it, and a story transcript that
grows every time the rules change. Completing the board automatically
re-targets the difficulty and continues the story; an explicit adapt
request does the same at any moment.

Persistence is one JSON document per session in a data directory,
written to a temp file and atomically renamed so a crash mid-write
leaves the previous version intact. Boards are stored as their event
log and rebuilt by replay, which keeps the document small and
guarantees restored state agrees with what the rule derives.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from math import comb
from pathlib import Path

from .board import (
    BoardState,
    FeedbackEvent,
    TileGame,
    empty_board,
    place,
    remove,
    replay_events,
)
from .evolution import EvolutionConfig, evolve
from .narrative import (
    NarratorConfig,
    NarratorUnavailable,
    ProtocolError,
    build_continuation_prompt,
    build_opening_prompt,
    narrate,
    stub_story,
)
from .rules import (
    Arrangement,
    BOARD_SLOTS,
    RuleNode,
    evaluate,
    rule_from_dict,
    rule_to_dict,
)
from .tiles import TileSet, animal_dinner_set, load_tileset, save_tileset


class UnknownSession(KeyError):
    """No persisted session under that id."""


class SessionError(ValueError):
    """A request the service understands but must refuse (bad target)."""


class NarrationFailed(RuntimeError):
    """Narration failed and the stub fallback is disabled."""


@dataclass(frozen=True)
class ServiceConfig:
    """Everything the service needs beyond the request itself.

    The evolution knobs exist so test deployments can run a small, fast
    search; production defaults mirror the library defaults.
    """

    data_dir: Path | str | None = None  # None = throwaway temp directory
    narrator: NarratorConfig = NarratorConfig()
    tileset: TileSet | None = None  # None = the packaged animal set
    fallback_to_stub: bool = True
    next_target_factor: float = 0.5
    next_target_floor: int = 50
    population_size: int = 100
    mutation_rate: float = 0.5
    max_generations: int = 50
    elite_count: int = 10
    workers: int = 1
    cors_origins: tuple[str, ...] = ("*",)
    ui_dir: Path | str | None = None


@dataclass
class Session:
    """One narrated game: rules so far, the live board, and the story."""

    id: str
    seed: int
    title: str
    tileset: TileSet
    difficulty_target: int
    rule_history: list[tuple[RuleNode, int]]  # (rule, achieved count), oldest first
    transcript: list[str]
    board: BoardState
    last_events: tuple[FeedbackEvent, ...]
    evolve_count: int
    created: str
    updated: str

    @property
    def rule(self) -> RuleNode:
        return self.rule_history[-1][0]

    @property
    def achieved(self) -> int:
        return self.rule_history[-1][1]


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _derived_seed(seed: int, counter: int) -> int:
    # One deterministic stream per session: evolution run k always sees
    # the same seed, no matter what happened between requests.
    digest = hashlib.sha256(f"{seed}:{counter}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def _event_docs(events: tuple[FeedbackEvent, ...]) -> list[dict]:
    return [{"kind": e.kind, "slot": e.slot, "tile": e.tile} for e in events]


def _events_from_docs(docs: list[dict]) -> tuple[FeedbackEvent, ...]:
    return tuple(FeedbackEvent(d["kind"], d["slot"], d["tile"]) for d in docs)


def session_to_doc(session: Session) -> dict:
    return {
        "id": session.id,
        "seed": session.seed,
        "title": session.title,
        "tileset": json.loads(save_tileset(session.tileset)),
        "difficulty_target": session.difficulty_target,
        "rule_history": [
            {"rule": rule_to_dict(rule), "achieved": achieved}
            for rule, achieved in session.rule_history
        ],
        "transcript": list(session.transcript),
        "board_events": _event_docs(session.board.event_log),
        "last_events": _event_docs(session.last_events),
        "evolve_count": session.evolve_count,
        "created": session.created,
        "updated": session.updated,
    }


def session_from_doc(doc: dict) -> Session:
    tileset = load_tileset(json.dumps(doc["tileset"]))
    history = [
        (rule_from_dict(entry["rule"]), entry["achieved"]) for entry in doc["rule_history"]
    ]
    game = TileGame(tileset, history[-1][0], title=doc["title"])
    board = replay_events(game, _events_from_docs(doc["board_events"]))
    return Session(
        id=doc["id"],
        seed=doc["seed"],
        title=doc["title"],
        tileset=tileset,
        difficulty_target=doc["difficulty_target"],
        rule_history=history,
        transcript=list(doc["transcript"]),
        board=board,
        last_events=_events_from_docs(doc["last_events"]),
        evolve_count=doc["evolve_count"],
        created=doc["created"],
        updated=doc["updated"],
    )


class SessionStore:
    """Disk-backed registry; one lock per session serializes its writers."""

    def __init__(self, data_dir: Path | str | None):
        self._tmp = None
        if data_dir is None:
            self._tmp = tempfile.TemporaryDirectory(prefix="tiletales-")
            data_dir = self._tmp.name
        self._dir = Path(data_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _path(self, session_id: str) -> Path:
        return self._dir / f"{session_id}.json"

    def get(self, session_id: str) -> Session:
        with self._guard:
            cached = self._cache.get(session_id)
        if cached is not None:
            return cached
        # ids are generated hex; anything else can't name a stored doc
        if not session_id.isalnum():
            raise UnknownSession(session_id)
        path = self._path(session_id)
        if not path.exists():
            raise UnknownSession(session_id)
        session = session_from_doc(json.loads(path.read_text(encoding="utf-8")))
        with self._guard:
            self._cache[session_id] = session
        return session

    def save(self, session: Session) -> None:
        path = self._path(session.id)
        tmp = path.with_suffix(".json.tmp")
        text = json.dumps(session_to_doc(session), indent=2, sort_keys=True) + "\n"
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
        with self._guard:
            self._cache[session.id] = session


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


class SessionService:
    """The operations behind the HTTP endpoints, HTTP-free for testing."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.tileset = config.tileset if config.tileset is not None else animal_dinner_set()
        self.store = SessionStore(config.data_dir)
        self.total_sets = comb(len(self.tileset.tiles), BOARD_SLOTS)

    def _check_target(self, target: int) -> None:
        if not 0 <= target <= self.total_sets:
            raise SessionError(
                f"difficulty target {target} out of range; this tile set "
                f"allows 0..{self.total_sets}"
            )

    def _evolve(self, session_seed: int, counter: int, target: int, sample_tiles):
        config = EvolutionConfig(
            target=target,
            seed=_derived_seed(session_seed, counter),
            population_size=self.config.population_size,
            mutation_rate=self.config.mutation_rate,
            max_generations=self.config.max_generations,
            elite_count=self.config.elite_count,
        )
        result = evolve(config, self.tileset, sample_tiles, workers=self.config.workers)
        return result.best_rule, result.achieved

    def _narrate(self, bundle) -> str:
        try:
            return narrate(bundle, self.config.narrator)
        except (NarratorUnavailable, ProtocolError) as exc:
            if self.config.fallback_to_stub:
                return stub_story(bundle)
            raise NarrationFailed(str(exc)) from exc

    def create(self, theme: str, difficulty_target: int, seed: int) -> Session:
        self._check_target(difficulty_target)
        session_id = uuid.uuid4().hex
        with self.store.lock(session_id):
            rule, achieved = self._evolve(seed, 0, difficulty_target, None)
            game = TileGame(self.tileset, rule, title=theme)
            story = self._narrate(build_opening_prompt(game))
            now = _utcnow()
            session = Session(
                id=session_id,
                seed=seed,
                title=theme,
                tileset=self.tileset,
                difficulty_target=difficulty_target,
                rule_history=[(rule, achieved)],
                transcript=[story],
                board=empty_board(game),
                last_events=(),
                evolve_count=1,
                created=now,
                updated=now,
            )
            self.store.save(session)
        return session

    def get(self, session_id: str) -> Session:
        with self.store.lock(session_id):
            return self.store.get(session_id)

    def act(self, session_id: str, action: str, tile_id: int | None, slot: int):
        """Apply a place/remove, auto-adapting when the board completes.

        Returns (session, events, verdicts) where verdicts is the
        evaluation of the arrangement as the action left it, before any
        throw-offs; BoardError propagates for illegal actions.
        """
        with self.store.lock(session_id):
            session = self.store.get(session_id)
            before = session.board.arrangement.slots
            if action == "place":
                new_board, events = place(session.board, tile_id, slot)
            else:
                new_board, events = remove(session.board, slot)
            trial = list(before)
            trial[slot] = tile_id if action == "place" else None
            verdicts = evaluate(session.rule, Arrangement(tuple(trial), session.tileset))
            session.board = new_board
            session.last_events = tuple(events)
            if new_board.completed:
                solved = [t for t in new_board.arrangement.slots if t is not None]
                next_target = max(
                    self.config.next_target_floor,
                    round(session.difficulty_target * self.config.next_target_factor),
                )
                self._adapt_locked(session, next_target, solved)
            session.updated = _utcnow()
            self.store.save(session)
            return session, events, verdicts

    def adapt(self, session_id: str, new_target: int):
        self._check_target(new_target)
        with self.store.lock(session_id):
            session = self.store.get(session_id)
            placed = [t for t in session.board.arrangement.slots if t is not None]
            story = self._adapt_locked(session, new_target, placed)
            session.last_events = ()
            session.updated = _utcnow()
            self.store.save(session)
            return session, story

    def _adapt_locked(self, session: Session, new_target: int, sample_ids: list[int]) -> str:
        """Evolve toward new_target, continue the story, reset the board.

        The caller holds the session lock and persists afterwards.
        sample_ids seeds rule parameters from the latest solved tiles;
        empty means draw from the whole set.
        """
        sample = [session.tileset.tile(i) for i in sample_ids] or None
        rule, achieved = self._evolve(session.seed, session.evolve_count, new_target, sample)
        session.evolve_count += 1
        game = TileGame(session.tileset, rule, title=session.title)
        prior = "\n\n".join(session.transcript)
        story = self._narrate(build_continuation_prompt(prior, game, sample_ids))
        session.rule_history.append((rule, achieved))
        session.difficulty_target = new_target
        session.transcript.append(story)
        session.board = empty_board(game)
        return story
