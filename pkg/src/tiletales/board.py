"""The five-slot board: placement feedback, completion, and an agent env.

The board is decoupled from any particular game: a TileGame hands it a
tile set and an active rule, the board registers placements, evaluates,
and answers with feedback events. Placing a tile that draws a reject gets
it thrown off; a surviving placement that knocked something else off is
shaken as an attention cue; filling all five slots cleanly completes the
board.

State transitions are pure: place/remove return a new state plus the
events, so a caller owns exactly one evolving handle and history never
mutates behind its back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .rules import BOARD_SLOTS, Arrangement, RuleNode, Verdict, evaluate, validate_rule
from .tiles import TileSet

PLACED = "placed"
THROWN_OFF = "thrown_off"
SHAKEN = "shaken"
COMPLETED = "completed"
REMOVED = "removed"

EVENT_KINDS = (PLACED, THROWN_OFF, SHAKEN, COMPLETED, REMOVED)


class BoardError(ValueError):
    """An action the board refuses; the state it was aimed at is unchanged."""


@dataclass(frozen=True)
class TileGame:
    """One playable game: a tile set plus the rule currently in force."""

    tiles: TileSet
    rule: RuleNode
    title: str = ""

    def __post_init__(self) -> None:
        validate_rule(self.rule, self.tiles.schema)


@dataclass(frozen=True)
class FeedbackEvent:
    kind: str
    slot: int
    tile: int


@dataclass(frozen=True)
class BoardState:
    arrangement: Arrangement
    game: TileGame
    event_log: tuple[FeedbackEvent, ...]
    completed: bool


def empty_board(game: TileGame) -> BoardState:
    return BoardState(
        arrangement=Arrangement((None,) * BOARD_SLOTS, game.tiles),
        game=game,
        event_log=(),
        completed=False,
    )


def place(state: BoardState, tile_id: int, slot: int) -> tuple[BoardState, list[FeedbackEvent]]:
    """Put a tile down and let the rule react.

    One evaluation pass: every rejected slot is thrown off and vacated
    (the freshly placed tile included), a surviving placement that saw
    others rejected is shaken, and a clean full board completes.
    """
    slots = state.arrangement.slots
    if not 0 <= slot < BOARD_SLOTS:
        raise BoardError(f"no slot {slot}; slots run 0..{BOARD_SLOTS - 1}")
    if slots[slot] is not None:
        raise BoardError(f"slot {slot} is already occupied")
    try:
        state.game.tiles.tile(tile_id)
    except KeyError:
        raise BoardError(f"no tile {tile_id} in this game") from None
    if tile_id in slots:
        raise BoardError(f"tile {tile_id} is already on the board")

    trial = list(slots)
    trial[slot] = tile_id
    arrangement = Arrangement(tuple(trial), state.game.tiles)
    verdicts = evaluate(state.game.rule, arrangement)
    rejected = [i for i, v in verdicts if v is Verdict.REJECT]

    events = [FeedbackEvent(PLACED, slot, tile_id)]
    final = list(trial)
    for i in rejected:
        events.append(FeedbackEvent(THROWN_OFF, i, trial[i]))
        final[i] = None
    if rejected and slot not in rejected:
        events.append(FeedbackEvent(SHAKEN, slot, tile_id))
    completed = not rejected and all(s is not None for s in final)
    if completed:
        events.append(FeedbackEvent(COMPLETED, slot, tile_id))

    new_state = BoardState(
        arrangement=Arrangement(tuple(final), state.game.tiles),
        game=state.game,
        event_log=state.event_log + tuple(events),
        completed=completed,
    )
    return new_state, events


def remove(state: BoardState, slot: int) -> tuple[BoardState, list[FeedbackEvent]]:
    """Take a tile back off; the survivors are re-judged.

    Removing a tile can re-expose violations (the match-reference tile
    leaving, say), so remaining rejects are thrown off in the same move.
    """
    slots = state.arrangement.slots
    if not 0 <= slot < BOARD_SLOTS:
        raise BoardError(f"no slot {slot}; slots run 0..{BOARD_SLOTS - 1}")
    if slots[slot] is None:
        raise BoardError(f"slot {slot} is empty")

    trial = list(slots)
    removed_tile = trial[slot]
    trial[slot] = None
    events = [FeedbackEvent(REMOVED, slot, removed_tile)]
    arrangement = Arrangement(tuple(trial), state.game.tiles)
    verdicts = evaluate(state.game.rule, arrangement)
    final = list(trial)
    for i, v in verdicts:
        if v is Verdict.REJECT:
            events.append(FeedbackEvent(THROWN_OFF, i, trial[i]))
            final[i] = None

    new_state = BoardState(
        arrangement=Arrangement(tuple(final), state.game.tiles),
        game=state.game,
        event_log=state.event_log + tuple(events),
        completed=False,
    )
    return new_state, events


def replay_events(game: TileGame, events: tuple[FeedbackEvent, ...]) -> BoardState:
    """Rebuild a board by re-applying the player actions in an event log.

    Only placed/removed entries are actions; the board re-derives all
    feedback, so a log from a differently-ruled game will not replay.
    """
    state = empty_board(game)
    for event in events:
        if event.kind == PLACED:
            state, _ = place(state, event.tile, event.slot)
        elif event.kind == REMOVED:
            state, _ = remove(state, event.slot)
    return state


def events_to_jsonl(events: tuple[FeedbackEvent, ...]) -> str:
    return "".join(
        json.dumps({"kind": e.kind, "slot": e.slot, "tile": e.tile}, sort_keys=True) + "\n"
        for e in events
    )


def events_from_jsonl(text: str) -> tuple[FeedbackEvent, ...]:
    events = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            kind, slot, tile = doc["kind"], doc["slot"], doc["tile"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise BoardError(f"bad event on line {line_number}: {exc}") from None
        if kind not in EVENT_KINDS:
            raise BoardError(f"bad event on line {line_number}: unknown kind {kind!r}")
        events.append(FeedbackEvent(kind, slot, tile))
    return tuple(events)


# ---------------------------------------------------------------------------
# agent environment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Observation:
    """What an agent sees: slot contents and the last action's feedback."""

    slots: tuple[int | None, int | None, int | None, int | None, int | None]
    last_events: tuple[str, ...]


class TileBoardEnv:
    """Reset/step interface over a board, in the usual gym shape.

    Integer actions: 0 is a no-op; 1 + tile*5 + slot places that tile;
    1 + 5*N + slot removes whatever sits in the slot. Rewards: +1.0 for
    completing the board, -0.01 per thrown-off tile, -0.01 for an
    illegal action (which changes nothing); all else 0. An episode is
    done when the board completes.
    """

    def __init__(self, game: TileGame):
        self.game = game
        self._state = empty_board(game)

    @property
    def state(self) -> BoardState:
        return self._state

    @property
    def action_count(self) -> int:
        return 1 + 5 * len(self.game.tiles) + BOARD_SLOTS

    def encode_place(self, tile_id: int, slot: int) -> int:
        return 1 + tile_id * BOARD_SLOTS + slot

    def encode_remove(self, slot: int) -> int:
        return 1 + BOARD_SLOTS * len(self.game.tiles) + slot

    def reset(self, seed: int | None = None) -> Observation:
        # The board itself is deterministic; `seed` is accepted for
        # interface parity with stochastic environments.
        del seed
        self._state = empty_board(self.game)
        return self._observe(())

    def step(self, action: int) -> tuple[Observation, float, bool]:
        if self._state.completed:
            return self._observe(()), 0.0, True
        if action == 0:
            return self._observe(()), 0.0, False
        try:
            kind, args = self._decode(action)
            if kind == "place":
                self._state, events = place(self._state, *args)
            else:
                self._state, events = remove(self._state, *args)
        except BoardError:
            return self._observe(()), -0.01, False
        reward = sum(
            1.0 if e.kind == COMPLETED else -0.01 if e.kind == THROWN_OFF else 0.0
            for e in events
        )
        return self._observe(tuple(e.kind for e in events)), reward, self._state.completed

    def _decode(self, action: int) -> tuple[str, tuple[int, ...]]:
        n = len(self.game.tiles)
        if 1 <= action <= 5 * n:
            tile_id, slot = divmod(action - 1, BOARD_SLOTS)
            return "place", (tile_id, slot)
        if 5 * n < action <= 5 * n + BOARD_SLOTS:
            return "remove", (action - 1 - 5 * n,)
        raise BoardError(f"action {action} outside 0..{self.action_count - 1}")

    def _observe(self, last_events: tuple[str, ...]) -> Observation:
        return Observation(self._state.arrangement.slots, last_events)
