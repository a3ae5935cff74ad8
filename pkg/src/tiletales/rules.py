"""Rule concepts, verdict evaluation, generation, mutation, and rendering.

Five leaf concepts plus an ordered composite. A rule looks at an
arrangement of tiles on the five-slot board and hands each occupied slot
a verdict: accept, reject, or ignore. Composites merge child verdicts by
precedence (reject beats accept beats ignore).

A set of five tiles "solves" a rule when some left-to-right ordering of
them draws no reject; for rules without adjacency children the ordering
never matters and one evaluation settles it.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from enum import IntEnum
from random import Random
from typing import Iterable, Sequence

from .tiles import Tile, TileSet

BOARD_SLOTS = 5
MAX_CHILDREN = 5
COUNT_LIMIT_RANGE = (1, 4)

#: Parameter re-sample retry budget before a mutation accepts "no change".
_MUTATE_RETRIES = 20


class RuleError(ValueError):
    """A rule document is malformed or violates a structural invariant."""


class RuleBindingError(RuleError):
    """A rule references a property or value absent from the tile set."""


class Verdict(IntEnum):
    """Per-tile outcome. Order doubles as merge precedence (max wins)."""

    IGNORE = 0
    ACCEPT = 1
    REJECT = 2


@dataclass(frozen=True)
class ExcludeWhere:
    property: str
    value: str


@dataclass(frozen=True)
class ExclusiveWhere:
    property: str
    value: str


@dataclass(frozen=True)
class MatchProperty:
    property: str


@dataclass(frozen=True)
class NotAdjacent:
    property: str
    value: str
    property2: str
    value2: str


@dataclass(frozen=True)
class CountLimit:
    number: int
    property: str
    value: str


@dataclass(frozen=True)
class Composite:
    children: tuple[RuleNode, ...] = ()


RuleNode = ExcludeWhere | ExclusiveWhere | MatchProperty | NotAdjacent | CountLimit | Composite

#: Concept order is load-bearing: random_rule draws an index into this.
LEAF_CONCEPTS: tuple[type, ...] = (ExcludeWhere, ExclusiveWhere, MatchProperty, NotAdjacent, CountLimit)

_CONCEPT_NAMES = {
    ExcludeWhere: "ExcludeWhere",
    ExclusiveWhere: "ExclusiveWhere",
    MatchProperty: "MatchProperty",
    NotAdjacent: "NotAdjacent",
    CountLimit: "CountLimit",
    Composite: "Composite",
}


@dataclass(frozen=True)
class Arrangement:
    """Five left-to-right board slots, each empty or holding one tile id."""

    slots: tuple[int | None, int | None, int | None, int | None, int | None]
    tileset: TileSet

    def __post_init__(self) -> None:
        if len(self.slots) != BOARD_SLOTS:
            raise ValueError(f"an arrangement has exactly {BOARD_SLOTS} slots")
        present = [tid for tid in self.slots if tid is not None]
        if len(set(present)) != len(present):
            raise ValueError("a tile cannot occupy two slots")
        for tid in present:
            self.tileset.tile(tid)  # raises KeyError for foreign ids

    @property
    def occupied(self) -> list[tuple[int, Tile]]:
        return [(i, self.tileset.tile(tid)) for i, tid in enumerate(self.slots) if tid is not None]


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def validate_rule(rule: RuleNode, schema: dict[str, tuple[str, ...]], *, _depth: int = 0) -> None:
    """Raise RuleBindingError / RuleError unless `rule` is well formed for `schema`."""
    if isinstance(rule, Composite):
        if _depth > 0:
            raise RuleError("composites may not nest inside composites")
        if len(rule.children) > MAX_CHILDREN:
            raise RuleError(f"composite has {len(rule.children)} children; at most {MAX_CHILDREN} allowed")
        for child in rule.children:
            validate_rule(child, schema, _depth=_depth + 1)
        return
    pairs: list[tuple[str, str | None]]
    if isinstance(rule, (ExcludeWhere, ExclusiveWhere)):
        pairs = [(rule.property, rule.value)]
    elif isinstance(rule, MatchProperty):
        pairs = [(rule.property, None)]
    elif isinstance(rule, NotAdjacent):
        pairs = [(rule.property, rule.value), (rule.property2, rule.value2)]
    elif isinstance(rule, CountLimit):
        lo, hi = COUNT_LIMIT_RANGE
        if not isinstance(rule.number, int) or not lo <= rule.number <= hi:
            raise RuleError(f"count limit {rule.number!r} outside {lo}..{hi}")
        pairs = [(rule.property, rule.value)]
    else:
        raise RuleError(f"not a rule node: {rule!r}")
    for prop, value in pairs:
        if prop not in schema:
            raise RuleBindingError(f"{_CONCEPT_NAMES[type(rule)]}: property {prop!r} not in tile-set schema")
        if value is not None and value not in schema[prop]:
            raise RuleBindingError(
                f"{_CONCEPT_NAMES[type(rule)]}: value {value!r} not allowed for property {prop!r}"
            )


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _leaf_verdicts(rule: RuleNode, occupied: list[tuple[int, Tile]]) -> dict[int, Verdict]:
    if isinstance(rule, ExcludeWhere):
        return {
            i: Verdict.REJECT if t.properties[rule.property] == rule.value else Verdict.IGNORE
            for i, t in occupied
        }
    if isinstance(rule, ExclusiveWhere):
        return {
            i: Verdict.ACCEPT if t.properties[rule.property] == rule.value else Verdict.REJECT
            for i, t in occupied
        }
    if isinstance(rule, MatchProperty):
        reference = occupied[0][1].properties[rule.property]
        return {
            i: Verdict.ACCEPT if t.properties[rule.property] == reference else Verdict.REJECT
            for i, t in occupied
        }
    if isinstance(rule, NotAdjacent):
        verdicts = {i: Verdict.IGNORE for i, _ in occupied}
        by_slot = dict(occupied)
        for i in range(BOARD_SLOTS - 1):
            left, right = by_slot.get(i), by_slot.get(i + 1)
            if left is None or right is None:
                continue
            if _offending_pair(rule, left, right):
                verdicts[i + 1] = Verdict.REJECT
        return verdicts
    if isinstance(rule, CountLimit):
        verdicts = {}
        matches = 0
        for i, t in occupied:
            if t.properties[rule.property] == rule.value:
                matches += 1
                verdicts[i] = Verdict.REJECT if matches > rule.number else Verdict.IGNORE
            else:
                verdicts[i] = Verdict.IGNORE
        return verdicts
    raise RuleError(f"not a leaf rule: {rule!r}")


def _offending_pair(rule: NotAdjacent, left: Tile, right: Tile) -> bool:
    # "cannot be adjacent" binds in either left/right order.
    a_left = left.properties[rule.property] == rule.value
    b_left = left.properties[rule.property2] == rule.value2
    a_right = right.properties[rule.property] == rule.value
    b_right = right.properties[rule.property2] == rule.value2
    return (a_left and b_right) or (b_left and a_right)


def rule_children(rule: RuleNode) -> tuple[RuleNode, ...]:
    """The leaf sequence a rule merges over (a leaf is its own singleton)."""
    return rule.children if isinstance(rule, Composite) else (rule,)


def _merged_verdicts(rule: RuleNode, occupied: list[tuple[int, Tile]]) -> dict[int, Verdict]:
    # Validation-free core of evaluate, for callers in a tight loop.
    merged = {i: Verdict.IGNORE for i, _ in occupied}
    for child in rule_children(rule):
        for i, verdict in _leaf_verdicts(child, occupied).items():
            if verdict > merged[i]:
                merged[i] = verdict
    return merged


def evaluate(rule: RuleNode, arrangement: Arrangement) -> list[tuple[int, Verdict]]:
    """Verdict per occupied slot, in slot order; empty slots yield nothing.

    Raises RuleBindingError when the rule references properties or values
    the arrangement's tile set does not declare (a stale rule).
    """
    validate_rule(rule, arrangement.tileset.schema)
    occupied = arrangement.occupied
    if not occupied:
        return []
    return sorted(_merged_verdicts(rule, occupied).items())


# ---------------------------------------------------------------------------
# five-tile set validity
# ---------------------------------------------------------------------------


def _order_free_rejects(rule: RuleNode, tiles: Sequence[Tile]) -> bool:
    """Would this order-insensitive leaf reject anything on a full board?

    Valid for every leaf except NotAdjacent: their any-reject outcome is
    the same under every permutation of a full board.
    """
    if isinstance(rule, ExcludeWhere):
        return any(t.properties[rule.property] == rule.value for t in tiles)
    if isinstance(rule, ExclusiveWhere):
        return any(t.properties[rule.property] != rule.value for t in tiles)
    if isinstance(rule, MatchProperty):
        values = {t.properties[rule.property] for t in tiles}
        return len(values) > 1
    if isinstance(rule, CountLimit):
        matches = sum(1 for t in tiles if t.properties[rule.property] == rule.value)
        return matches > rule.number
    raise RuleError(f"not an order-free leaf: {rule!r}")


def is_valid_set(rule: RuleNode, tile_ids: Iterable[int], tileset: TileSet) -> bool:
    """True iff some ordering of these five tiles draws no reject verdict."""
    raw = list(tile_ids)
    ids = sorted(set(raw))
    if len(raw) != BOARD_SLOTS or len(ids) != BOARD_SLOTS:
        raise ValueError(f"a solution set holds exactly {BOARD_SLOTS} distinct tiles")
    validate_rule(rule, tileset.schema)
    tiles = [tileset.tile(i) for i in ids]
    adjacency = [c for c in rule_children(rule) if isinstance(c, NotAdjacent)]
    for child in rule_children(rule):
        if isinstance(child, NotAdjacent):
            continue
        if _order_free_rejects(child, tiles):
            return False
    if not adjacency:
        return True
    return _seating_exists(_adjacency_signatures(adjacency, tiles))


def _adjacency_signatures(
    adjacency: Sequence[NotAdjacent], tiles: Sequence[Tile]
) -> tuple[tuple[tuple[bool, bool], ...], ...]:
    """Per-tile (matches side A, matches side B) flags for each adjacency rule.

    Only these flag tuples matter for seat-ability; tiles with equal
    flags are interchangeable.
    """
    return tuple(
        tuple(
            (t.properties[r.property] == r.value, t.properties[r.property2] == r.value2)
            for r in adjacency
        )
        for t in tiles
    )


def _seating_exists(signatures: tuple[tuple[tuple[bool, bool], ...], ...]) -> bool:
    """Can these flagged tiles be seated in a row with no offending pair?

    Permutation search, straight from the exists-an-ordering definition.
    """
    n_rules = len(signatures[0]) if signatures else 0
    for k in range(n_rules):
        if any(s[k][0] for s in signatures) and any(s[k][1] for s in signatures):
            break
    else:
        return True  # no rule has both sides present: nothing can offend
    for perm in set(itertools.permutations(signatures)):
        if all(
            not ((x[k][0] and y[k][1]) or (x[k][1] and y[k][0]))
            for x, y in zip(perm, perm[1:])
            for k in range(n_rules)
        ):
            return True
    return False


# ---------------------------------------------------------------------------
# generation and mutation
# ---------------------------------------------------------------------------


def _sample_pair(schema: dict[str, tuple[str, ...]], sample_tiles: Sequence[Tile], rng: Random) -> tuple[str, str]:
    # Draw order (tile, then property) is part of the determinism contract.
    tile = sample_tiles[rng.randrange(len(sample_tiles))]
    props = tuple(schema)
    prop = props[rng.randrange(len(props))]
    return prop, tile.properties[prop]


def random_rule(schema: dict[str, tuple[str, ...]], sample_tiles: Sequence[Tile], rng: Random) -> RuleNode:
    """A random leaf rule with parameters sampled from real tiles.

    The concept is uniform over the five leaf concepts; each (property,
    value) pair is the value a uniformly chosen sample tile carries for a
    uniformly chosen property, so generated rules always bind.
    """
    if not sample_tiles:
        raise ValueError("sample_tiles must be non-empty")
    concept = LEAF_CONCEPTS[rng.randrange(len(LEAF_CONCEPTS))]
    if concept is ExcludeWhere or concept is ExclusiveWhere:
        prop, value = _sample_pair(schema, sample_tiles, rng)
        return concept(prop, value)
    if concept is MatchProperty:
        prop, _ = _sample_pair(schema, sample_tiles, rng)
        return MatchProperty(prop)
    if concept is NotAdjacent:
        prop, value = _sample_pair(schema, sample_tiles, rng)
        prop2, value2 = _sample_pair(schema, sample_tiles, rng)
        return NotAdjacent(prop, value, prop2, value2)
    prop, value = _sample_pair(schema, sample_tiles, rng)
    lo, hi = COUNT_LIMIT_RANGE
    return CountLimit(lo + rng.randrange(hi - lo + 1), prop, value)


def _redraw(rng: Random, current, draw):
    """Re-sample until the value changes, within a bounded retry budget.

    Degenerate sampling support (say, every sample tile is red) can make
    change impossible; after the budget runs out the old value stands.
    """
    for _ in range(_MUTATE_RETRIES):
        candidate = draw()
        if candidate != current:
            return candidate
    return candidate


def _mutate_leaf(rule: RuleNode, schema: dict[str, tuple[str, ...]], sample_tiles: Sequence[Tile], rng: Random) -> RuleNode:
    props = tuple(schema)

    def fresh_property(current: str) -> tuple[str, str]:
        prop = _redraw(rng, current, lambda: props[rng.randrange(len(props))])
        # A new property invalidates the old value; re-derive from a tile.
        tile = sample_tiles[rng.randrange(len(sample_tiles))]
        return prop, tile.properties[prop]

    def fresh_value(prop: str, current: str) -> str:
        return _redraw(
            rng, current, lambda: sample_tiles[rng.randrange(len(sample_tiles))].properties[prop]
        )

    if isinstance(rule, (ExcludeWhere, ExclusiveWhere)):
        if rng.randrange(2) == 0:
            prop, value = fresh_property(rule.property)
            return type(rule)(prop, value)
        return type(rule)(rule.property, fresh_value(rule.property, rule.value))
    if isinstance(rule, MatchProperty):
        prop = _redraw(rng, rule.property, lambda: props[rng.randrange(len(props))])
        return MatchProperty(prop)
    if isinstance(rule, NotAdjacent):
        current = ((rule.property, rule.value), (rule.property2, rule.value2))
        which = rng.randrange(2)
        pair = _redraw(rng, current[which], lambda: _sample_pair(schema, sample_tiles, rng))
        pairs = [current[0], current[1]]
        pairs[which] = pair
        return NotAdjacent(pairs[0][0], pairs[0][1], pairs[1][0], pairs[1][1])
    if isinstance(rule, CountLimit):
        lo, hi = COUNT_LIMIT_RANGE
        if rng.randrange(2) == 0:
            number = _redraw(rng, rule.number, lambda: lo + rng.randrange(hi - lo + 1))
            return CountLimit(number, rule.property, rule.value)
        pair = _redraw(
            rng, (rule.property, rule.value), lambda: _sample_pair(schema, sample_tiles, rng)
        )
        return CountLimit(rule.number, pair[0], pair[1])
    raise RuleError(f"not a leaf rule: {rule!r}")


def mutate(rule: RuleNode, schema: dict[str, tuple[str, ...]], sample_tiles: Sequence[Tile], rng: Random) -> RuleNode:
    """A mutated copy of `rule`; the input is never modified.

    Leaves re-sample one parameter. Composites pick uniformly among
    mutate-a-child, replace-a-child, append a fresh rule (below the
    5-child cap), and drop a child (keeping at least one); infeasible
    picks are re-drawn.
    """
    if not sample_tiles:
        raise ValueError("sample_tiles must be non-empty")
    if not isinstance(rule, Composite):
        return _mutate_leaf(rule, schema, sample_tiles, rng)
    children = list(rule.children)
    while True:
        action = rng.randrange(4)
        if action == 0 and children:  # mutate one child
            idx = rng.randrange(len(children))
            children[idx] = _mutate_leaf(children[idx], schema, sample_tiles, rng)
            break
        if action == 1 and children:  # replace one child
            idx = rng.randrange(len(children))
            children[idx] = random_rule(schema, sample_tiles, rng)
            break
        if action == 2 and len(children) < MAX_CHILDREN:  # append
            children.append(random_rule(schema, sample_tiles, rng))
            break
        if action == 3 and len(children) > 1:  # remove
            del children[rng.randrange(len(children))]
            break
    return Composite(tuple(children))


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def render_rule(rule: RuleNode) -> str:
    """The deterministic English sentence a player (or narrator) sees."""
    if isinstance(rule, Composite):
        return " and ".join(render_rule(child) for child in rule.children)
    if isinstance(rule, ExcludeWhere):
        return f"Exclude any where {rule.property} is equal to {rule.value}"
    if isinstance(rule, ExclusiveWhere):
        return f"Exclusively for any where {rule.property} is equal to {rule.value}"
    if isinstance(rule, MatchProperty):
        return f"Only the ones where the value of {rule.property} match"
    if isinstance(rule, NotAdjacent):
        return (
            f"Those with {rule.property} set to {rule.value} cannot be adjacent to "
            f"those with {rule.property2} set to {rule.value2}"
        )
    if isinstance(rule, CountLimit):
        return f"There can only be {rule.number} with {rule.property} set to {rule.value}"
    raise RuleError(f"not a rule node: {rule!r}")


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def rule_to_dict(rule: RuleNode) -> dict:
    """Plain-dict form: {"concept", "params", "children"}."""
    if isinstance(rule, Composite):
        return {"concept": "Composite", "params": {}, "children": [rule_to_dict(c) for c in rule.children]}
    params: dict[str, object]
    if isinstance(rule, (ExcludeWhere, ExclusiveWhere)):
        params = {"property": rule.property, "value": rule.value}
    elif isinstance(rule, MatchProperty):
        params = {"property": rule.property}
    elif isinstance(rule, NotAdjacent):
        params = {
            "property": rule.property,
            "value": rule.value,
            "property2": rule.property2,
            "value2": rule.value2,
        }
    elif isinstance(rule, CountLimit):
        params = {"number": rule.number, "property": rule.property, "value": rule.value}
    else:
        raise RuleError(f"not a rule node: {rule!r}")
    return {"concept": _CONCEPT_NAMES[type(rule)], "params": params, "children": []}


def rule_from_dict(doc: object) -> RuleNode:
    """Inverse of rule_to_dict; raises RuleError on malformed documents."""
    if not isinstance(doc, dict):
        raise RuleError(f"rule document must be an object, got {type(doc).__name__}")
    concept = doc.get("concept")
    params = doc.get("params", {})
    children = doc.get("children", [])
    if not isinstance(params, dict) or not isinstance(children, list):
        raise RuleError("'params' must be an object and 'children' a list")
    try:
        if concept == "Composite":
            return Composite(tuple(rule_from_dict(c) for c in children))
        if children:
            raise RuleError(f"leaf concept {concept!r} cannot have children")
        if concept == "ExcludeWhere":
            return ExcludeWhere(params["property"], params["value"])
        if concept == "ExclusiveWhere":
            return ExclusiveWhere(params["property"], params["value"])
        if concept == "MatchProperty":
            return MatchProperty(params["property"])
        if concept == "NotAdjacent":
            return NotAdjacent(params["property"], params["value"], params["property2"], params["value2"])
        if concept == "CountLimit":
            return CountLimit(params["number"], params["property"], params["value"])
    except KeyError as exc:
        raise RuleError(f"{concept}: missing parameter {exc.args[0]!r}") from None
    raise RuleError(f"unknown rule concept {concept!r}")


def dumps_rule(rule: RuleNode) -> str:
    return json.dumps(rule_to_dict(rule), indent=2) + "\n"


def loads_rule(text: str) -> RuleNode:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RuleError(f"not valid JSON: {exc}") from exc
    return rule_from_dict(doc)


def canonical_rule_json(rule: RuleNode) -> str:
    """Compact stable text form, fit for cache keys and equality checks."""
    return json.dumps(rule_to_dict(rule), sort_keys=True, separators=(",", ":"))
